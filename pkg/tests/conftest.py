import pytest

from optomech.params import figure_params


@pytest.fixture(scope="session")
def unresolved():
    """omega_m = 0.2 kappa, Delta = -0.7 kappa, D_opt = 30, Q = 1000."""
    return figure_params(0.2)


@pytest.fixture(scope="session")
def resolved_omit():
    """omega_m = 5 kappa with the anti-Stokes sideband on cavity resonance."""
    return figure_params(5.0, delta=-5.0)
