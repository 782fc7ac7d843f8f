"""Linear-response model of a driven optomechanical cavity."""
from .errors import *  # noqa: F401,F403
from .params import (  # noqa: F401
    DerivedParams,
    SystemParams,
    derive,
    figure_params,
    from_figure_targets,
    validate,
)

__version__ = "0.1.0"
