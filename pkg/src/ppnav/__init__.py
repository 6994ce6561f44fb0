"""Navigation on Poisson point processes: small-world, radial and compass
rules, their trees, regeneration structure and limit constants."""

from .model import ModelParams
from .point_process import InvalidInput, PointSet, Window, sample_ppp, palm_add

__version__ = "0.1.0"

__all__ = ["ModelParams", "InvalidInput", "PointSet", "Window", "sample_ppp", "palm_add", "__version__"]
