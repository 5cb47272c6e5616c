"""Zero-temperature Glauber droplets and the anisotropic curve-shortening flow they follow."""
from .anisotropy import AnisotropyProfile
from .geometry import MarkerCurve
from .glauber import RngStream, SpinLattice
from .shapes import ShapeSpec

__version__ = "0.1.0"

__all__ = ["AnisotropyProfile", "MarkerCurve", "RngStream", "ShapeSpec", "SpinLattice", "__version__"]
