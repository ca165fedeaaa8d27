"""Time-harmonic elastic scattering by clusters of small, dense, resonant inclusions."""
from .errors import NumericalError, ValidationError
from .kernels import Frequency, IncidentPlaneWave, Material

__all__ = ["Material", "Frequency", "IncidentPlaneWave", "ValidationError", "NumericalError"]
__version__ = "0.1.0"
