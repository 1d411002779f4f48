"""Numerical lab for weighted Choquard equations on radial grids."""
from .errors import (
    ChoquardError,
    DivergentIntegral,
    GridMismatch,
    InvalidParameters,
    ModeError,
    NonexistenceRange,
    NonfiniteSample,
    OverlapError,
    QuadratureError,
    UncoveredRange,
    ZeroFunctionError,
)
from .exponents import ProblemParams, RegularityVerdict
from .grid import RadialFunction, RadialGrid
from .kernel import KernelMatrix, assemble_kernel
from .energy import EnergyReport
from .solver import SolveReport, SolverConfig
from .hlslab import McEstimate

__version__ = "0.1.0"
