"""Intrinsic image decomposition with an L0 reflectance prior and a TV
shading prior anchored on precomputed learning-based estimates."""

from .decompose import DecompositionResult, PriorBundle, build_priors, decompose, run
from .errors import (EvaluationError, FormatError, IntegrityError, NumericalError,
                     ParameterError, ShapeError)
from .params import SolverParams
from .tensor import GradientPair, ImageTensor

__version__ = "0.1.0"

__all__ = [
    "DecompositionResult", "GradientPair", "ImageTensor", "PriorBundle", "SolverParams",
    "build_priors", "decompose", "run",
    "EvaluationError", "FormatError", "IntegrityError", "NumericalError",
    "ParameterError", "ShapeError",
]
