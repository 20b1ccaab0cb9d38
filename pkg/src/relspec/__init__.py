"""Finite-dimensional relative spectral triples: Green models, Clifford normals, boundary operators,
Calderon projectors, doubles and index checks."""
from .green_model import AlgebraElement, AlgebraModel, CheckReport, GreenOperatorModel, all_passed, validate_model
from .models import ScenarioConfig
from .normal import CliffordNormal
from .numkernel import GradedSpace, InnerProduct, StructuralError
from .suites import SUITES, run_suite

__version__ = "0.1.0"

__all__ = [
    "AlgebraElement", "AlgebraModel", "CheckReport", "CliffordNormal", "GradedSpace", "GreenOperatorModel",
    "InnerProduct", "SUITES", "ScenarioConfig", "StructuralError", "all_passed", "run_suite", "validate_model",
]
