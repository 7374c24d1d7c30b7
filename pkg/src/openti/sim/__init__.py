from .adapter import AdapterConfig, external_backend
from .engine import (
    CyclingController,
    MetricsReport,
    SimDriver,
    SimResult,
    TscAction,
    TscObservation,
    run,
)
from .kernel import KERNEL_IMPL, StepKernel
from .scenario import Scenario, SimSettings, assemble_scenario

__all__ = [
    "AdapterConfig",
    "CyclingController",
    "KERNEL_IMPL",
    "MetricsReport",
    "Scenario",
    "SimDriver",
    "SimResult",
    "SimSettings",
    "StepKernel",
    "TscAction",
    "TscObservation",
    "assemble_scenario",
    "external_backend",
    "run",
]
