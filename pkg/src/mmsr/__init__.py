"""Mixed-model sequencing under stochastic vehicle failures with integrated reinsertion."""

from .model import (
    SKIP, ContractViolation, Instance, ObjectivePoint, OldFailedVehicle, Scenario,
    Solution, Station, Vehicle, validate_instance,
)
from .instances import GeneratorConfig, ScenarioSample, generate_instance, sample_scenarios
from .evaluator import Evaluator, build_final_sequence, evaluate, station_overload

__version__ = "0.1.0"

__all__ = [
    "SKIP", "ContractViolation", "Instance", "ObjectivePoint", "OldFailedVehicle", "Scenario",
    "Solution", "Station", "Vehicle", "validate_instance", "GeneratorConfig", "ScenarioSample",
    "generate_instance", "sample_scenarios", "Evaluator", "build_final_sequence", "evaluate",
    "station_overload",
]
