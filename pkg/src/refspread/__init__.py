"""Reference spreading control for a planar arm making nominally simultaneous impacts."""
from .control import ALL_STRATEGIES, Controller, ControllerConfig, ControlMode, Strategy
from .params import DEFAULT_PARAMS, FlexState, ModelParams, State
from .reference import ReferenceBundle, Scenario, scenario_reference
from .sim_flex import run_flex
from .sim_rigid import SimConfig, run_rigid
from .simlog import SimLog

__all__ = [
    "ALL_STRATEGIES", "Controller", "ControllerConfig", "ControlMode", "Strategy",
    "DEFAULT_PARAMS", "FlexState", "ModelParams", "State",
    "ReferenceBundle", "Scenario", "scenario_reference",
    "SimConfig", "run_rigid", "run_flex", "SimLog",
]

__version__ = "0.1.0"
