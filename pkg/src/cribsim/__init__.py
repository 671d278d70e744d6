"""cribsim: a deterministic, desk-scale nursery simulator.

Infant sensorimotor interface (foveated stereo vision, 2,110-sensor skin,
53-motor body, 100 Hz loop), a developmental curriculum, scripted
caregiver scenarios, a developmental-psychology evaluation harness, and a
lockstep step/reset wire protocol.
"""

from .body import Body, N_MOTORS, N_TOUCH
from .curriculum import Stage, StageSchedule, capability_mask, stage_at, stage_strength
from .env import Environment, load_environment
from .errors import CribsimError, ExperimentError, ParseError, ProtocolError, SceneError
from .kernels import BACKEND as KERNEL_BACKEND
from .observation import ObservationFrame
from .sceneconfig import SceneConfig, load_scene_config, parse_scene_config
from .world import DT, Entity, Scene, SimClock, create_scene

__version__ = "0.1.0"

__all__ = [
    "Body", "N_MOTORS", "N_TOUCH", "Stage", "StageSchedule",
    "capability_mask", "stage_at", "stage_strength", "Environment",
    "load_environment", "CribsimError", "ExperimentError", "ParseError",
    "ProtocolError", "SceneError", "KERNEL_BACKEND", "ObservationFrame",
    "SceneConfig", "load_scene_config", "parse_scene_config", "DT",
    "Entity", "Scene", "SimClock", "create_scene", "__version__",
]
