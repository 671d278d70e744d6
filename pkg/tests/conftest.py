import numpy as np
import pytest

from cribsim.sceneconfig import SceneConfig
from cribsim.world import EntitySpec, Scene, box, capsule, plane, sphere


@pytest.fixture
def empty_scene():
    return Scene(seed=42)


def make_scene(seed=0, entities=(), gravity=(0.0, -9.81, 0.0)):
    s = Scene(seed=seed, gravity=gravity)
    for spec in entities:
        s.add_entity(spec)
    return s


def static_sphere(name, pos, radius=0.1, **kw):
    return EntitySpec(name=name, shape=sphere(radius), pos=pos, **kw)
