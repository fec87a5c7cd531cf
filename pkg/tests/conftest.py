import importlib.resources

import pytest


@pytest.fixture(scope="session")
def sample_scene_bytes() -> bytes:
    return (importlib.resources.files("rubbleforge") / "data/sample_scene.json").read_bytes()


TINY_SCENE = b"""{
  "seed": 5,
  "rooms": [{"archetype": "simple_door", "position": [0, 0], "material": "wood"}],
  "cameras": [{"position": [-3.0, 2.0, -3.0], "look_at": [2.5, 1.0, 2.5],
               "width": 64, "height": 48}]
}
"""


@pytest.fixture(scope="session")
def tiny_scene_bytes() -> bytes:
    return TINY_SCENE
