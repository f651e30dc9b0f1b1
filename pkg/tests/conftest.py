import numpy as np
import pytest

from clickvos.data.sample_io import write_sample
from clickvos.data.scene import ObjectSpec, SceneSpec, gen_sequence, make_specs
from clickvos.engine.tensor import Graph
from clickvos.model.config import ModelConfig


@pytest.fixture(autouse=True)
def fresh_graph():
    """Every test records on its own graph so no state leaks between tests."""
    with Graph() as graph:
        yield graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(channels=8, n_heads=2, stride=4, max_objects=4, seed=0)


def two_square_spec(height=16, width=16, frames=3, velocity=(1.0, 0.0), name="squares"):
    """Two non-overlapping rectangles translating with integer velocity."""
    return SceneSpec(
        height=height,
        width=width,
        frames=frames,
        objects=[
            ObjectSpec("rectangle", (4.0, 4.0), (0.9, 0.1, 0.1), (4.0, 4.0), velocity),
            ObjectSpec("rectangle", (4.0, 6.0), (0.1, 0.1, 0.9), (10.0, 11.0), velocity),
        ],
        background_seed=7,
        occlusion=False,
        seed=0,
        name=name,
    )


@pytest.fixture
def tiny_sample():
    return gen_sequence(two_square_spec())


@pytest.fixture
def dataset_dir(tmp_path):
    root = tmp_path / "data"
    for spec in make_specs(3, 16, 16, 3, 2, seed=5):
        write_sample(gen_sequence(spec), root / spec.name)
    return root


@pytest.fixture
def square_spec():
    return two_square_spec
