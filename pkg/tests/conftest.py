import numpy as np
import pytest

from fingergrowth.growth import builtin_chart
from fingergrowth.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def chart():
    return builtin_chart()


@pytest.fixture(scope="session")
def default_dataset(chart):
    """Default synthetic dataset (seed 0), shared across tests."""
    return generate(SynthConfig(seed=0), chart)


def random_config(rng: np.random.Generator, m: int, scale: float = 10.0) -> np.ndarray:
    return rng.uniform(-scale, scale, (m, 2))
