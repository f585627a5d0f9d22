import numpy as np
import pytest

from sdmimo.pa import PaModel, ShapingBudget


@pytest.fixture(scope="session")
def rapp_pa() -> PaModel:
    """The 3GPP modified Rapp parameter set used throughout the experiments."""
    return PaModel.modified_rapp(gain=16.0, r_max=0.1187, phi=1.1, zeta=4.0,
                                 b=-345.0, c=0.17)


@pytest.fixture(scope="session")
def twta_pa() -> PaModel:
    return PaModel.twta(gain=16.0, r_max=0.1187)


@pytest.fixture(scope="session")
def ideal_pa() -> PaModel:
    return PaModel.ideal(gain=16.0, r_max=0.1187)


@pytest.fixture(scope="session")
def rapp_budget(rapp_pa) -> ShapingBudget:
    return ShapingBudget.from_pa(rapp_pa, rapp_pa.r_max)


def complex_uniform_disk(rng: np.random.Generator, shape, radius: float) -> np.ndarray:
    """Uniformly distributed points on the complex disk of given radius."""
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size=shape))
    phase = rng.uniform(-np.pi, np.pi, size=shape)
    return r * np.exp(1j * phase)
