import numpy as np
import pytest

from salgp import GpModel, SeArdKernel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_kernel(rng, d, noise=None):
    ls = rng.uniform(0.4, 2.0, size=d)
    sf = rng.uniform(0.7, 1.5)
    sn = rng.uniform(0.0, 0.3) if noise is None else noise
    return SeArdKernel(ls, signal_std=sf, noise_std=sn)


def random_model(rng, n, d, noise=None, fitted=True):
    kernel = random_kernel(rng, d, noise)
    model = GpModel(
        kernel,
        mean_constant=rng.normal(scale=0.5),
        inputs=rng.uniform(-2.0, 2.0, size=(n, d)),
        targets=rng.normal(size=n),
    )
    return model.fit_cholesky() if fitted else model
