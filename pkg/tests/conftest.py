import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_frame(rng, h=16, w=16, c=3, scale=1.0):
    return rng.uniform(-scale, scale, size=(h, w, c))


def central_difference(fn, x, coords, h=1e-6):
    """Finite-difference oracle: gradient of scalar fn at selected flat
    coordinates of x."""
    grads = []
    flat = x.ravel().copy()
    for idx in coords:
        bumped = flat.copy()
        bumped[idx] += h
        hi = fn(bumped.reshape(x.shape))
        bumped[idx] -= 2 * h
        lo = fn(bumped.reshape(x.shape))
        grads.append((hi - lo) / (2 * h))
    return np.array(grads)
