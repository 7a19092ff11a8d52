import numpy as np
import pytest

from qimlab.losses import QimModel, loss
from qimlab.measurements import gen_gaussian_ensemble, intensities


@pytest.fixture(scope="session")
def small_instance():
    """Real ensemble with a unit first-basis truth vector (n=16, m=96)."""
    E = gen_gaussian_ensemble(16, 96, "real", seed=11)
    x = np.zeros(16)
    x[0] = 1.0
    y = intensities(E, x).y
    return E, x, y


ALL_MODELS = [QimModel.qim1(), QimModel.qim2(), QimModel.qim3(), QimModel.intensity()]
QIM_MODELS = ALL_MODELS[:3]


def numeric_gradient(model, E, y, u, h=None):
    """Central finite differences of the loss (real field)."""
    u = np.asarray(u, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(u))
    g = np.zeros_like(u)
    for i in range(len(u)):
        up, dn = u.copy(), u.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (loss(model, E, y, up).value - loss(model, E, y, dn).value) / (2 * h)
    return g


def numeric_dir_curvature(model, E, y, u, xi, h=None):
    """Second-order central difference along a unit direction."""
    u = np.asarray(u, dtype=float)
    if h is None:
        h = 1e-4 * (1.0 + np.linalg.norm(u))
    fp = loss(model, E, y, u + h * xi).value
    f0 = loss(model, E, y, u).value
    fm = loss(model, E, y, u - h * xi).value
    return (fp - 2.0 * f0 + fm) / (h * h)
