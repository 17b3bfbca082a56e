"""Independent reference implementations shared by the tests."""
import numpy as np


def central_difference(fun, phi, step=1e-5):
    """Central differences of a scalar function of a phase vector."""
    phi = np.asarray(phi, dtype=float)
    out = np.empty(phi.size)
    for k in range(phi.size):
        e = np.zeros(phi.size)
        e[k] = step
        out[k] = (fun(phi + e) - fun(phi - e)) / (2 * step)
    return out


def plain_product(phi, x):
    """Reference QSP product built from explicit 2x2 matrices."""
    s = np.sqrt(1 - x * x)
    w = np.array([[x, 1j * s], [1j * s, x]])

    def rz(a):
        return np.diag([np.exp(1j * a), np.exp(-1j * a)])

    u = rz(phi[0])
    for p in phi[1:]:
        u = u @ w @ rz(p)
    return u


def random_symmetric(rng, d, scale=np.pi):
    half = rng.uniform(-scale, scale, (d + 2) // 2)
    return np.concatenate([half, half[::-1]]) if d % 2 else np.concatenate([half, half[-2::-1]])

