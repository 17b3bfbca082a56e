"""SU(2) products that define a QSP unitary, and phase-vector transformations.

A QSP unitary for phases ``phi = (phi_0, ..., phi_d)`` is

    U(x) = exp(i phi_0 Z) * prod_{j=1..d} [ W(x) exp(i phi_j Z) ],
    W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]].

Every factor is special unitary, so each partial product is stored as the
pair ``(a, b)`` standing for ``[[a, b], [-conj(b), conj(a)]]``.  The upper-left
entry of ``U`` is ``P(x)``; the quantity being fitted is ``Re P(x)``.

Phase vectors are plain 1-D float arrays.  Matrices returned to callers are
2x2 complex ndarrays.
"""
from __future__ import annotations

import numpy as np
from numba import njit

DOMAIN_SLACK = 1e-14


def _as_phases(phi) -> np.ndarray:
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    if phi.ndim != 1 or phi.size == 0:
        raise ValueError("phase vector must be a non-empty 1-D sequence")
    return phi


def _check_domain(x):
    xa = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(xa) > 1.0 + DOMAIN_SLACK) or np.any(np.isnan(xa)):
        raise ValueError(f"x must lie in [-1, 1], got {x!r}")
    return np.clip(xa, -1.0, 1.0)


@njit(cache=True, nogil=True)
def _drift(a, b):
    # The rounded W(x) has |det| = 1 + O(eps) with the same sign at every step,
    # so long products pick up a scalar factor (1 + delta)^d; divide it out.
    return np.sqrt(a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag)


@njit(cache=True, nogil=True)
def _unitary_entries(phi, xs):
    n = xs.shape[0]
    d = phi.shape[0] - 1
    ea = np.exp(1j * phi)
    out_a = np.empty(n, dtype=np.complex128)
    out_b = np.empty(n, dtype=np.complex128)
    for k in range(n):
        x = xs[k]
        s = 1j * np.sqrt(max(0.0, 1.0 - x * x))
        a = ea[0]
        b = 0j
        for j in range(1, d + 1):
            # (a, b) <- (a, b) W
            a, b = a * x - b * np.conj(s), a * s + b * x
            # (a, b) <- (a, b) exp(i phi_j Z)
            a, b = a * ea[j], b * np.conj(ea[j])
        nrm = _drift(a, b)
        out_a[k] = a / nrm
        out_b[k] = b / nrm
    return out_a, out_b


@njit(cache=True, nogil=True)
def _forward(ea, x, pre_a, pre_b):
    """Store prefix products exp(i phi_0 Z) W ... W exp(i phi_j Z); return f(x)."""
    d = ea.shape[0] - 1
    s = 1j * np.sqrt(max(0.0, 1.0 - x * x))
    a = ea[0]
    b = 0j
    pre_a[0] = a
    pre_b[0] = b
    for j in range(1, d + 1):
        a, b = a * x - b * np.conj(s), a * s + b * x
        a, b = a * ea[j], b * np.conj(ea[j])
        pre_a[j] = a
        pre_b[j] = b
    return a.real / _drift(a, b)


@njit(cache=True, nogil=True)
def _backward(ea, x, pre_a, pre_b, grad, weight):
    """Add weight * df/dphi_k to grad[k] using suffix products.

    d/dphi_k inserts iZ after the k-th prefix, so with prefix (a, b) and
    suffix (c, e) the derivative of Re P is -Im(a c + b conj(e)).
    """
    d = ea.shape[0] - 1
    s = 1j * np.sqrt(max(0.0, 1.0 - x * x))
    c = 1.0 + 0j
    e = 0j
    for k in range(d, -1, -1):
        t = pre_a[k] * c + pre_b[k] * np.conj(e)
        grad[k] -= weight * t.imag
        if k > 0:
            wa = x * ea[k]
            wb = s * np.conj(ea[k])
            c, e = wa * c - wb * np.conj(e), wa * e + wb * np.conj(c)


@njit(cache=True, nogil=True)
def _jacobian_kernel(phi, xs):
    n = xs.shape[0]
    d = phi.shape[0] - 1
    ea = np.exp(1j * phi)
    pre_a = np.empty(d + 1, dtype=np.complex128)
    pre_b = np.empty(d + 1, dtype=np.complex128)
    fv = np.empty(n)
    jac = np.zeros((n, d + 1))
    for k in range(n):
        fv[k] = _forward(ea, xs[k], pre_a, pre_b)
        _backward(ea, xs[k], pre_a, pre_b, jac[k], 1.0)
    return fv, jac


@njit(cache=True, nogil=True)
def _objective_kernel(phi, xs, target):
    """Return f_phi at ``xs`` and sum_k (f_k - target_k) * grad f_k."""
    n = xs.shape[0]
    d = phi.shape[0] - 1
    ea = np.exp(1j * phi)
    pre_a = np.empty(d + 1, dtype=np.complex128)
    pre_b = np.empty(d + 1, dtype=np.complex128)
    fv = np.empty(n)
    grad = np.zeros(d + 1)
    for k in range(n):
        fv[k] = _forward(ea, xs[k], pre_a, pre_b)
        _backward(ea, xs[k], pre_a, pre_b, grad, fv[k] - target[k])
    return fv, grad


def wx_matrix(x: float) -> np.ndarray:
    """Signal operator W(x) = exp(i arccos(x) X)."""
    x = float(_check_domain(x))
    s = np.sqrt(max(0.0, 1.0 - x * x))
    return np.array([[x, 1j * s], [1j * s, x]], dtype=np.complex128)


def qsp_unitary(phi, x):
    """QSP product U_phi(x); shape (2, 2), or (n, 2, 2) for array ``x``."""
    phi = _as_phases(phi)
    xs = _check_domain(x)
    scalar = xs.ndim == 0
    a, b = _unitary_entries(phi, np.atleast_1d(xs).astype(np.float64))
    u = np.empty((a.size, 2, 2), dtype=np.complex128)
    u[:, 0, 0] = a
    u[:, 0, 1] = b
    u[:, 1, 0] = -np.conj(b)
    u[:, 1, 1] = np.conj(a)
    return u[0] if scalar else u


def upper_left(phi, x):
    """P(x), the <0|U_phi(x)|0> entry (complex)."""
    phi = _as_phases(phi)
    xs = _check_domain(x)
    a, _ = _unitary_entries(phi, np.atleast_1d(xs).astype(np.float64))
    return a[0] if xs.ndim == 0 else a


def real_component(phi, x):
    """f_phi(x) = Re <0|U_phi(x)|0>."""
    p = upper_left(phi, x)
    return float(p.real) if np.ndim(p) == 0 else p.real


def value_and_gradient(phi, x):
    """f_phi(x) together with its partial derivatives in every phase.

    For scalar ``x`` returns ``(float, (d+1,) array)``; for an array of points
    returns ``((n,), (n, d+1))``.  Cost is O(d) per point.
    """
    phi = _as_phases(phi)
    xs = _check_domain(x)
    fv, jac = _jacobian_kernel(phi, np.atleast_1d(xs).astype(np.float64))
    if xs.ndim == 0:
        return float(fv[0]), jac[0]
    return fv, jac


def residual_and_gradient(phi, xs, target):
    """Values of f_phi at ``xs`` and the vector sum_k (f_phi(x_k) - target_k) grad f_phi(x_k).

    This is the inner loop of the least-squares objective.
    """
    phi = _as_phases(phi)
    xs = np.ascontiguousarray(_check_domain(xs), dtype=np.float64)
    target = np.ascontiguousarray(target, dtype=np.float64)
    return _objective_kernel(phi, xs, target)


def negate_phases(phi) -> np.ndarray:
    """Phases of the complex-conjugate unitary: U_{-phi} = conj(U_phi)."""
    phi = _as_phases(phi)
    if phi.size < 2:
        raise ValueError("negation needs at least two phases")
    out = -phi
    out[0] += np.pi / 2
    out[-1] -= np.pi / 2
    return out


def invert_phases(phi) -> np.ndarray:
    """Reversed phases; U of the result is the transpose of U_phi."""
    return _as_phases(phi)[::-1].copy()


def to_circuit_phases(phi, negated: bool = False) -> np.ndarray:
    """Map phases of the W-convention product to the reflection-circuit angles.

    With ``negated`` the angles implement U_{-phi} (the complex conjugate),
    which is what the real-part LCU circuit needs for its second branch.
    """
    phi = _as_phases(phi)
    if phi.size < 2:
        raise ValueError("circuit phases need at least two phases")
    if negated:
        out = np.pi / 2 - phi
        out[0] = 3 * np.pi / 4 - phi[0]
        out[-1] = -phi[-1] - np.pi / 4
    else:
        out = phi + np.pi / 2
        out[0] = phi[0] + np.pi / 4
        out[-1] = phi[-1] + np.pi / 4
    return out


def from_circuit_phases(varphi, negated: bool = False) -> np.ndarray:
    """Inverse of :func:`to_circuit_phases`."""
    varphi = _as_phases(varphi)
    if varphi.size < 2:
        raise ValueError("circuit phases need at least two phases")
    if negated:
        out = np.pi / 2 - varphi
        out[0] = 3 * np.pi / 4 - varphi[0]
        out[-1] = -varphi[-1] - np.pi / 4
    else:
        out = varphi - np.pi / 2
        out[0] = varphi[0] - np.pi / 4
        out[-1] = varphi[-1] - np.pi / 4
    return out


def canonicalize(phi) -> np.ndarray:
    """Wrap every phase into [-pi, pi)."""
    phi = _as_phases(phi)
    out = np.mod(phi + np.pi, 2 * np.pi) - np.pi
    # mod can round up to exactly pi
    out[out >= np.pi] -= 2 * np.pi
    return out
