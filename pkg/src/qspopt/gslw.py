"""Direct (root-finding) phase construction for low-degree targets.

Used as an independent check of the optimizer.  Step one completes a real
target f to polynomials P = f + iB and Q = iC with
|P|^2 + (1 - x^2)|Q|^2 = 1 by factoring 1 - f^2.  Step two peels off one
phase at a time by matching leading Chebyshev coefficients.  Double
precision only, so degrees are capped at 30.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from . import su2
from .chebyshev import ChebSeries, chebyshev_nodes, clenshaw_eval
from .optimizer import SolveReport, reduced_length

MAX_DEGREE = 30
SNAP = 1e-12
MARGIN = 1e-4


class GSLWError(RuntimeError):
    pass


@dataclass(frozen=True)
class ComplementarySet:
    real_target: ChebSeries
    imag_complement: ChebSeries  # B, T basis
    q_complement: np.ndarray  # C, U basis, real

    @property
    def p_coeffs(self) -> np.ndarray:
        """P = f + iB in the T basis."""
        return self.real_target.coeffs + 1j * self.imag_complement.coeffs

    @property
    def q_coeffs(self) -> np.ndarray:
        """Q = iC in the U basis."""
        return 1j * self.q_complement

    def constraint_residual(self, n: int = 1001) -> float:
        x = np.linspace(-1, 1, n)
        p = t_series(self.p_coeffs, x)
        q = u_series(self.q_coeffs, x)
        return float(np.max(np.abs(np.abs(p) ** 2 + (1 - x * x) * np.abs(q) ** 2 - 1)))


def t_series(c, x):
    c = np.asarray(c)
    x = np.asarray(x, dtype=float)
    b1 = np.zeros(x.shape, dtype=c.dtype)
    b2 = np.zeros_like(b1)
    for ck in c[:0:-1]:
        b1, b2 = ck + 2 * x * b1 - b2, b1
    return c[0] + x * b1 - b2


def u_series(c, x):
    """sum c_k U_k(x) by Clenshaw (U_0 = 1, U_1 = 2x)."""
    c = np.asarray(c)
    x = np.asarray(x, dtype=float)
    if c.size == 0:
        return np.zeros(x.shape, dtype=c.dtype if c.dtype.kind == "c" else float)
    b1 = np.zeros(x.shape, dtype=c.dtype)
    b2 = np.zeros_like(b1)
    for ck in c[::-1]:
        b1, b2 = ck + 2 * x * b1 - b2, b1
    return b1


def _check_target(f: ChebSeries, margin: float) -> int:
    D = f.nominal_degree
    if D > MAX_DEGREE:
        raise GSLWError(f"degree {D} exceeds the double-precision limit {MAX_DEGREE}")
    if f.parity is None:
        raise GSLWError("target needs a definite parity")
    sup = np.max(np.abs(clenshaw_eval(f, np.linspace(-1, 1, 10001))))
    if sup > 1 - margin:
        raise GSLWError(f"max|f| = {sup:.6g} is too close to 1")
    return D


def _classify(u_roots: np.ndarray, D: int):
    """Sort roots of 1 - f^2, given as u = 2x^2 - 1, into factor families."""
    y = (1.0 + u_roots) / 2.0  # y = x^2
    zero, ge_one, imag, cplx = 0, [], [], []
    upper = [r for r in y if r.imag > SNAP * max(1.0, abs(r))]
    lower = [r for r in y if r.imag < -SNAP * max(1.0, abs(r))]
    if len(upper) != len(lower):
        raise GSLWError(f"complex roots are not in conjugate pairs: {np.sort_complex(y)}")
    for r in y:
        if abs(r.imag) > SNAP * max(1.0, abs(r)):
            continue
        yr = r.real
        if abs(yr) < SNAP:
            zero += 1
        elif yr < 0:
            imag.append(np.sqrt(-yr))
        else:
            s = np.sqrt(yr)
            if abs(1 - s) < SNAP:
                s = 1.0
            if s < 1:
                raise GSLWError(f"1 - f^2 vanishes inside (0, 1) at x = {s!r}")
            ge_one.append(s)
    for r in upper:
        x = np.sqrt(complex(r))  # first quadrant
        cplx.append((x.real, x.imag))
    if zero + len(ge_one) + len(imag) + 2 * len(cplx) != D:
        raise GSLWError(f"root count does not match degree {D}: {np.sort_complex(y)}")
    return zero, ge_one, imag, cplx


def complementary_polynomials(f: ChebSeries, margin: float = MARGIN) -> ComplementarySet:
    """Complete f to (P, Q).  ``margin=0`` admits targets touching |f| = 1."""
    D = _check_target(f, margin)
    par = "even" if D % 2 == 0 else "odd"
    c = np.zeros(D + 1)
    c[: min(D + 1, f.coeffs.size)] = f.coeffs[: D + 1]
    f = ChebSeries(c, par, f.scale, dict(f.meta))
    p = npcheb.chebsub([1.0], npcheb.chebmul(c, c))
    # 1 - f^2 is even: its T_{2k}(x) coefficients are T_k(u) coefficients, u = 2x^2 - 1
    q = np.trim_zeros(p[0::2], "b")
    roots = npcheb.chebroots(q) if q.size > 1 else np.zeros(0)
    zero, ge_one, imag, cplx = _classify(np.asarray(roots, dtype=complex), q.size - 1)

    M = 4 * (D + 1)
    theta = 2 * np.pi * np.arange(M) / M
    x, s = np.cos(theta), np.sin(theta)
    Z = np.ones(M, dtype=complex) * x**zero
    for r in ge_one:
        Z *= np.sqrt(r * r - 1) * x + 1j * r * s
    for t in imag:
        Z *= np.sqrt(t * t + 1) * x + 1j * t * s
    for a, b in cplx:
        rho = a * a + b * b
        cc = rho + np.sqrt((a * a - 1) ** 2 + 2 * (a * a + 1) * b * b + b**4)
        Z *= cc * x * x - rho + 1j * np.sqrt(cc * cc - 1) * x * s
    # overall constant: fit |Z|^2 to 1 - f^2 in least squares
    target = 1.0 - clenshaw_eval(f, x) ** 2
    mod2 = np.abs(Z) ** 2
    K = float(target @ mod2 / (mod2 @ mod2))
    if not K > 0:
        raise GSLWError("non-positive leading constant in the factorization")
    deg = q.size - 1
    Z *= np.sqrt(K) * np.exp(1j * (D - deg) * theta)

    z = np.fft.fft(Z) / M
    zk = z[np.arange(-D, D + 1) % M].real
    pos, neg = zk[D:], zk[D::-1]  # z_k, z_{-k} for k = 0..D
    b = pos + neg
    b[0] = pos[0]
    cq = (pos - neg)[1:]
    return ComplementarySet(f, ChebSeries(_parity_clean(b, D), par), _parity_clean(cq, D - 1))


def _parity_clean(c: np.ndarray, deg: int) -> np.ndarray:
    c = c.copy()
    c[(deg + 1) % 2 :: 2] = 0.0
    return c


# --------------------------------------------------------------------------
# basis arithmetic for the reduction step


def _x_times_t(c):
    out = np.zeros(c.size + 1, dtype=complex)
    out[1] += c[0]
    out[2:] += c[1:] / 2
    out[:-2] += c[1:] / 2
    return out


def _x_times_u(c):
    out = np.zeros(c.size + 1, dtype=complex)
    out[1:] += c / 2
    out[:-2] += c[1:] / 2
    return out


def _one_minus_x2_times_u_to_t(c):
    out = np.zeros(c.size + 2, dtype=complex)
    out[: c.size] += c / 2
    out[2:] -= c / 2
    return out


def _t_to_u(c):
    out = np.zeros(c.size, dtype=complex)
    out[0] += c[0]
    if c.size > 1:
        out[1] += c[1] / 2
    out[2:] += c[2:] / 2
    out[:-2] -= c[2:] / 2
    return out


def reduce_to_phases(p, q, atol: float = 1e-6) -> np.ndarray:
    """Phases of the QSP product whose top row is (P, iQ sqrt(1-x^2)).

    ``p`` holds complex T-basis coefficients of P (length d+1), ``q``
    complex U-basis coefficients of Q (length d).
    """
    P = np.asarray(p, dtype=complex).copy()
    Q = np.asarray(q, dtype=complex).copy()
    d = P.size - 1
    if Q.size != d:
        Qn = np.zeros(d, dtype=complex)
        Qn[: min(d, Q.size)] = Q[:d]
        Q = Qn
    phases = np.zeros(d + 1)
    fill = np.pi / 2
    scale = max(np.max(np.abs(P)), 1.0)
    for t in range(d, 0, -1):
        pt, qt = P[t], Q[t - 1]
        if abs(pt) < 1e-13 * scale and abs(qt) < 1e-13 * scale:
            phi = fill
            fill = -fill
        else:
            if abs(abs(pt) - abs(qt)) > atol * max(abs(pt), abs(qt)):
                raise GSLWError(
                    f"leading coefficients differ in modulus at degree {t}: |p|={abs(pt):.3e}, |q|={abs(qt):.3e}"
                )
            phi = 0.5 * np.angle(pt / qt)
        ratio = np.exp(2j * phi)
        em = np.exp(-1j * phi)
        newP = em * (_x_times_t(P) + ratio * _one_minus_x2_times_u_to_t(Q))
        newQ = em * (ratio * _x_times_u(Q) - _t_to_u(P))
        phases[t] = phi
        P = newP[:t]
        Q = newQ[: t - 1]
    phases[0] = np.angle(np.sum(P))
    return phases


def gslw_solve(f: ChebSeries) -> SolveReport:
    t0 = time.perf_counter()
    comp = complementary_polynomials(f)
    if comp.constraint_residual() > 1e-8:
        raise GSLWError(f"complementary polynomials violate the constraint by {comp.constraint_residual():.3e}")
    phases = reduce_to_phases(comp.p_coeffs, comp.q_coeffs)
    d = phases.size - 1
    nodes = chebyshev_nodes(reduced_length(d))
    r = su2.real_component(phases, nodes) - clenshaw_eval(f, nodes)
    err = float(np.max(np.abs(r)))
    return SolveReport(
        phases=phases,
        objective_value=0.5 * float(r @ r) / nodes.size,
        max_node_error=err,
        iterations=d,
        wall_time=time.perf_counter() - t0,
        scale_divisor=f.scale,
        target_degree=d,
        converged=err < 1e-8,
        parity="even" if d % 2 == 0 else "odd",
        message="direct construction",
    )
