"""Target polynomials: Jacobi-Anger, eigenstate filter, 1/x approximations, Remez.

All constructors return :class:`~qspopt.chebyshev.ChebSeries`.  None of them
rescale; use :func:`scale_series` to bring a target inside the unit ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .chebyshev import ChebSeries, clenshaw_eval, coeffs_from_function, quadrature_coefficients

_RESCALE_AT = 1e250


# --------------------------------------------------------------------------
# Bessel functions


def bessel_j_all(kmax: int, tau: float) -> np.ndarray:
    """J_0(tau) .. J_kmax(tau) by Miller's backward recurrence.

    The recurrence J_{n-1} = (2n/tau) J_n - J_{n+1} is run downward from an
    order well past both ``kmax`` and ``tau`` and normalized with
    J_0 + 2 sum_{k>=1} J_{2k} = 1.
    """
    if kmax < 0:
        raise ValueError("kmax must be nonnegative")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    out = np.zeros(kmax + 1)
    if tau == 0.0:
        out[0] = 1.0
        return out
    start = max(kmax, int(math.ceil(1.4 * tau))) + 60 + int(math.ceil(4 * tau ** (1 / 3)))
    start += start % 2
    vals = np.zeros(start + 2)
    j_next, j_cur = 0.0, 1e-300
    norm = 0.0
    for n in range(start, 0, -1):
        vals[n] = j_cur
        if n % 2 == 0:
            norm += 2.0 * j_cur
        j_prev = (2.0 * n / tau) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > _RESCALE_AT:
            vals[n:] /= _RESCALE_AT
            norm /= _RESCALE_AT
            j_next /= _RESCALE_AT
            j_cur /= _RESCALE_AT
        if not math.isfinite(j_cur):
            raise OverflowError(f"Bessel recurrence overflowed at order {n} (tau={tau})")
    vals[0] = j_cur
    norm += j_cur
    return vals[: kmax + 1] / norm


def bessel_j(k: int, tau: float) -> float:
    """J_k(tau) for integer k >= 0 and real tau >= 0."""
    return float(bessel_j_all(k, tau)[k])


# --------------------------------------------------------------------------
# Hamiltonian simulation


def jacobi_anger_degree(tau: float, eps0: float) -> int:
    return int(math.ceil(1.4 * abs(tau) + math.log(1.0 / eps0)))


def jacobi_anger(tau: float, eps0: float = 1e-14):
    """Truncated Chebyshev series of cos(tau x) and sin(tau x).

    Returns ``(even, odd, d)``: ``even`` approximates cos(tau x), ``odd``
    approximates sin(tau x) so that exp(-i tau x) ~ even - i odd.  Neither is
    rescaled.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not 0 < eps0 < 1:
        raise ValueError("eps0 must lie in (0, 1)")
    d = jacobi_anger_degree(tau, eps0)
    j = bessel_j_all(d, tau)
    k = np.arange(d + 1)
    sign_even = np.where((k // 2) % 2, -1.0, 1.0)
    sign_odd = np.where(((k - 1) // 2) % 2, -1.0, 1.0)
    even = np.where(k % 2 == 0, 2.0 * sign_even * j, 0.0)
    even[0] = j[0]
    odd = np.where(k % 2 == 1, 2.0 * sign_odd * j, 0.0)
    meta = {"kind": "jacobi_anger", "tau": tau, "eps0": eps0}
    return ChebSeries(even, "even", meta=meta), ChebSeries(odd, "odd", meta=meta), d


# --------------------------------------------------------------------------
# Eigenstate filter


def _cheb_t_over_cosh(k: int, y: np.ndarray, v: float) -> np.ndarray:
    """T_k(y) / cosh(v) for real y, v >= 0, without overflow."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    inside = np.abs(y) <= 1.0
    # cos(k theta) / cosh(v)
    out[inside] = np.cos(k * np.arccos(y[inside])) * 2.0 * np.exp(-v) / (1.0 + np.exp(-2.0 * v))
    yo = y[~inside]
    u = k * np.arccosh(np.abs(yo))
    sign = np.where(yo < 0, (-1.0) ** k, 1.0)
    out[~inside] = sign * np.exp(u - v) * (1.0 + np.exp(-2.0 * u)) / (1.0 + np.exp(-2.0 * v))
    return out


def eigenstate_filter_function(k: int, delta: float) -> Callable:
    """Pointwise f_k(x, delta), normalized so that f_k(0, delta) = 1."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    d2 = delta * delta
    y0 = -1.0 - 2.0 * d2 / (1.0 - d2)
    v = k * math.acosh(-y0)
    sign0 = (-1.0) ** k

    def f(x):
        x = np.asarray(x, dtype=float)
        y = -1.0 + 2.0 * (x * x - d2) / (1.0 - d2)
        return sign0 * _cheb_t_over_cosh(k, y, v)

    return f


def eigenstate_filter(k: int, delta: float, K: Optional[int] = None) -> ChebSeries:
    """Degree-2k even Chebyshev series of the eigenstate filter."""
    f = eigenstate_filter_function(k, delta)
    s = coeffs_from_function(f, 2 * k, K, parity="even")
    return ChebSeries(s.coeffs, "even", meta={"kind": "eigenfilter", "k": k, "delta": delta})


# --------------------------------------------------------------------------
# 1/x by truncating (1 - (1 - x^2)^b) / x


def truncation_parameters(kappa: float, eps0: float) -> tuple[int, int]:
    """(b, n): exponent b and number of odd Chebyshev terms n."""
    b = int(math.ceil(kappa**2 * math.log(kappa / eps0)))
    n = int(math.ceil(math.sqrt(b * math.log(4 * b / eps0))))
    return b, n


def truncation_series(b: int, jmax: int) -> ChebSeries:
    """Odd series sum_{j=0..jmax} 4 (-1)^j w_j T_{2j+1}, w_j = 4^-b sum_{i>j} C(2b, b+i)."""
    if b < 1 or jmax < 0:
        raise ValueError("need b >= 1 and jmax >= 0")
    # log C(2b, b+i)/4^b by ratios C(2b,b+i)/C(2b,b+i-1) = (b-i+1)/(b+i)
    kk = np.arange(1, b + 1)
    log_w0 = np.sum(np.log1p(-0.5 / kk))
    i = np.arange(1, b + 1)
    log_w = log_w0 + np.cumsum(np.log((b - i + 1.0) / (b + i)))
    w = np.exp(log_w)  # w[i-1] = C(2b, b+i)/4^b
    # tails[j] = sum_{i=j+1..b} w_i, added smallest first
    tails = np.cumsum(w[::-1])[::-1]
    jj = np.arange(min(jmax, b - 1) + 1)
    c = np.zeros(2 * jmax + 2)
    c[2 * jj + 1] = 4.0 * np.where(jj % 2, -1.0, 1.0) * tails[jj]
    return ChebSeries(c, "odd", meta={"kind": "inverse_truncation", "b": b})


def inverse_truncation(kappa: float, eps0: float = 1e-14) -> ChebSeries:
    """Odd polynomial that is eps0-close to 1/x on [1/kappa, 1]."""
    if kappa < 2:
        raise ValueError("kappa must be at least 2")
    b, n = truncation_parameters(kappa, eps0)
    s = truncation_series(b, n - 1)
    return ChebSeries(
        s.coeffs, "odd", meta={"kind": "inverse_truncation", "kappa": kappa, "eps0": eps0, "b": b}
    )


# --------------------------------------------------------------------------
# Remez exchange


@dataclass(frozen=True)
class IntervalSpec:
    segments: tuple

    def __post_init__(self):
        segs = tuple(sorted((float(a), float(b)) for a, b in self.segments))
        if not segs:
            raise ValueError("need at least one segment")
        for a, b in segs:
            if not -1.0 <= a < b <= 1.0:
                raise ValueError(f"segment [{a}, {b}] is not a positive-length subset of [-1, 1]")
        for (_, b0), (a1, _) in zip(segs, segs[1:]):
            if a1 <= b0:
                raise ValueError("segments overlap")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def single(cls, a: float, b: float) -> "IntervalSpec":
        return cls(((a, b),))

    @classmethod
    def inverse_domain(cls, kappa: float) -> "IntervalSpec":
        return cls(((1.0 / kappa, 1.0),))

    def grid(self, n_per_segment: int, squared: bool = False) -> list[np.ndarray]:
        """Chebyshev-distributed points per segment, endpoints included.

        With ``squared`` the points are Chebyshev-distributed in x^2, the
        natural variable for odd and even bases.
        """
        t = np.cos(np.pi * np.arange(n_per_segment + 1)[::-1] / n_per_segment)
        return [_map_points(a, b, t, squared) for a, b in self.segments]


def _map_points(a: float, b: float, t: np.ndarray, squared: bool) -> np.ndarray:
    """Map t in [-1, 1] increasingly onto [a, b]."""
    if not squared or a * b < 0:
        return 0.5 * (a + b) + 0.5 * (b - a) * t
    lo, hi = sorted((a * a, b * b))
    y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
    x = np.sqrt(y)
    if b <= 0:
        x = -x
    x = np.sort(x)
    x[0], x[-1] = a, b
    return x


@dataclass(frozen=True)
class RemezBasis:
    """``odd``: T_1, T_3, ..; ``even``: T_0, T_2, ..; ``full``: T_0, T_1, ..

    The exchange itself runs in an equivalent basis adapted to the interval
    (see :class:`_WorkingBasis`); this class only fixes the span.
    """

    kind: str
    count: int

    def __post_init__(self):
        if self.kind not in ("odd", "even", "full"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("basis needs at least one function")

    @property
    def indices(self) -> np.ndarray:
        j = np.arange(self.count)
        return {"odd": 2 * j + 1, "even": 2 * j, "full": j}[self.kind]

    @property
    def degree(self) -> int:
        return int(self.indices[-1])

    @property
    def parity(self):
        return None if self.kind == "full" else self.kind


def _clenshaw_unbounded(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for ck in c[:0:-1]:
        b1, b2 = ck + 2.0 * t * b1 - b2, b1
    return c[0] + t * b1 - b2


class _WorkingBasis:
    """Span of a :class:`RemezBasis`, written as Chebyshev polynomials of the
    interval mapped onto [-1, 1].

    For parity bases the mapped variable is x^2 (times x for odd), so the
    functions stay well conditioned on sub-intervals such as [1/kappa, 1]
    where T_k(x) itself is not.
    """

    def __init__(self, basis: RemezBasis, interval: IntervalSpec):
        self.basis = basis
        ends = np.array(interval.segments, dtype=float).ravel()
        if basis.kind == "full":
            lo, hi = ends.min(), ends.max()
        else:
            u = ends * ends
            lo = 0.0 if (ends.min() < 0 < ends.max()) else u.min()
            hi = u.max()
        self.lo, self.hi = float(lo), float(hi)

    def _t(self, x):
        u = x if self.basis.kind == "full" else x * x
        return (2.0 * u - (self.lo + self.hi)) / (self.hi - self.lo)

    def matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.clip(self._t(x), -1.0, 1.0)
        m = np.cos(np.outer(np.arccos(t), np.arange(self.basis.count)))
        return m * x[:, None] if self.basis.kind == "odd" else m

    def evaluate(self, a, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = _clenshaw_unbounded(np.asarray(a, dtype=float), self._t(x))
        return v * x if self.basis.kind == "odd" else v

    def series(self, a) -> ChebSeries:
        """Convert to T_k(x) coefficients by exact quadrature."""
        d = self.basis.degree
        c = quadrature_coefficients(lambda x: self.evaluate(a, x), d, 2 * (d + 1))
        return ChebSeries(c, self.basis.parity)


class RemezError(RuntimeError):
    pass


@dataclass
class RemezResult:
    series: ChebSeries
    error: float
    levelled_error: float
    iterations: int
    reference: np.ndarray


def _initial_reference(interval: IntervalSpec, n: int, squared: bool) -> np.ndarray:
    lengths = np.array([b - a for a, b in interval.segments])
    counts = np.maximum(1, np.round(n * lengths / lengths.sum()).astype(int))
    while counts.sum() > n:
        counts[np.argmax(counts)] -= 1
    while counts.sum() < n:
        counts[np.argmax(lengths / counts)] += 1
    pts = []
    for (a, b), m in zip(interval.segments, counts):
        if m == 1:
            pts.append(np.array([0.5 * (a + b)]))
        else:
            t = np.cos(np.pi * np.arange(m)[::-1] / (m - 1))
            pts.append(_map_points(a, b, t, squared))
    return np.concatenate(pts)


def _local_extrema(resid: Callable, interval: IntervalSpec, n_grid: int, squared: bool):
    """Alternating extrema of ``resid``: one per run of constant sign, refined."""
    xs_all, rs_all = [], []
    for seg_grid in interval.grid(n_grid, squared):
        r = resid(seg_grid)
        sign = np.sign(r)
        sign[sign == 0] = 1
        breaks = np.flatnonzero(np.diff(sign)) + 1
        for run in np.split(np.arange(seg_grid.size), breaks):
            i = run[np.argmax(np.abs(r[run]))]
            lo = seg_grid[max(i - 1, 0)]
            hi = seg_grid[min(i + 1, seg_grid.size - 1)]
            x_best, r_best = seg_grid[i], r[i]
            if 0 < i < seg_grid.size - 1:
                s = np.sign(r_best)
                opt = minimize_scalar(
                    lambda t: -s * float(resid(np.array([t]))[0]),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-14 * max(1.0, abs(hi))},
                )
                if -opt.fun > abs(r_best):
                    x_best, r_best = float(opt.x), s * -opt.fun
            xs_all.append(x_best)
            rs_all.append(r_best)
    xs = np.array(xs_all)
    rs = np.array(rs_all)
    # merge neighbours of equal sign across segment boundaries
    keep_x, keep_r = [xs[0]], [rs[0]]
    for x, r in zip(xs[1:], rs[1:]):
        if np.sign(r) == np.sign(keep_r[-1]):
            if abs(r) > abs(keep_r[-1]):
                keep_x[-1], keep_r[-1] = x, r
        else:
            keep_x.append(x)
            keep_r.append(r)
    return np.array(keep_x), np.array(keep_r)


def remez_minimax(
    F: Callable,
    basis: RemezBasis,
    interval: IntervalSpec,
    tol: float = 1e-2,
    max_iter: int = 100,
    grid_factor: int = 20,
) -> RemezResult:
    """Best uniform approximation of F on ``interval`` from span(basis).

    Classic exchange: solve for coefficients and levelled error on N+1
    reference points, move the reference to the alternating extrema of the
    residual, and stop once the levelled error and the sup-norm of the
    residual agree to relative ``tol``.
    """
    n = basis.count
    squared = basis.kind != "full"
    work = _WorkingBasis(basis, interval)
    ref = _initial_reference(interval, n + 1, squared)
    signs = np.where(np.arange(n + 1) % 2, -1.0, 1.0)
    history = []
    for it in range(1, max_iter + 1):
        A = np.empty((n + 1, n + 1))
        A[:, :n] = work.matrix(ref)
        A[:, n] = -signs
        try:
            sol = np.linalg.solve(A, np.asarray(F(ref), dtype=float))
        except np.linalg.LinAlgError as exc:
            raise RemezError(f"reference system is singular (Haar condition violated): {exc}")
        if not np.all(np.isfinite(sol)):
            raise RemezError("reference system is singular (Haar condition violated)")
        a, lev = sol[:n], sol[n]

        def resid(x, a=a):
            return work.matrix(x) @ a - np.asarray(F(x), dtype=float)

        ex_x, ex_r = _local_extrema(resid, interval, grid_factor * n, squared)
        norm = float(np.max(np.abs(ex_r)))
        history.append((abs(lev), norm))
        # below this gap the residual is rounding noise and cannot level further
        noise = 64 * np.finfo(float).eps * float(np.max(np.abs(F(ref))))
        if norm == 0.0 or (norm - abs(lev)) / norm < tol or norm - abs(lev) < noise:
            return RemezResult(work.series(a), norm, abs(lev), it, ref)
        if ex_x.size < n + 1:
            if norm < 16 * noise:
                # precision-limited: the residual is mostly rounding noise
                return RemezResult(work.series(a), norm, abs(lev), it, ref)
            raise RemezError(f"residual has only {ex_x.size} alternations, need {n + 1}")
        i_max = int(np.argmax(np.abs(ex_r)))
        lo, hi = 0, ex_x.size
        while hi - lo > n + 1:
            # drop the smaller end, but never the global extremum
            if (abs(ex_r[lo]) <= abs(ex_r[hi - 1]) and lo != i_max) or hi - 1 == i_max:
                lo += 1
            else:
                hi -= 1
        ref = ex_x[lo:hi]
    raise RemezError(f"no convergence after {max_iter} iterations (last |lev|, |r|: {history[-1]})")


def remez_min_degree(
    F: Callable,
    kind: str,
    interval: IntervalSpec,
    eps0: float,
    tol: float = 1e-2,
    start: int = 1,
) -> RemezResult:
    """Smallest basis size whose minimax error is at most ``eps0``."""

    def run(n):
        return remez_minimax(F, RemezBasis(kind, n), interval, tol)

    hi = max(1, start)
    best = run(hi)
    lo = 0  # largest size known to fail
    if best.error <= eps0:
        # a good guess only bounds the answer from above; halve until it fails
        while hi > 1:
            res = run(hi // 2)
            if res.error > eps0:
                lo = hi // 2
                break
            hi, best = hi // 2, res
    else:
        while best.error > eps0:
            lo, hi = hi, max(hi + 1, (3 * hi) // 2)
            best = run(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        res = run(mid)
        if res.error <= eps0:
            hi, best = mid, res
        else:
            lo = mid
    return best


def inverse_remez(
    kappa: float,
    eps0: float,
    kind: str = "odd",
    tol: float = 1e-2,
    normalization: Optional[float] = None,
) -> ChebSeries:
    """Minimal-degree odd or even minimax approximation of 1/(s x) on [1/kappa, 1].

    ``s`` is ``normalization`` and defaults to 4 kappa, which keeps the target
    at most 1/4 in magnitude on the interval; ``eps0`` bounds the error of
    the normalized target.
    """
    if kind not in ("odd", "even"):
        raise ValueError("kind must be 'odd' or 'even'")
    if kappa < 2:
        raise ValueError("kappa must be at least 2")
    s = 4.0 * kappa if normalization is None else float(normalization)
    interval = IntervalSpec.inverse_domain(kappa)
    # start near the expected size so the search does not probe huge bases
    guess = max(1, int(0.4 * kappa * math.log(1.0 / (s * eps0) + 1.0)))
    res = remez_min_degree(lambda x: 1.0 / (s * x), kind, interval, eps0, tol, start=guess)
    meta = {
        "kind": f"inverse_remez_{kind}",
        "kappa": kappa,
        "eps0": eps0,
        "normalization": s,
        "error": res.error,
    }
    return ChebSeries(res.series.coeffs, kind, meta=meta)


# --------------------------------------------------------------------------
# scaling


def sup_norm(series: ChebSeries, n: int = 10001) -> float:
    """max |f| on ``n`` equispaced points of [-1, 1]."""
    return float(np.max(np.abs(clenshaw_eval(series, np.linspace(-1.0, 1.0, n)))))


def scale_series(series: ChebSeries, divisor: float) -> ChebSeries:
    if not divisor > 0:
        raise ValueError("divisor must be positive")
    return ChebSeries(
        series.coeffs / divisor, series.parity, series.scale * divisor, dict(series.meta)
    )
