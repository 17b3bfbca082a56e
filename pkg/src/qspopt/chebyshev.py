"""Chebyshev-basis polynomials: evaluation, nodes and coefficient transforms.

Everything here works in the basis T_0, T_1, ...; no monomial conversion is
ever made.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.fft import dct

from . import su2

PARITIES = ("even", "odd", None)

# wrong-parity entries below this fraction of max(max|c|, 1) are round-off and get
# zeroed; anything larger means the data does not have the claimed parity
_PARITY_REJECT = 1e-10


@dataclass(frozen=True)
class ChebSeries:
    """Coefficients ``c_0..c_n`` of ``sum c_j T_j`` with an optional parity tag.

    ``scale`` records a divisor already applied to the coefficients so that
    downstream code can undo it.
    """

    coeffs: np.ndarray
    parity: Optional[str] = None
    scale: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}, got {self.parity!r}")
        if self.parity is not None:
            wrong = slice(1, None, 2) if self.parity == "even" else slice(0, None, 2)
            big = np.max(np.abs(c)) if c.size else 0.0
            if np.any(np.abs(c[wrong]) > _PARITY_REJECT * max(big, 1.0)):
                raise ValueError(f"coefficients are not {self.parity}")
            c[wrong] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    @property
    def nominal_degree(self) -> int:
        """Largest index allowed by the storage length and the parity tag.

        Trailing zero coefficients count; this is the degree a QSP solve uses.
        """
        n = self.coeffs.size - 1
        if self.parity == "even" and n % 2:
            n -= 1
        elif self.parity == "odd" and n % 2 == 0:
            n = max(n - 1, 1) if n > 0 else 1
        return n

    def __call__(self, x):
        return clenshaw_eval(self, x)

    def __len__(self):
        return self.coeffs.size

    def with_parity(self, parity: Optional[str]) -> "ChebSeries":
        return replace(self, parity=parity)

    def padded(self, n: int) -> "ChebSeries":
        """Same polynomial stored with ``n`` coefficients (n >= current length)."""
        if n < self.coeffs.size:
            raise ValueError("cannot shrink a series with padded()")
        c = np.zeros(n)
        c[: self.coeffs.size] = self.coeffs
        return replace(self, coeffs=c)


def clenshaw_eval(series, x):
    """Evaluate ``sum c_j T_j(x)`` by the backward three-term recurrence."""
    c = series.coeffs if isinstance(series, ChebSeries) else np.asarray(series, dtype=float)
    xa = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(xa) > 1.0 + su2.DOMAIN_SLACK):
        raise ValueError("Chebyshev series are evaluated on [-1, 1] only")
    xa = np.clip(xa, -1.0, 1.0)
    b1 = np.zeros_like(xa)
    b2 = np.zeros_like(xa)
    two_x = 2.0 * xa
    for ck in c[:0:-1]:
        b1, b2 = ck + two_x * b1 - b2, b1
    out = c[0] + xa * b1 - b2
    return float(out) if out.ndim == 0 else out


def chebyshev_nodes(dtilde: int) -> np.ndarray:
    """The ``dtilde`` positive roots of T_{2*dtilde}, in decreasing order."""
    if dtilde < 1:
        raise ValueError("need at least one node")
    j = np.arange(1, dtilde + 1)
    return np.cos((2 * j - 1) * np.pi / (4 * dtilde))


def default_quadrature_points(d: int) -> int:
    return max(2 * (d + 1), 128)


def _sample(F: Callable, xs: np.ndarray) -> np.ndarray:
    try:
        v = np.asarray(F(xs))
        if v.shape == xs.shape:
            return v
    except (TypeError, ValueError):
        pass
    return np.array([F(float(t)) for t in xs])


def quadrature_coefficients(F: Callable, d: int, K: Optional[int] = None) -> np.ndarray:
    """Chebyshev coefficients c_0..c_d of F from a 2K-point trapezoidal rule.

    Uses samples F(-cos(pi l / K)), l = 0..2K-1, and one FFT.  Complex-valued
    F gives complex coefficients.
    """
    if K is None:
        K = default_quadrature_points(d)
    if K < d + 1:
        raise ValueError(f"need K >= d + 1 quadrature points (K={K}, d={d})")
    theta = np.pi * np.arange(2 * K) / K
    v = _sample(F, -np.cos(theta))
    # sum_l v_l e^{i j theta_l} = 2K * ifft(v)_j
    s = np.fft.ifft(v)[: d + 1]
    sign = np.where(np.arange(d + 1) % 2, -1.0, 1.0)
    c = 2.0 * sign * s
    c[0] *= 0.5
    return c if np.iscomplexobj(v) else c.real


def coeffs_from_function(
    F: Callable, d: int, K: Optional[int] = None, parity: Optional[str] = None
) -> ChebSeries:
    """Degree-``d`` Chebyshev interpolant-by-quadrature of a real function."""
    c = quadrature_coefficients(F, d, K)
    if np.iscomplexobj(c):
        raise ValueError("F must be real-valued; split complex targets first")
    return ChebSeries(c, parity)


def coeffs_of_qsp(phi) -> ChebSeries:
    """Chebyshev coefficients of f_phi = Re <0|U_phi|0>.

    f_phi has degree d and parity d mod 2, so sampling at the d+1 roots of
    T_{d+1} and applying discrete orthogonality (a DCT-II) is exact.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.size
    x = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))
    vals = su2.real_component(phi, x)
    c = dct(vals, type=2) / n
    c[0] *= 0.5
    return ChebSeries(c, "even" if (n - 1) % 2 == 0 else "odd")


def coefficient_gap(a, b) -> float:
    """max_j |a_j - b_j| with missing trailing entries read as 0."""
    ca = a.coeffs if isinstance(a, ChebSeries) else np.asarray(a, dtype=float)
    cb = b.coeffs if isinstance(b, ChebSeries) else np.asarray(b, dtype=float)
    n = max(ca.size, cb.size)
    diff = np.zeros(n)
    diff[: ca.size] += ca
    diff[: cb.size] -= cb
    return float(np.max(np.abs(diff)))
