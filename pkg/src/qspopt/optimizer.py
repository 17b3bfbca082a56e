"""Least-squares phase optimization over symmetric phase vectors.

The variable is the first half of a symmetric phase vector.  The objective
is half the mean squared residual of f_phi against the target on the
positive roots of T_{2 dtilde}, minimized by L-BFGS from the start
(pi/4, 0, ..., 0), where the Hessian is a known constant diagonal.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from numba import njit

from . import su2
from .approx import scale_series
from .chebyshev import ChebSeries, chebyshev_nodes, clenshaw_eval, quadrature_coefficients

PART_LABELS = ("real-even", "real-odd", "imag-even", "imag-odd")


class InvalidTargetError(ValueError):
    """Target polynomial cannot be encoded (wrong parity or |f| > 1)."""


# --------------------------------------------------------------------------
# symmetric reduction


@dataclass(frozen=True)
class ReducedPhases:
    values: np.ndarray
    parent_degree: int

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if self.parent_degree < 0:
            raise ValueError("degree must be nonnegative")
        if v.size != reduced_length(self.parent_degree):
            raise ValueError(
                f"degree {self.parent_degree} needs {reduced_length(self.parent_degree)} values, got {v.size}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def reduced_length(d: int) -> int:
    return (d + 2) // 2


def reduce_symmetric(phi, atol: float = 1e-12) -> ReducedPhases:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 1 or phi.size == 0:
        raise ValueError("phase vector must be a non-empty 1-D sequence")
    if np.max(np.abs(phi - phi[::-1])) > atol:
        raise ValueError("phase vector is not symmetric under reversal")
    d = phi.size - 1
    return ReducedPhases(phi[: reduced_length(d)], d)


def expand_symmetric(red: ReducedPhases) -> np.ndarray:
    v = red.values
    if red.parent_degree % 2:
        return np.concatenate([v, v[::-1]])
    return np.concatenate([v, v[-2::-1]])


def _fold_gradient(g: np.ndarray, d: int) -> np.ndarray:
    """Chain rule through expand_symmetric: mirrored partials add up."""
    n = reduced_length(d)
    out = g[:n] + g[::-1][:n]
    if d % 2 == 0:
        out[-1] = g[n - 1]
    return out


# --------------------------------------------------------------------------
# objective


def _parity_of_degree(d: int) -> str:
    return "even" if d % 2 == 0 else "odd"


def _check_parity(target: ChebSeries, d: int):
    want = _parity_of_degree(d)
    if target.parity is None:
        c = target.coeffs
        wrong = c[1::2] if want == "even" else c[0::2]
        if np.any(wrong != 0):
            raise InvalidTargetError(f"target has no definite parity; degree {d} needs {want}")
    elif target.parity != want:
        raise InvalidTargetError(f"target parity {target.parity} does not match degree {d}")


def objective(red: ReducedPhases, target: ChebSeries, nodes=None):
    """Half the mean squared node residual and its gradient in the reduced phases."""
    d = red.parent_degree
    _check_parity(target, d)
    if nodes is None:
        nodes = chebyshev_nodes(reduced_length(d))
    tvals = clenshaw_eval(target, nodes)
    value, grad, _ = _objective_values(red.values, d, np.asarray(nodes, dtype=float), tvals)
    return value, grad


@njit(cache=True, nogil=True)
def _reduced_kernel(v, d, nodes, tvals):
    n = v.shape[0]
    phi = np.empty(d + 1)
    for j in range(n):
        phi[j] = v[j]
        phi[d - j] = v[j]
    fv, g = su2._objective_kernel(phi, nodes, tvals)
    r = fv - tvals
    m = nodes.shape[0]
    grad = np.empty(n)
    for j in range(n):
        grad[j] = (g[j] + g[d - j]) / m if j != d - j else g[j] / m
    return 0.5 * np.dot(r, r) / m, grad, r


def _objective_values(v, d, nodes, tvals):
    val, grad, r = _reduced_kernel(v, d, nodes, tvals)
    return float(val), grad, r


def _expand_values(v, d):
    return np.concatenate([v, v[::-1]]) if d % 2 else np.concatenate([v, v[-2::-1]])


def mean_squared_loss(red: ReducedPhases, target: ChebSeries) -> float:
    """(1/dtilde) sum |f_phi(x_j) - f(x_j)|^2, i.e. twice :func:`objective`."""
    return 2.0 * objective(red, target)[0]


def canonical_initial(d: int) -> ReducedPhases:
    v = np.zeros(reduced_length(d))
    v[0] = np.pi / 4
    return ReducedPhases(v, d)


def initial_inverse_hessian(d: int) -> np.ndarray:
    """Inverse of the (constant) objective Hessian at :func:`canonical_initial`."""
    h = np.full(reduced_length(d), 0.5)
    if d % 2 == 0:
        h[-1] = 1.0
    return h


def random_initial(d: int, seed: Optional[int] = None) -> ReducedPhases:
    rng = np.random.default_rng(seed)
    return ReducedPhases(rng.uniform(-np.pi, np.pi, reduced_length(d)), d)


# --------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-12
    max_iterations: int = 50_000
    lbfgs_memory: int = 200
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    scale_margin: float = 0.0
    check_grid: int = 10_001

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be at least 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")
        if not 0 <= self.scale_margin < 1:
            raise ValueError("scale_margin must lie in [0, 1)")


@dataclass
class SolveReport:
    phases: np.ndarray
    objective_value: float
    max_node_error: float
    iterations: int
    wall_time: float
    scale_divisor: float
    target_degree: int
    converged: bool
    parity: str
    message: str = ""
    objective_history: list = field(default_factory=list, repr=False)

    @property
    def reduced(self) -> ReducedPhases:
        return reduce_symmetric(self.phases)


@njit(cache=True, nogil=True)
def _two_loop(grad, S, Y, rho, head, count, h0):
    """Apply the L-BFGS inverse-Hessian estimate to ``grad``.

    Pairs live in a ring buffer; ``head`` is the slot of the newest pair.
    """
    m = S.shape[0]
    q = grad.copy()
    alpha = np.empty(count)
    for i in range(count):
        k = (head - i) % m
        a = rho[k] * np.dot(S[k], q)
        alpha[i] = a
        q -= a * Y[k]
    r = h0 * q
    for i in range(count - 1, -1, -1):
        k = (head - i) % m
        b = rho[k] * np.dot(Y[k], r)
        r += (alpha[i] - b) * S[k]
    return r


def check_target_bounds(target: ChebSeries, margin: float = 0.0, n: int = 10_001):
    """Raise :class:`InvalidTargetError` if |f| exceeds 1 - margin on a grid."""
    x = np.linspace(-1.0, 1.0, n)
    v = np.abs(clenshaw_eval(target, x))
    i = int(np.argmax(v))
    if v[i] > 1.0 - margin:
        raise InvalidTargetError(
            f"|f(x)| = {v[i]:.17g} exceeds {1.0 - margin:.17g} at x = {x[i]:.17g}"
        )


def lbfgs_solve(
    target: ChebSeries,
    config: Optional[SolverConfig] = None,
    initial: Optional[ReducedPhases] = None,
    degree: Optional[int] = None,
    record_history: bool = False,
) -> SolveReport:
    """Find symmetric phases whose f_phi matches ``target`` at the nodes.

    Stops once the largest node residual drops below ``config.epsilon``.
    Hitting the iteration cap, or a line search that cannot make progress,
    returns a report with ``converged=False`` and the last iterate.
    """
    config = config or SolverConfig()
    d = target.nominal_degree if degree is None else int(degree)
    if initial is not None:
        d = initial.parent_degree
    if target.degree > d:
        raise InvalidTargetError(f"target degree {target.degree} exceeds solve degree {d}")
    _check_parity(target, d)
    check_target_bounds(target, config.scale_margin, config.check_grid)

    # timing covers the optimization only, not the O(d) admissibility check
    t0 = time.perf_counter()
    n = reduced_length(d)
    nodes = chebyshev_nodes(n)
    tvals = clenshaw_eval(target, nodes)
    x = (initial or canonical_initial(d)).values.copy()
    h0 = initial_inverse_hessian(d)

    m = min(config.lbfgs_memory, n)
    S = np.zeros((m, n))
    Y = np.zeros((m, n))
    rho = np.zeros(m)
    head, count = -1, 0

    val, grad, r = _objective_values(x, d, nodes, tvals)
    history = [val] if record_history else []
    err = float(np.max(np.abs(r)))
    it = 0
    message = ""
    while err >= config.epsilon:
        if it >= config.max_iterations:
            message = f"iteration cap {config.max_iterations} reached"
            break
        p = -_two_loop(grad, S, Y, rho, head % m if count else 0, count, h0)
        slope = float(grad @ p)
        if slope >= 0:
            # estimate lost descent; restart from the diagonal start matrix
            count = 0
            p = -h0 * grad
            slope = float(grad @ p)
        step = 1.0
        for _ in range(config.max_backtracks):
            x_new = x + step * p
            val_new, grad_new, r_new = _objective_values(x_new, d, nodes, tvals)
            if val_new <= val + config.armijo * step * slope:
                break
            step *= config.backtrack
        else:
            message = "line search failed to decrease the objective"
            break
        s = x_new - x
        y = grad_new - grad
        sy = float(s @ y)
        if sy > 0:
            head = (head + 1) % m
            S[head] = s
            Y[head] = y
            rho[head] = 1.0 / sy
            count = min(count + 1, m)
        x, val, grad, r = x_new, val_new, grad_new, r_new
        err = float(np.max(np.abs(r)))
        it += 1
        if record_history:
            history.append(val)

    phases = su2.canonicalize(_expand_values(x, d))
    # wrapping by 2 pi changes rounding; report the error of the phases returned
    err = max_node_error(phases, target)
    converged = err < config.epsilon
    return SolveReport(
        phases=phases,
        objective_value=val,
        max_node_error=err,
        iterations=it,
        wall_time=time.perf_counter() - t0,
        scale_divisor=target.scale,
        target_degree=d,
        converged=converged,
        parity=_parity_of_degree(d),
        message=message or ("converged" if converged else ""),
        objective_history=history,
    )


def max_node_error(phases, target: ChebSeries) -> float:
    """Largest residual of f_phi against ``target`` on the optimization nodes."""
    phases = np.asarray(phases, dtype=float)
    nodes = chebyshev_nodes(reduced_length(phases.size - 1))
    return float(np.max(np.abs(su2.real_component(phases, nodes) - clenshaw_eval(target, nodes))))


# --------------------------------------------------------------------------
# smooth functions


def split_parts(coeffs: np.ndarray, rtol: float = 1e-14) -> dict:
    """Split complex Chebyshev coefficients into the four real parity parts.

    Parts whose coefficients are all below ``rtol * max|c|`` are dropped.
    """
    coeffs = np.asarray(coeffs)
    scale = max(float(np.max(np.abs(coeffs))), 1e-300)
    out = {}
    for label, comp in (("real", coeffs.real), ("imag", np.imag(coeffs))):
        for par, sl in (("even", slice(0, None, 2)), ("odd", slice(1, None, 2))):
            c = np.zeros(comp.size)
            c[sl] = comp[sl]
            if np.max(np.abs(c)) > rtol * scale:
                out[f"{label}-{par}"] = ChebSeries(c, par)
    return out


def auto_divisor(series: ChebSeries, n: int = 10_001) -> float:
    """1 if max|f| <= 1/2 on the grid, else 2 max|f| (so the result peaks at 1/2)."""
    sup = float(np.max(np.abs(clenshaw_eval(series, np.linspace(-1, 1, n)))))
    return max(1.0, 2.0 * sup)


def solve_function(
    F: Union[Callable, dict],
    config: Optional[SolverConfig] = None,
    degree: Optional[int] = None,
    divisor: Optional[float] = None,
    K: Optional[int] = None,
) -> list:
    """Phases for every nonzero real/imaginary, even/odd part of ``F``.

    ``F`` is either a callable on [-1, 1] (possibly complex valued, expanded
    to ``degree`` by FFT quadrature) or a dict mapping part labels to
    ready-made series.  Each part is divided by ``divisor`` (or by
    :func:`auto_divisor`) before solving.  Returns ``[(report, label), ...]``.
    """
    if callable(F):
        if degree is None:
            raise ValueError("a degree is required when F is a callable")
        parts = split_parts(quadrature_coefficients(F, degree, K))
    else:
        unknown = set(F) - set(PART_LABELS)
        if unknown:
            raise ValueError(f"unknown part labels {sorted(unknown)}")
        parts = dict(F)
    results = []
    for label in PART_LABELS:
        if label not in parts:
            continue
        s = parts[label]
        alpha = auto_divisor(s) if divisor is None else float(divisor)
        scaled = scale_series(s, alpha)
        d = scaled.nominal_degree
        if degree is not None:
            d = degree if (degree % 2 == 0) == (s.parity == "even") else degree - 1
        results.append((lbfgs_solve(scaled, config, degree=max(d, 0)), label))
    return results


# --------------------------------------------------------------------------
# diagnostics


def hessian_spectrum(red: ReducedPhases, target: ChebSeries, step: float = 1e-5):
    """Eigenvalues and condition number of the finite-difference objective Hessian."""
    n = len(red)
    if n > 400:
        raise ValueError("dense Hessian diagnostics are limited to 400 reduced phases")
    H = finite_difference_hessian(red, target, step)
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    cond = float(np.max(np.abs(ev)) / np.min(np.abs(ev))) if np.min(np.abs(ev)) > 0 else np.inf
    return ev, cond


def finite_difference_hessian(red: ReducedPhases, target: ChebSeries, step: float = 1e-5):
    """Central differences of the analytic gradient."""
    d = red.parent_degree
    n = len(red)
    H = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        gp = objective(ReducedPhases(red.values + e, d), target)[1]
        gm = objective(ReducedPhases(red.values - e, d), target)[1]
        H[:, k] = (gp - gm) / (2 * step)
    return H
