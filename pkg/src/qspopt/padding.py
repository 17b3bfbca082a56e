"""Phase padding and small-phase estimates for warm starts.

Padding a symmetric phase vector by ``l`` entries per side leaves f_phi
unchanged, so a solve at degree d can seed a solve at degree d + 2l.  When
phases are close to the canonical start, f_phi is close to a Chebyshev
series whose coefficients are read off from tan of the phase deviations;
inverting that map gives a cheap initial guess.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .chebyshev import ChebSeries
from .optimizer import (
    ReducedPhases,
    SolveReport,
    SolverConfig,
    canonical_initial,
    expand_symmetric,
    lbfgs_solve,
    max_node_error,
    reduce_symmetric,
)

QUARTER = np.pi / 4


class WarmStartMismatch(ValueError):
    """Previous phases cannot be lifted to the requested target."""


def _symmetric(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    reduce_symmetric(phi)  # validates
    return phi


def pad_phases(phi, l: int) -> np.ndarray:
    """Insert ``l`` phases on each side without changing Re P."""
    phi = _symmetric(phi)
    if l < 0:
        raise ValueError("pad width must be nonnegative")
    if l == 0:
        return phi.copy()
    if phi.size < 2:
        raise ValueError("padding needs at least two phases")
    core = phi.copy()
    core[0] -= QUARTER
    core[-1] -= QUARTER
    fill = np.zeros(l - 1)
    return np.concatenate([[QUARTER], fill, core, fill, [QUARTER]])


def _deviation(phi: np.ndarray) -> np.ndarray:
    dev = phi.copy()
    if dev.size == 1:
        dev[0] -= 2 * QUARTER
    else:
        dev[0] -= QUARTER
        dev[-1] -= QUARTER
    return dev


def g_phi_series(phi) -> ChebSeries:
    """Chebyshev series that f_phi approaches as the phase deviations shrink.

    With dev = phi minus the canonical start, the series is
    -prod(cos dev) * sum_j 2 tan(dev_j) T_{D-2j}, plus -prod(cos dev) tan(dev_c)
    for the centre entry when D is even.
    """
    phi = _symmetric(phi)
    dev = _deviation(phi)
    D = phi.size - 1
    half = D // 2 + 1 if D % 2 == 0 else (D + 1) // 2
    c = np.zeros(D + 1)
    t = np.tan(dev[:half])
    for j in range(half):
        k = D - 2 * j
        c[k] = t[j] if k == 0 else 2.0 * t[j]
    c *= -np.prod(np.cos(dev))
    return ChebSeries(c, "even" if D % 2 == 0 else "odd")


def decay_estimate_phases(target: ChebSeries, degree: Optional[int] = None) -> np.ndarray:
    """Symmetric phases whose :func:`g_phi_series` matches ``target`` to first order."""
    D = target.nominal_degree if degree is None else int(degree)
    c = np.zeros(D + 1)
    n = min(D + 1, target.coeffs.size)
    c[:n] = target.coeffs[:n]
    half = D // 2 + 1 if D % 2 == 0 else (D + 1) // 2
    dev = np.empty(half)
    for j in range(half):
        k = D - 2 * j
        dev[j] = -np.arctan(c[k]) if k == 0 else -np.arctan(c[k] / 2.0)
    full = np.concatenate([dev, dev[::-1]]) if D % 2 else np.concatenate([dev, dev[-2::-1]])
    if full.size == 1:
        full[0] += 2 * QUARTER
    else:
        full[0] += QUARTER
        full[-1] += QUARTER
    return full


def padded_warm_start(previous: SolveReport, new_target: ChebSeries) -> ReducedPhases:
    """Lift converged phases to the degree of ``new_target`` by padding."""
    d_old = previous.phases.size - 1
    d_new = new_target.nominal_degree
    gap = d_new - d_old
    if gap < 0 or gap % 2:
        raise WarmStartMismatch(
            f"cannot lift degree {d_old} phases to a degree {d_new} target"
        )
    if new_target.parity is not None and new_target.parity != previous.parity:
        raise WarmStartMismatch(
            f"warm start parity {previous.parity} does not match target parity {new_target.parity}"
        )
    return reduce_symmetric(pad_phases(previous.phases, gap // 2))


def padding_ladder(
    target_at: Callable[[int], ChebSeries],
    degrees: Sequence[int],
    config: Optional[SolverConfig] = None,
):
    """Solve at increasing degrees, seeding each rung with the padded previous phases.

    Returns ``[(report, warm_error, cold_error), ...]`` where the errors are
    the max node errors of the padded and the canonical starting points.
    The first rung starts from the canonical point.
    """
    out = []
    prev = None
    for d in degrees:
        target = target_at(d)
        cold = canonical_initial(d)
        cold_err = max_node_error(expand_symmetric(cold), target)
        if prev is None:
            start, warm_err = cold, cold_err
        else:
            start = padded_warm_start(prev, target)
            warm_err = max_node_error(expand_symmetric(start), target)
        rep = lbfgs_solve(target, config, initial=start)
        out.append((rep, warm_err, cold_err))
        prev = rep
    return out
