import numpy as np
import pytest

from helpers import random_symmetric
from qspopt import approx, su2
from qspopt.chebyshev import ChebSeries, clenshaw_eval
from qspopt.optimizer import (
    ReducedPhases,
    SolveReport,
    expand_symmetric,
    lbfgs_solve,
    max_node_error,
    objective,
    reduce_symmetric,
)
from qspopt.padding import (
    QUARTER,
    WarmStartMismatch,
    decay_estimate_phases,
    g_phi_series,
    pad_phases,
    padded_warm_start,
    padding_ladder,
)

PI = np.pi
X = np.linspace(-1, 1, 100)


def cosine_target(tau, d):
    even, _, _ = approx.jacobi_anger(tau)
    c = np.zeros(d + 1)
    n = min(d + 1, even.coeffs.size)
    c[:n] = even.coeffs[:n]
    return approx.scale_series(ChebSeries(c, "even"), 2)


def test_pad_zero_width_is_identity():
    phi = np.array([0.3, -0.1, 0.3])
    np.testing.assert_array_equal(pad_phases(phi, 0), phi)


def test_pad_two_phase_example():
    phi = [PI / 6, PI / 6]
    out = pad_phases(phi, 1)
    np.testing.assert_allclose(out, [PI / 4, PI / 6 - PI / 4, PI / 6 - PI / 4, PI / 4])
    np.testing.assert_allclose(su2.real_component(out, X), X / 2, atol=1e-13)


def test_pad_quarter_example_stays_zero():
    out = pad_phases([PI / 4, 0, 0, PI / 4], 2)
    assert out.size == 8
    assert np.max(np.abs(su2.real_component(out, X))) < 1e-15


def test_pad_layout():
    phi = np.array([0.5, 0.2, 0.2, 0.5])
    out = pad_phases(phi, 3)
    np.testing.assert_allclose(out, [QUARTER, 0, 0, 0.5 - QUARTER, 0.2, 0.2, 0.5 - QUARTER, 0, 0, QUARTER])


def test_pad_rejects_bad_input():
    with pytest.raises(ValueError):
        pad_phases([0.1, 0.2, 0.3], 1)
    with pytest.raises(ValueError):
        pad_phases([0.1, 0.1], -1)
    with pytest.raises(ValueError):
        pad_phases([0.1], 2)


def test_padding_preserves_real_part(rng):
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 51))
        phi = random_symmetric(rng, d)
        out = pad_phases(phi, int(rng.integers(0, 6)))
        np.testing.assert_array_equal(out, out[::-1])
        worst = max(worst, np.max(np.abs(su2.real_component(out, X) - su2.real_component(phi, X))))
    assert worst < 1e-12


def test_g_phi_of_canonical_start_is_zero():
    for d in (1, 2, 7, 8):
        phi = np.zeros(d + 1)
        phi[0] = phi[-1] = QUARTER
        assert np.all(g_phi_series(phi).coeffs == 0)


def test_g_phi_two_phase_case():
    for a in (1e-2, 1e-3):
        phi = [QUARTER + a, QUARTER + a]
        g = g_phi_series(phi)
        np.testing.assert_allclose(g.coeffs, [0, -2 * np.cos(a) ** 2 * np.tan(a)], rtol=1e-14)
        # here g is exact: -2 cos^2(a) tan(a) = -sin(2a)
        np.testing.assert_allclose(su2.real_component(phi, X), -np.sin(2 * a) * X, atol=1e-15)
        np.testing.assert_allclose(g(X), su2.real_component(phi, X), atol=1e-15)


@pytest.mark.parametrize("d", [9, 10])
def test_g_phi_cubic_accuracy(rng, d):
    half = np.zeros((d + 2) // 2)
    half[rng.choice(half.size, size=3, replace=False)] = rng.normal(size=3)
    dev = expand_symmetric(ReducedPhases(half, d))
    ratios = []
    for s in (0.1, 0.05, 0.025, 0.0125):
        scaled = dev * s / np.sum(np.abs(dev))
        phi = scaled.copy()
        phi[0] += QUARTER
        phi[-1] += QUARTER
        gap = np.max(np.abs(su2.real_component(phi, X) - g_phi_series(phi)(X)))
        ratios.append(gap / s**3)
    assert max(ratios) / min(ratios) < 2


def test_decay_estimate_examples():
    np.testing.assert_allclose(decay_estimate_phases(ChebSeries([0, 0, 0, 0], "odd")), [QUARTER, 0, 0, QUARTER])
    c1 = 1e-3
    phi = decay_estimate_phases(ChebSeries([0, c1], "odd"))
    # the inverse ignores the prod(cos) prefactor, a relative O(c1^2) effect
    np.testing.assert_allclose(g_phi_series(phi).coeffs, [0, c1], rtol=c1**2)
    assert np.max(np.abs(su2.real_component(phi, X) - c1 * X)) < c1**3


@pytest.mark.parametrize("d", [6, 7])
def test_decay_estimate_inverts_g_phi(rng, d):
    c = np.zeros(d + 1)
    c[d % 2 :: 2] = 1e-2 * rng.normal(size=c[d % 2 :: 2].size)
    target = ChebSeries(c, "even" if d % 2 == 0 else "odd")
    phi = decay_estimate_phases(target)
    np.testing.assert_array_equal(phi, phi[::-1])
    dev = np.abs(phi - decay_estimate_phases(ChebSeries(np.zeros(d + 1), target.parity)))
    np.testing.assert_allclose(g_phi_series(phi).coeffs, c, rtol=np.sum(dev**2), atol=1e-300)


def test_decay_estimate_error_shrinks_cubically():
    base = cosine_target(50.0, 90)
    errs = []
    for s in (1e-2, 5e-3, 2.5e-3):
        target = approx.scale_series(base, 1 / s)
        phi = decay_estimate_phases(target)
        errs.append(np.max(np.abs(su2.real_component(phi, X) - clenshaw_eval(target, X))))
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(8.0, rel=0.25)


def test_warm_start_same_degree(rng):
    target = cosine_target(20.0, 40)
    rep = lbfgs_solve(target)
    start = padded_warm_start(rep, target)
    assert objective(start, target)[0] < 1e-24


def test_warm_start_beats_cold_start():
    low, high = cosine_target(50.0, 70), cosine_target(50.0, 80)
    rep = lbfgs_solve(low)
    warm = padded_warm_start(rep, high)
    cold = reduce_symmetric(np.r_[QUARTER, np.zeros(79), QUARTER])
    assert objective(warm, high)[0] * 10 <= objective(cold, high)[0]


def test_warm_start_mismatches():
    rep = lbfgs_solve(ChebSeries([0, 0.5], "odd"))
    with pytest.raises(WarmStartMismatch):
        padded_warm_start(rep, ChebSeries([0, 0, 0.1], "even"))
    fake = SolveReport(np.zeros(6), 0, 0, 0, 0, 1, 5, True, "odd")
    with pytest.raises(WarmStartMismatch):
        padded_warm_start(fake, ChebSeries([0, 0.5], "odd"))


def test_padding_ladder():
    rungs = padding_ladder(lambda d: cosine_target(50.0, d), [70, 80, 90])
    for k, (rep, warm, cold) in enumerate(rungs):
        assert rep.converged and rep.max_node_error < 1e-12
        if k:
            assert warm * 10 <= cold
    assert rungs[-1][0].target_degree == 90
    assert max_node_error(rungs[-1][0].phases, cosine_target(50.0, 90)) < 1e-12
