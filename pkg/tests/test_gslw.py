import numpy as np
import pytest

from qspopt import approx, gslw, su2
from qspopt.chebyshev import ChebSeries
from qspopt.optimizer import lbfgs_solve

PI = np.pi
X201 = np.linspace(-1, 1, 201)


def random_admissible(rng, d, peak=0.9):
    c = np.zeros(d + 1)
    k = c[d % 2 :: 2].size
    c[d % 2 :: 2] = rng.normal(size=k) * np.exp(-0.2 * np.arange(k))
    s = ChebSeries(c, "even" if d % 2 == 0 else "odd")
    return approx.scale_series(s, approx.sup_norm(s) / peak)


@pytest.mark.parametrize("k", [0, 1, 2, 5, 9])
def test_chebyshev_u_evaluation(k):
    c = np.zeros(k + 1)
    c[k] = 1.0
    theta = np.arccos(np.linspace(-0.99, 0.99, 17))
    np.testing.assert_allclose(gslw.u_series(c, np.cos(theta)), np.sin((k + 1) * theta) / np.sin(theta), atol=1e-12)


def test_basis_identities(rng):
    x = np.linspace(-1, 1, 31)
    c = rng.normal(size=7) + 1j * rng.normal(size=7)
    t, u = gslw.t_series, gslw.u_series
    np.testing.assert_allclose(t(gslw._x_times_t(c), x), x * t(c, x), atol=1e-12)
    np.testing.assert_allclose(u(gslw._x_times_u(c), x), x * u(c, x), atol=1e-12)
    np.testing.assert_allclose(t(gslw._one_minus_x2_times_u_to_t(c), x), (1 - x * x) * u(c, x), atol=1e-12)
    np.testing.assert_allclose(u(gslw._t_to_u(c), x), t(c, x), atol=1e-12)


def test_complement_of_zero_target():
    comp = gslw.complementary_polynomials(ChebSeries([0, 0], "odd"))
    assert comp.constraint_residual() < 1e-14
    np.testing.assert_allclose(comp.real_target.coeffs, 0)


def test_complement_of_identity_target():
    comp = gslw.complementary_polynomials(ChebSeries([0, 1.0], "odd"), margin=0.0)
    np.testing.assert_allclose(comp.imag_complement.coeffs, [0, 0], atol=1e-15)
    np.testing.assert_allclose(np.abs(comp.q_complement), [1.0], atol=1e-15)
    assert comp.constraint_residual() < 1e-14
    with pytest.raises(gslw.GSLWError):
        gslw.complementary_polynomials(ChebSeries([0, 1.0], "odd"))


def test_complement_of_scaled_t5():
    comp = gslw.complementary_polynomials(ChebSeries([0, 0, 0, 0, 0, 0.9], "odd"))
    assert comp.constraint_residual() < 1e-8
    assert comp.imag_complement.parity == "odd"
    assert np.all(comp.q_complement[1::2] == 0)  # C is even: U_0, U_2, U_4


def test_complement_rejections():
    with pytest.raises(gslw.GSLWError, match="degree"):
        gslw.complementary_polynomials(ChebSeries(np.r_[np.zeros(33), 0.5], "odd"))
    with pytest.raises(gslw.GSLWError, match="parity"):
        gslw.complementary_polynomials(ChebSeries([0.1, 0.2]))


def test_reduce_quarter_phases():
    d = 5
    p = np.zeros(d + 1, dtype=complex)
    p[d] = 1j
    q = np.zeros(d)
    q[d - 1] = 1.0
    np.testing.assert_allclose(gslw.reduce_to_phases(p, q), [PI / 4, 0, 0, 0, 0, PI / 4], atol=1e-15)


def test_reduce_zero_phases():
    d = 4
    p = np.zeros(d + 1)
    p[d] = 1.0
    q = np.zeros(d)
    q[d - 1] = 1.0
    np.testing.assert_allclose(gslw.reduce_to_phases(p, q), np.zeros(d + 1), atol=1e-15)


def test_reduce_two_phase_case():
    phases = gslw.reduce_to_phases([0, np.exp(1j * PI / 3)], [1.0])
    np.testing.assert_allclose(phases, [PI / 6, PI / 6], atol=1e-15)


def test_reduce_reports_instability():
    with pytest.raises(gslw.GSLWError, match="modulus"):
        gslw.reduce_to_phases([0, 0, 1.0], [0, 0.5])


def test_reduce_reproduces_random_unitary(rng):
    phi = rng.uniform(-PI, PI, 11)
    x = np.cos(np.pi * (np.arange(64) + 0.5) / 64)
    u = su2.qsp_unitary(phi, x)
    # read off P (T basis) and Q (U basis) from samples by least squares
    d = phi.size - 1
    T = np.cos(np.outer(np.arccos(x), np.arange(d + 1)))
    U = np.sin(np.outer(np.arccos(x), np.arange(1, d + 1))) / np.sqrt(1 - x * x)[:, None]
    p = np.linalg.lstsq(T, u[:, 0, 0], rcond=None)[0]
    q = np.linalg.lstsq(U, u[:, 0, 1] / (1j * np.sqrt(1 - x * x)), rcond=None)[0]
    out = gslw.reduce_to_phases(p, q)
    np.testing.assert_allclose(su2.upper_left(out, X201), su2.upper_left(phi, X201), atol=1e-10)


def test_solve_half_x():
    rep = gslw.gslw_solve(ChebSeries([0, 0.5], "odd"))
    np.testing.assert_allclose(su2.real_component(rep.phases, X201), X201 / 2, atol=1e-14)
    assert rep.converged and rep.parity == "odd"


def test_solve_eigenfilter_agrees_with_optimizer():
    f = approx.scale_series(approx.eigenstate_filter(3, 0.3), np.sqrt(2))
    direct, opt = gslw.gslw_solve(f), lbfgs_solve(f)
    assert direct.max_node_error < 1e-8
    assert np.max(np.abs(su2.real_component(direct.phases, X201) - su2.real_component(opt.phases, X201))) < 1e-8


def test_solve_truncated_cosine_agrees_with_optimizer():
    even, _, _ = approx.jacobi_anger(5.0)
    f = approx.scale_series(ChebSeries(even.coeffs[:15], "even"), 2)
    direct, opt = gslw.gslw_solve(f), lbfgs_solve(f)
    assert direct.target_degree == 14
    assert np.max(np.abs(su2.real_component(direct.phases, X201) - su2.real_component(opt.phases, X201))) < 1e-8


def test_cross_oracle_random_targets(rng):
    for _ in range(20):
        d = int(rng.integers(1, 21))
        f = random_admissible(rng, d)
        comp = gslw.complementary_polynomials(f)
        assert comp.constraint_residual() < 1e-8
        direct, opt = gslw.gslw_solve(f), lbfgs_solve(f)
        gap = np.max(np.abs(su2.real_component(direct.phases, X201) - su2.real_component(opt.phases, X201)))
        assert gap < 1e-8
