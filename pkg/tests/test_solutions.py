import math

import numpy as np
import pytest

from conftest import random_system
from hamspec import (HamSequence, TailDivergence, bform, ex_lcc, ex_lpc, fundamental,
                     lagrange_residual, solve_ivp, step, tail_quantities, transfer_U)
from hamspec.model import canonical_j
from hamspec.solutions import cauchy_terms, reverse_tails, weighted_norm2
from oracles import fundamental_dense, geometric_moment


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("lam", [0.0, 1j, -1j, 1.7])
def test_fundamental_matches_dense_products(n, lam):
    sys, table = random_system(11 + n, n)
    fm = fundamental(sys, lam)
    ref = fundamental_dense(lambda t: table[t], n, 0, 60, lam)
    np.testing.assert_allclose(fm.values(0, 60), ref, atol=1e-12, rtol=1e-12)


def test_step_agrees_with_fundamental():
    sys, _ = random_system(3, 2)
    fm = fundamental(sys, 0.4)
    y = np.eye(4)[:, 1]
    for t in range(10):
        y = step(sys, 0.4, y, t)
    np.testing.assert_allclose(y, fm(10)[:, 1], atol=1e-13)


def test_symplectic_identity():
    sys, _ = random_system(5, 2)
    j = canonical_j(2)
    for lam in (0.0, 1j, 1.7, 0.5 - 2j):
        phi = fundamental(sys, lam).values(0, 200)
        psi = fundamental(sys, np.conj(lam)).values(0, 200)
        res = np.linalg.norm(np.conj(np.swapaxes(psi, 1, 2)) @ j @ phi - j, axis=(1, 2))
        scale = np.linalg.norm(phi, axis=(1, 2)) * np.linalg.norm(psi, axis=(1, 2))
        assert np.max(res / scale) < 1e-14


def test_rescaling_keeps_growing_solutions_accurate():
    # at λ = -10 the free Laplacian has a growing mode of ratio ~ 12 per step
    sys = ex_lpc()
    fm = fundamental(sys, -10.0)
    buf, logs = fm.scaled(0, 400)
    assert fm.rescaled
    assert np.all(np.isfinite(buf)) and np.all(np.abs(buf) <= 1e151)
    # the unscaled values exceed the double range well before t = 400
    big = fm.values(0, 250)
    assert np.all(np.isfinite(big))
    ref = fundamental_dense(sys.blocks, 1, 0, 40, -10.0)
    np.testing.assert_allclose(big[:41], ref, rtol=1e-12)


def test_lagrange_identity_on_arbitrary_sequences(rng):
    sys, _ = random_system(9, 2)
    x = HamSequence(0, rng.standard_normal((52, 4)) + 1j * rng.standard_normal((52, 4)))
    y = HamSequence(0, rng.standard_normal((52, 4)) + 1j * rng.standard_normal((52, 4)))
    assert lagrange_residual(sys, x, None, y, None, 0, 50) < 1e-10


def test_lagrange_identity_checks_sources():
    sys = ex_lcc()
    lam = 0.5 + 0.25j
    x = solve_ivp(sys, lam, [1.0, 0.0], 30)
    y = solve_ivp(sys, np.conj(lam), [0.0, 1.0], 30)
    f = HamSequence(0, lam * x.values)
    g = HamSequence(0, np.conj(lam) * y.values)
    assert lagrange_residual(sys, x, f, y, g, 0, 28, check_tol=1e-12) < 1e-12
    # for solutions at λ and conj(λ) the form is constant
    assert abs(bform(x, y, 29) - bform(x, y, 0)) < 1e-12


def test_transfer_matrix_moves_R_traces():
    sys, _ = random_system(21, 2)
    y = solve_ivp(sys, 0.0, np.arange(1, 5, dtype=complex), 20)
    r = y.r_traces()
    for t in range(0, 15):
        np.testing.assert_allclose(transfer_U(sys, t) @ r[t], r[t + 1], atol=1e-12)


def test_column_norms_closed_form():
    # at λ = 0 the solutions of ex-lcc are z = 1 and z = t + 1
    tq = tail_quantities(ex_lcc(), 0.0, [10, 40])
    assert tq.alpha0 == pytest.approx(math.sqrt(geometric_moment(2, 0.5)), rel=1e-12)
    assert tq.alpha0 == pytest.approx(math.sqrt(12.0), rel=1e-12)
    for b in (10, 40):
        tail = sum((t + 1) ** 2 * 0.5 ** t for t in range(b + 1, 400))
        assert tq.alpha_r[b] == pytest.approx(tail, rel=1e-9)
    assert tq.eps_r[40] < tq.eps_r[10]


def test_divergent_tail_is_reported():
    with pytest.raises(TailDivergence) as info:
        tail_quantities(ex_lpc(), 0.0, [], cap=2 ** 10, with_eps=False)
    assert info.value.horizon >= 2 ** 10 - 1


def test_cauchy_terms_stops_after_min_end():
    terms, inc = cauchy_terms(lambda t0, t1: 0.5 ** np.arange(t0, t1 + 1)[:, None], 0,
                              tol=1e-30, min_end=100)
    assert len(terms) > 100
    assert inc <= 1e-30
    tails = reverse_tails(terms)
    assert tails[0, 0] == pytest.approx(2.0)


def test_weighted_norm_of_solution_column():
    sys = ex_lcc()
    col = fundamental(sys, 0.0).column(1, 80)
    assert weighted_norm2(sys, col, (0, 78)) == pytest.approx(12.0, rel=1e-12)


def test_read_ahead_ignores_coefficients_past_request():
    from hamspec import AssumptionViolation, SystemCoefficients

    def provider(t):
        return (1.0 if t == 45 else 0.0), 1.0, 0.0, 1.0, 0.0

    sys = SystemCoefficients(1, 0, provider)
    fm = fundamental(sys, 0.3)
    assert np.all(np.isfinite(fm.values(0, 40)))
    with pytest.raises(AssumptionViolation):
        fm.values(0, 50)
