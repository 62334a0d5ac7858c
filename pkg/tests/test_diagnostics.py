"""Tests for the ensemble estimators.

Oracles: closed-form Gaussian moments, the exact modulus of a free overdamped
diffusion (whose recorded increments are exactly Gaussian), brute-force
pairwise recomputation, and explicit-loop recomputation of every reduction.
"""

import math

import numpy as np
import pytest

from overdamp.corrector import residual_R1, residual_R2
from overdamp.diagnostics import (
    LadderSpec,
    hamiltonian,
    ka_modulus,
    ladder_statistic,
    make_overdamped_generator,
    moment_report,
    rest_term_report,
    weak_error,
)
from overdamp.fourier import FourierFunction
from overdamp.integrators import (
    LANGEVIN,
    OVERDAMPED,
    Ensemble,
    GaussianMomentum,
    PointStart,
    ScalingParams,
    UniformStart,
    ZeroMomentum,
    simulate_ensemble,
)
from overdamp.potentials import Potential, shift_to_zero_min

TWO_PI = 2.0 * np.pi


def cos1d(amplitude: float = 1.0) -> FourierFunction:
    return FourierFunction(1, [((1,), amplitude, 0.0)])


def const1d(c: float) -> FourierFunction:
    return FourierFunction(1, [((0,), c, 0.0)])


def zero_potential(d: int) -> Potential:
    return Potential(FourierFunction(d, []))


def synthetic(positions, momenta=None, eps=0.5, beta=1.0, T=None,
              kind=LANGEVIN) -> Ensemble:
    n, m, d = positions.shape
    T = float(m - 1) * 0.01 if T is None else T
    grid = np.linspace(0.0, T, m)
    params = ScalingParams(eps=eps, beta=beta, dt=T / max(1, m - 1), T=T)
    return Ensemble(kind=kind, params=params, dt_eff=params.dt, grid=grid,
                    positions=positions, momenta=momenta, winding=None,
                    seed=0, stream_base=0, potential=None, q0=None, p0=None)


def gaussian_abs_moment(d: int, sigma: float, power: float) -> float:
    """E |X|^power for X ~ N(0, sigma^2 I_d)."""
    return (sigma**power * 2.0**(power / 2.0)
            * math.gamma((d + power) / 2.0) / math.gamma(d / 2.0))


# -- hamiltonian -------------------------------------------------------------------


def test_hamiltonian_zero_at_rest_at_minimum():
    V = shift_to_zero_min(Potential(cos1d()))
    assert hamiltonian(np.array([0.5]), np.array([0.0]), V) == pytest.approx(0.0, abs=1e-9)


def test_hamiltonian_free_case():
    V = zero_potential(2)
    p = np.array([1.2, -np.sqrt(4.0 - 1.44)])
    assert hamiltonian(np.array([0.3, 0.8]), p, V) == pytest.approx(2.0, rel=1e-12)


def test_hamiltonian_shifted_cosine_example():
    base = FourierFunction(1, [((0,), 1.0, 0.0), ((1,), 1.0, 0.0)])  # 1 + cos
    V = shift_to_zero_min(Potential(base))
    got = hamiltonian(np.array([0.0]), np.array([1.0]), V)
    assert got == pytest.approx(2.5, rel=1e-9)


def test_hamiltonian_batched_nonnegative():
    rng = np.random.default_rng(31)
    V = shift_to_zero_min(Potential(cos1d(0.7)))
    q = rng.random((50, 1))
    p = rng.standard_normal((50, 1))
    h = hamiltonian(q, p, V)
    assert h.shape == (50,)
    assert np.all(h >= -1e-9)


# -- moment report ------------------------------------------------------------------


def test_moment_report_all_zero():
    E = synthetic(np.zeros((10, 4, 2)), momenta=np.zeros((10, 4, 2)))
    rep = moment_report(E, 1.0)
    assert rep.sup_over_grid == 0.0
    assert rep.mean_sup == 0.0 and rep.mean_sup_se == 0.0
    assert all(est == 0.0 and se == 0.0 for est, se in rep.per_time.values())


def test_moment_report_requires_momenta():
    E = synthetic(np.zeros((10, 4, 2)))
    with pytest.raises(ValueError, match="momenta"):
        moment_report(E, 1.0)
    with pytest.raises(ValueError, match="gamma"):
        moment_report(synthetic(np.zeros((4, 3, 1)), momenta=np.zeros((4, 3, 1))), 0.5)


def test_moment_report_gaussian_oracle():
    rng = np.random.default_rng(32)
    d, beta, n, m = 2, 1.3, 20000, 5
    sigma = 1.0 / np.sqrt(beta)
    mom = sigma * rng.standard_normal((n, m, d))
    E = synthetic(rng.random((n, m, d)), momenta=mom, beta=beta)
    rep = moment_report(E, 1.0)
    for est, se in rep.per_time.values():
        assert se > 0
        assert abs(est - d / beta) <= 3 * se
    assert rep.sup_over_grid == max(e for e, _ in rep.per_time.values())
    rep32 = moment_report(E, 1.5)
    want = gaussian_abs_moment(d, sigma, 3.0)
    for est, se in rep32.per_time.values():
        assert abs(est - want) <= 3 * se


def test_moment_report_mean_sup_dominates_single_time():
    rng = np.random.default_rng(33)
    mom = rng.standard_normal((5000, 8, 1))
    E = synthetic(rng.random((5000, 8, 1)), momenta=mom)
    rep = moment_report(E, 1.0)
    # the expected grid supremum dominates every per-time second moment
    assert rep.mean_sup >= rep.sup_over_grid


def test_se_shrinks_like_root_two_on_doubling():
    rng = np.random.default_rng(34)
    mom = rng.standard_normal((8000, 3, 1))
    pos = rng.random((8000, 3, 1))
    half = moment_report(synthetic(pos[:4000], momenta=mom[:4000]), 1.0)
    full = moment_report(synthetic(pos, momenta=mom), 1.0)
    t0 = next(iter(full.per_time))
    ratio = full.per_time[t0][1] / half.per_time[t0][1]
    assert 0.8 / np.sqrt(2.0) <= ratio <= 1.2 / np.sqrt(2.0)


# -- weak error ---------------------------------------------------------------------


def overdamped_pair(seed_a, seed_b, n=2000):
    V = zero_potential(1)
    params = ScalingParams(eps=1.0, beta=1.0, dt=1e-3, T=0.5)
    kw = dict(q0=UniformStart(), output_stride=100)
    Ea = simulate_ensemble(OVERDAMPED, V, params, n, seed=seed_a, **kw)
    Eb = simulate_ensemble(OVERDAMPED, V, params, n, seed=seed_b, **kw)
    return Ea, Eb


def test_weak_error_identity_case():
    Ea, _ = overdamped_pair(41, 42, n=500)
    table = weak_error(Ea, Ea, [cos1d()], Ea.grid)
    assert all(r.estimate == 0.0 for r in table.rows)
    assert all(r.se > 0.0 for r in table.rows)


def test_weak_error_free_diffusion_null():
    Ea, Eb = overdamped_pair(43, 44)
    fs = [("cos", cos1d()), ("sin", FourierFunction(1, [((1,), 0.0, 1.0)]))]
    table = weak_error(Ea, Eb, fs, Ea.grid[1:])
    assert len(table.rows) == 2 * (len(Ea.grid) - 1)
    for r in table.rows:
        assert abs(r.estimate) <= 3.0 * r.se


def test_weak_error_antisymmetric_exactly():
    Ea, Eb = overdamped_pair(45, 46, n=400)
    fwd = weak_error(Ea, Eb, [cos1d()], Ea.grid)
    rev = weak_error(Eb, Ea, [cos1d()], Ea.grid)
    for a, b in zip(fwd.rows, rev.rows):
        assert a.estimate == -b.estimate
        assert a.se == b.se


def test_weak_error_pooled_se_definition():
    rng = np.random.default_rng(47)
    pos_a = rng.random((300, 3, 1))
    pos_b = rng.random((500, 3, 1))
    Ea = synthetic(pos_a)
    Eb = synthetic(pos_b)
    f = cos1d()
    table = weak_error(Ea, Eb, [f], [Ea.grid[1]])
    va = f.value(pos_a[:, 1, :])
    vb = f.value(pos_b[:, 1, :])
    want_se = np.sqrt(va.std(ddof=1)**2 / 300 + vb.std(ddof=1)**2 / 500)
    assert table.rows[0].se == pytest.approx(want_se, rel=1e-12)
    assert table.rows[0].estimate == pytest.approx(va.mean() - vb.mean(), rel=1e-12)


def test_weak_error_rejects_off_grid_times():
    Ea, Eb = overdamped_pair(48, 49, n=100)
    with pytest.raises(ValueError, match="grid"):
        weak_error(Ea, Eb, [cos1d()], [0.123456])


# -- ladder -------------------------------------------------------------------------


def test_ladder_spec_validation():
    f = cos1d()
    with pytest.raises(ValueError, match="two times"):
        LadderSpec((0.5,), (), f)
    with pytest.raises(ValueError, match="nondecreasing"):
        LadderSpec((0.5, 0.25), (f,), f)
    with pytest.raises(ValueError, match="observable"):
        LadderSpec((0.25, 0.5), (f, f), f)


def test_ladder_constant_function_is_exactly_zero():
    rng = np.random.default_rng(51)
    E = synthetic(rng.random((40, 11, 1)), T=1.0)
    spec = LadderSpec((0.3, 0.6, 1.0), (cos1d(), cos1d()), const1d(2.5))
    L = make_overdamped_generator(Potential(cos1d()), 1.0)
    est, se = ladder_statistic(E, spec, L)
    assert est == 0.0 and se == 0.0


def test_ladder_single_window_reduces_to_plain_defect():
    rng = np.random.default_rng(52)
    E = synthetic(rng.random((60, 11, 1)), T=1.0)
    f = cos1d()
    V = Potential(cos1d(0.5))
    L = make_overdamped_generator(V, 2.0)
    est, se = ladder_statistic(E, LadderSpec((0.3, 0.8), (const1d(1.0),), f), L)
    # recompute without any window
    lo, hi = 3, 8
    incr = f.value(E.positions[:, hi, :]) - f.value(E.positions[:, lo, :])
    lf = L(f, E.positions[:, lo:hi + 1, :])
    integral = np.trapezoid(lf, x=E.grid[lo:hi + 1], axis=1)
    vals = incr - integral
    assert est == pytest.approx(vals.mean(), abs=1e-15)
    assert se == pytest.approx(vals.std(ddof=1) / np.sqrt(60), abs=1e-15)


def test_ladder_explicit_loop_recomputation():
    rng = np.random.default_rng(53)
    E = synthetic(rng.random((7, 11, 1)), T=1.0)
    f = cos1d()
    phis = (cos1d(0.8), FourierFunction(1, [((1,), 0.0, 1.0)]))
    spec = LadderSpec((0.2, 0.5, 0.9), phis, f)
    V = Potential(cos1d())
    beta = 1.4
    L = make_overdamped_generator(V, beta)
    est, se = ladder_statistic(E, spec, L)
    vals = []
    for i in range(7):
        q = E.positions[i]
        incr = float(f.value(q[9])) - float(f.value(q[5]))
        integral = 0.0
        for k in range(5, 9):
            lf_a = float(L(f, q[k]))
            lf_b = float(L(f, q[k + 1]))
            integral += 0.5 * (lf_a + lf_b) * (E.grid[k + 1] - E.grid[k])
        window = float(phis[0].value(q[2])) * float(phis[1].value(q[5]))
        vals.append((incr - integral) * window)
    vals = np.asarray(vals)
    assert est == pytest.approx(vals.mean(), abs=1e-13)
    assert se == pytest.approx(vals.std(ddof=1) / np.sqrt(7), abs=1e-13)


def test_ladder_time_validation():
    rng = np.random.default_rng(54)
    E = synthetic(rng.random((5, 11, 1)), T=1.0)
    f = cos1d()
    L = make_overdamped_generator(Potential(cos1d()), 1.0)
    with pytest.raises(ValueError, match="grid"):
        ladder_statistic(E, LadderSpec((0.33, 0.8), (f,), f), L)
    with pytest.raises(ValueError, match="horizon"):
        ladder_statistic(E, LadderSpec((0.5, 1.5), (f,), f), L)


def test_ladder_overdamped_self_consistency():
    # the overdamped process solves its own martingale problem, so the
    # windowed defect is statistically zero up to O(dt) discretization bias
    V = Potential(cos1d())
    params = ScalingParams(eps=1.0, beta=1.0, dt=1e-3, T=1.0)
    E = simulate_ensemble(OVERDAMPED, V, params, 4000, seed=55,
                          q0=UniformStart(), output_stride=1)
    f = cos1d()
    spec = LadderSpec((0.25, 0.5, 0.75, 1.0), (f, f, f), f)
    est, se = ladder_statistic(E, spec, make_overdamped_generator(V, 1.0))
    assert se > 0
    assert abs(est) <= 3.0 * se + 5e-3


# -- tightness modulus -----------------------------------------------------------------


def test_modulus_frozen_ensemble_is_zero():
    E = synthetic(np.full((20, 21, 1), 0.37), T=0.2)
    rep = ka_modulus(E, cos1d(), [0.03, 0.1])
    assert [p.estimate for p in rep.points] == [0.0, 0.0]


def test_modulus_free_diffusion_against_closed_form_and_brute_force():
    V = zero_potential(1)
    beta = 1.0
    params = ScalingParams(eps=1.0, beta=beta, dt=1e-3, T=0.2)
    E = simulate_ensemble(OVERDAMPED, V, params, 10000, seed=56,
                          q0=UniformStart(), output_stride=1)
    f = cos1d()
    deltas = [0.002, 0.004, 0.008]
    rep = ka_modulus(E, f, deltas)
    # free overdamped increments are exactly Gaussian(0, 2h/beta), and the
    # start is uniform, so E[(f(Q_{t+h})-f(Q_t))^2] = 1 - exp(-4 pi^2 h / beta)
    for point in rep.points:
        closed = 1.0 - np.exp(-4.0 * np.pi**2 * point.delta / beta)
        assert 0.8 * closed <= point.estimate <= 1.3 * closed
        assert point.se > 0
        assert point.lag <= point.delta + 1e-12
    # at most linear growth in delta, within a factor of two
    by_delta = {p.delta: p.estimate for p in rep.points}
    assert by_delta[0.004] <= 2.0 * by_delta[0.002] * 1.1
    assert by_delta[0.008] <= 2.0 * by_delta[0.004] * 1.1
    # brute force over every admissible grid pair reproduces the sup exactly
    fv = f.value(E.positions)
    grid = E.grid
    m = len(grid)
    for point in rep.points:
        best = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                if grid[j] - grid[i] > point.delta + 1e-12:
                    break
                diff = fv[:, j] - fv[:, i]
                best = max(best, float(np.mean(diff * diff)))
        assert point.estimate == pytest.approx(best, rel=1e-12)


def test_modulus_validation():
    rng = np.random.default_rng(57)
    E = synthetic(rng.random((10, 21, 1)), T=0.2)
    with pytest.raises(ValueError, match="delta"):
        ka_modulus(E, cos1d(), [0.5])
    with pytest.raises(ValueError, match="delta"):
        ka_modulus(E, cos1d(), [0.0])
    bad = synthetic(rng.random((10, 3, 1)), T=1.0)
    bad.grid[1] = 0.123  # make the grid non-uniform
    with pytest.raises(ValueError, match="uniform"):
        ka_modulus(bad, cos1d(), [0.5])


# -- rest terms ------------------------------------------------------------------------


def langevin_small(n=6, d=2, seed=58):
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 9, d))
    mom = rng.uniform(-2, 2, size=(n, 9, d))
    return synthetic(pos, momenta=mom, eps=0.2, beta=1.5, T=0.8)


def test_rest_terms_constant_function():
    E = langevin_small()
    V = FourierFunction(2, {(1, 0): (0.5, 0.0)})
    rep = rest_term_report(E, FourierFunction(2, {(0, 0): (3.0, 0.0)}), V, V)
    assert rep.sup_r1 == 0.0 and rep.sup_r1_se == 0.0
    assert rep.int_r2 == 0.0 and rep.int_r2_se == 0.0


def test_rest_terms_require_momenta():
    E = synthetic(np.zeros((4, 5, 1)))
    f = cos1d()
    with pytest.raises(ValueError, match="momenta"):
        rest_term_report(E, f, f, f)


def test_rest_terms_explicit_loop_recomputation():
    E = langevin_small()
    f = FourierFunction(2, {(1, 0): (0.7, 0.1), (0, 1): (-0.3, 0.4)})
    V = FourierFunction(2, {(1, 1): (0.4, 0.0)})
    V_eps = FourierFunction(2, {(1, 1): (0.4, 0.0), (2, -1): (0.1, 0.2)})
    rep = rest_term_report(E, f, V, V_eps)
    eps, beta = 0.2, 1.5
    sups, ints = [], []
    for i in range(E.n_traj):
        r1 = [float(residual_R1(f, eps, E.positions[i, j], E.momenta[i, j]))
              for j in range(9)]
        r2 = [float(residual_R2(f, V, V_eps, eps, beta,
                                E.positions[i, j], E.momenta[i, j]))
              for j in range(9)]
        sups.append(max(r1))
        integral = sum(0.5 * (r2[j] + r2[j + 1]) * (E.grid[j + 1] - E.grid[j])
                       for j in range(8))
        ints.append(integral)
    sups = np.asarray(sups)
    ints = np.asarray(ints)
    assert rep.sup_r1 == pytest.approx(sups.mean(), rel=1e-12)
    assert rep.sup_r1_se == pytest.approx(sups.std(ddof=1) / np.sqrt(6), rel=1e-12)
    assert rep.int_r2 == pytest.approx(ints.mean(), rel=1e-12)
    assert rep.int_r2_se == pytest.approx(ints.std(ddof=1) / np.sqrt(6), rel=1e-12)


def test_rest_terms_chunking_matches_single_pass(monkeypatch):
    import overdamp.diagnostics as diag
    E = langevin_small(n=12, seed=59)
    f = FourierFunction(2, {(1, 0): (0.7, 0.1)})
    V = FourierFunction(2, {(1, 1): (0.4, 0.0)})
    whole = rest_term_report(E, f, V, V)
    monkeypatch.setattr(diag, "REDUCE_CHUNK_FLOATS", 9 * 8 * 8)
    chunked = rest_term_report(E, f, V, V)
    assert chunked == whole
