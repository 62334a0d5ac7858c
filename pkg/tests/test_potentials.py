"""Tests for potentials, the crystal family, and torus suprema.

The oscillation search is checked against a dense brute-force scan computed
here in the test (1e6 points for d=1), and the crystal gradient distance
against its closed form |alpha| * k * sup|grad chi|.
"""

import math

import numpy as np
import pytest

from overdamp.fourier import FourierFunction
from overdamp.potentials import (
    CrystalPotential,
    Potential,
    crystal_eval,
    maximum,
    minimum,
    oscillation,
    shift_to_zero_min,
    sup_grad_distance,
    sup_hessian_norm,
)

TWO_PI = 2.0 * math.pi


def cos_k(d, kvec, a=1.0):
    return FourierFunction.from_terms(d, {tuple(kvec): (a, 0.0)})


def test_crystal_eval_example_alpha1_k2():
    V = FourierFunction.from_terms(1, {})
    chi = cos_k(1, (1,))
    C = CrystalPotential(V, chi, alpha=1.0, k=2)
    val, grad = crystal_eval(C, np.array([0.0]), order=1)
    assert math.isclose(val, 1.0, rel_tol=1e-15)
    assert abs(grad[0]) <= 1e-12


def test_crystal_eval_example_alpha_half_k3():
    V = FourierFunction.from_terms(1, {})
    chi = cos_k(1, (1,))
    C = CrystalPotential(V, chi, alpha=0.5, k=3)
    q = np.array([1.0 / 12.0])
    val, grad = crystal_eval(C, q, order=1)
    # chi(3 q) = cos(pi/2) = 0; grad = 0.5*3*(-2 pi sin(pi/2)) = -3 pi
    assert abs(val) <= 1e-12
    assert math.isclose(grad[0], -3.0 * math.pi, rel_tol=1e-12)


def test_crystal_requires_positive_integer_k():
    V = FourierFunction.from_terms(1, {})
    chi = cos_k(1, (1,))
    with pytest.raises(ValueError):
        CrystalPotential(V, chi, alpha=0.1, k=0)
    with pytest.raises(ValueError):
        CrystalPotential(V, chi, alpha=0.1, k=1.5)  # type: ignore[arg-type]


def test_oscillation_of_pure_cosine():
    for a in (1.0, 0.35, -2.0):
        F = cos_k(1, (1,), a=a)
        assert math.isclose(oscillation(F), 2 * abs(a), rel_tol=1e-9)


def test_oscillation_of_constant_is_zero():
    F = FourierFunction.from_terms(1, {(0,): (3.7, 0.0)})
    assert abs(oscillation(F)) <= 1e-12


def test_oscillation_matches_brute_force():
    F = FourierFunction.from_terms(1, {(1,): (1.0, 0.0), (2,): (0.3, 0.0)})
    qs = np.arange(1_000_000)[:, None] / 1_000_000
    vals = F.value(qs)
    brute = float(vals.max() - vals.min())
    assert abs(oscillation(F) - brute) <= 1e-6


def test_oscillation_shift_invariant():
    rng = np.random.default_rng(3)
    for d in (1, 2):
        terms = {}
        for _ in range(4):
            k = tuple(int(c) for c in rng.integers(-2, 3, size=d))
            terms[k] = tuple(rng.uniform(-1, 1, size=2))
        F = FourierFunction.from_terms(d, terms)
        c = rng.uniform(-5, 5)
        assert abs(oscillation(F.shifted(c)) - oscillation(F)) <= 1e-8


def test_oscillation_2d():
    # separable: osc(cos(2pi q1) + 0.5 cos(2pi q2)) = 2 + 1
    F = FourierFunction.from_terms(2, {(1, 0): (1.0, 0.0), (0, 1): (0.5, 0.0)})
    assert math.isclose(oscillation(F), 3.0, rel_tol=1e-8)


def test_sup_grad_distance_crystal_closed_form():
    V = cos_k(1, (1,))
    chi = cos_k(1, (1,))
    for alpha, k in ((0.25, 2), (0.67, 3), (-0.4, 5)):
        C = CrystalPotential(V, chi, alpha=alpha, k=k)
        expected = abs(alpha) * k * TWO_PI
        assert abs(sup_grad_distance(C, Potential(V)) - expected) <= 1e-6


def test_sup_grad_distance_vanishing_sequence():
    V = cos_k(1, (1,))
    chi = cos_k(1, (1,))
    dists = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        alpha = eps ** 0.75
        k = math.ceil(eps ** -0.5)
        C = CrystalPotential(V, chi, alpha=alpha, k=k)
        dists.append(sup_grad_distance(C, Potential(V)))
    assert all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))
    # alpha*k = eps^(1/4) here, so expect roughly (0.05/0.4)^(1/4) ~ 0.6 of the start
    assert dists[-1] < 0.6 * dists[0]


def test_min_zero_shift_never_changes_gradient():
    V = Potential(FourierFunction.from_terms(1, {(1,): (1.0, 0.0), (0,): (2.0, 0.0)}))
    W = shift_to_zero_min(V)
    assert abs(minimum(W)) <= 1e-9
    q = np.array([0.123])
    assert np.array_equal(W.gradient(q), V.gradient(q))
    assert math.isclose(maximum(W), oscillation(V), rel_tol=1e-9)


def test_shift_to_zero_min_crystal():
    V = cos_k(1, (1,))
    chi = cos_k(1, (1,))
    C = CrystalPotential(V, chi, alpha=0.3, k=4)
    S = shift_to_zero_min(C)
    assert abs(minimum(S)) <= 1e-9
    q = np.array([0.61])
    assert np.array_equal(S.gradient(q), C.gradient(q))


def test_sup_hessian_norm_of_cosine():
    chi = cos_k(1, (1,))
    assert math.isclose(sup_hessian_norm(chi), (TWO_PI) ** 2, rel_tol=1e-9)
