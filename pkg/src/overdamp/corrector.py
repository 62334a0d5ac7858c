"""Perturbed test functions and the two generators.

For a position test function f on T^d, the perturbed test function is

    f_eps(q, p) = f(q) + eps * p.grad f(q) + (eps^2/2) * Hess f(q)(p, p),

whose correction terms are exactly the solutions of the cascade obtained by
expanding the scaled generator

    L_eps g = (1/eps^2) (beta^{-1} Lap_p g - p.grad_p g)
            + (1/eps)   (p.grad_q g - grad V_eps . grad_p g)

in powers of eps: the eps^{-1} terms cancel, the eps^0 terms build the limit
generator L f = -grad V . grad f + beta^{-1} Lap f, and what remains is

    L_eps f_eps - L f = (grad V - grad V_eps).grad f
                        + eps * ( (1/2) D^3 f(p,p,p) - Hess f(p, grad V_eps) ).

Both routes to that difference (applying L_eps to f_eps directly, and the
closed form above) are implemented independently and must agree to 1e-9;
disagreement raises, since it can only come from a derivative bug.

Phase-space functions are represented structurally: a perturbed test function
carries its base Fourier function and evaluates the p-polynomial pieces from
the analytic derivative tensors.  No symbolic engine is involved.

All functions accept single points (shape (d,)) or batches (shape (..., d))
in q and p simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import FourierFunction, _as_coords

# A test function is simply a Fourier series on the torus.
TestFunction = FourierFunction

AGREEMENT_TOL = 1e-9


def _as_momentum(p, dimension: int) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] != dimension:
        raise ValueError(f"momentum must have trailing dimension {dimension}")
    return arr


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _hess_apply(H, p):
    return np.einsum("...ij,...j->...i", H, p)


def _third_contract2(T, p):
    """D^3 f contracted twice with p, leaving a vector: T[i,j,l] p_j p_l."""
    return np.einsum("...ijl,...j,...l->...i", T, p, p)


@dataclass(frozen=True)
class PhaseDerivatives:
    """What the scaled generator needs from a phase-space function."""

    value: np.ndarray
    grad_q: np.ndarray
    grad_p: np.ndarray
    lap_p: np.ndarray


@dataclass(frozen=True)
class PerturbedTestFunction:
    """f(q) + eps p.grad f + (eps^2/2) Hess f(p,p), evaluated structurally."""

    f: FourierFunction
    eps: float

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")

    @property
    def dimension(self) -> int:
        return self.f.dimension

    def value(self, q, p) -> np.ndarray:
        q = _as_coords(q, self.dimension)
        p = _as_momentum(p, self.dimension)
        grad = self.f.gradient(q)
        hess = self.f.hessian(q)
        return (self.f.value(q) + self.eps * _dot(p, grad)
                + 0.5 * self.eps**2 * _dot(p, _hess_apply(hess, p)))

    def phase_derivatives(self, q, p) -> PhaseDerivatives:
        q = _as_coords(q, self.dimension)
        p = _as_momentum(p, self.dimension)
        eps = self.eps
        grad = self.f.gradient(q)
        hess = self.f.hessian(q)
        third = self.f.third(q)
        hp = _hess_apply(hess, p)
        value = self.f.value(q) + eps * _dot(p, grad) + 0.5 * eps**2 * _dot(p, hp)
        grad_q = grad + eps * hp + 0.5 * eps**2 * _third_contract2(third, p)
        grad_p = eps * grad + eps**2 * hp
        lap_p = eps**2 * np.trace(hess, axis1=-2, axis2=-1)
        return PhaseDerivatives(value, grad_q, grad_p, lap_p)


@dataclass(frozen=True)
class PositionFunction:
    """A phase-space function depending on q only."""

    f: FourierFunction

    @property
    def dimension(self) -> int:
        return self.f.dimension

    def phase_derivatives(self, q, p) -> PhaseDerivatives:
        q = _as_coords(q, self.dimension)
        p = _as_momentum(p, self.dimension)
        value = self.f.value(q)
        return PhaseDerivatives(value, self.f.gradient(q), 0.0 * p, 0.0 * value)


@dataclass(frozen=True)
class HamiltonianFunction:
    """|p|^2/2 + V_eps(q) as a phase-space function."""

    potential: object

    @property
    def dimension(self) -> int:
        return self.potential.dimension

    def phase_derivatives(self, q, p) -> PhaseDerivatives:
        q = _as_coords(q, self.dimension)
        p = _as_momentum(p, self.dimension)
        value = 0.5 * _dot(p, p) + self.potential.value(q)
        d = float(self.dimension)
        return PhaseDerivatives(value, self.potential.gradient(q) + 0.0 * p,
                                p.copy(), d + 0.0 * value)


def perturb(f: FourierFunction, eps: float) -> PerturbedTestFunction:
    """Attach the first- and second-order corrector terms to f."""
    return PerturbedTestFunction(f, float(eps))


def _phase_function(g):
    if isinstance(g, FourierFunction):
        return PositionFunction(g)
    if hasattr(g, "phase_derivatives"):
        return g
    raise TypeError(f"cannot interpret {g!r} as a phase-space function")


def apply_langevin_generator(g, V_eps, eps: float, beta: float, q, p) -> np.ndarray:
    """L_eps g at (q, p) for the potential V_eps.

    g may be any object with phase_derivatives (a PerturbedTestFunction, the
    Hamiltonian, ...) or a bare Fourier function of q alone.
    """
    pf = _phase_function(g)
    q = _as_coords(q, pf.dimension)
    p = _as_momentum(p, pf.dimension)
    der = pf.phase_derivatives(q, p)
    grad_v = V_eps.gradient(q)
    fast = (der.lap_p / beta - _dot(p, der.grad_p)) / eps**2
    slow = (_dot(p, der.grad_q) - _dot(grad_v, der.grad_p)) / eps
    return fast + slow


def apply_overdamped_generator(f: FourierFunction, V, beta: float, q) -> np.ndarray:
    """L f = -grad V . grad f + beta^{-1} Lap f at q."""
    q = _as_coords(q, f.dimension)
    return -_dot(V.gradient(q), f.gradient(q)) + f.laplacian(q) / beta


# -- residuals -----------------------------------------------------------------


def residual_R1(f: FourierFunction, eps: float, q, p) -> np.ndarray:
    """|f_eps(q, p) - f(q)|, the perturbation a test function picks up."""
    q = _as_coords(q, f.dimension)
    p = _as_momentum(p, f.dimension)
    grad = f.gradient(q)
    hess = f.hessian(q)
    return np.abs(eps * _dot(p, grad) + 0.5 * eps**2 * _dot(p, _hess_apply(hess, p)))


def generator_gap_direct(f: FourierFunction, V, V_eps, eps: float, beta: float, q, p) -> np.ndarray:
    """L_eps f_eps - L f computed by applying both generators."""
    return (apply_langevin_generator(perturb(f, eps), V_eps, eps, beta, q, p)
            - apply_overdamped_generator(f, V, beta, q))


def generator_gap_closed(f: FourierFunction, V, V_eps, eps: float, beta: float, q, p) -> np.ndarray:
    """The same difference from its closed form.

    (grad V - grad V_eps).grad f + eps ((1/2) D^3 f(p,p,p) - Hess f(p, grad V_eps));
    beta drops out exactly.
    """
    q = _as_coords(q, f.dimension)
    p = _as_momentum(p, f.dimension)
    grad = f.gradient(q)
    hess = f.hessian(q)
    third = f.third(q)
    gv = V.gradient(q)
    gve = V_eps.gradient(q)
    third_ppp = _dot(p, _third_contract2(third, p))
    return (_dot(gv - gve, grad)
            + eps * (0.5 * third_ppp - _dot(_hess_apply(hess, p), gve)))


def residual_R2(f: FourierFunction, V, V_eps, eps: float, beta: float, q, p) -> np.ndarray:
    """|L f - L_eps f_eps|, cross-checked between its two routes.

    The closed form and the direct two-generator computation must agree to
    AGREEMENT_TOL at every point; a gap beyond that means a derivative bug,
    so it raises instead of returning.
    """
    closed = generator_gap_closed(f, V, V_eps, eps, beta, q, p)
    direct = generator_gap_direct(f, V, V_eps, eps, beta, q, p)
    gap = np.max(np.abs(np.asarray(closed) - np.asarray(direct)))
    if gap > AGREEMENT_TOL:
        raise RuntimeError(
            f"corrector identity violated: closed-form and direct generator "
            f"difference disagree by {gap:g} (> {AGREEMENT_TOL:g}); "
            f"this indicates a derivative bug")
    return np.abs(closed)


# -- cascade diagnostics ---------------------------------------------------------


def cascade_defect_fast(f: FourierFunction, q, p) -> np.ndarray:
    """The eps^{-1} coefficient p.grad_q f - p.grad_p g1 + beta^{-1} Lap_p g1.

    With g1 = p.grad f this cancels identically; computing it from the
    structural pieces returns exact zeros in floating point (Lap_p g1 = 0).
    """
    q = _as_coords(q, f.dimension)
    p = _as_momentum(p, f.dimension)
    grad = f.gradient(q)
    transport = _dot(p, grad)       # p.grad_q f
    relaxation = _dot(p, grad)      # p.grad_p (p.grad f)
    return transport - relaxation


def cascade_defect_slow(f: FourierFunction, V, beta: float, q, p) -> np.ndarray:
    """The eps^0 coefficient minus the limit generator.

    p.grad_q g1 - grad V.grad_p g1 - p.grad_p g2 + beta^{-1} Lap_p g2 - L f,
    with g1 = p.grad f, g2 = (1/2) Hess f(p,p).  Should vanish to rounding.
    """
    q = _as_coords(q, f.dimension)
    p = _as_momentum(p, f.dimension)
    grad = f.gradient(q)
    hess = f.hessian(q)
    hp = _hess_apply(hess, p)
    lap = np.trace(hess, axis1=-2, axis2=-1)
    gv = V.gradient(q)
    order0 = _dot(p, hp) - _dot(gv, grad) - _dot(p, hp) + lap / beta
    return order0 - apply_overdamped_generator(f, V, beta, q)
