"""Potentials on the torus and the oscillating crystal family.

A plain Potential wraps one Fourier series.  A CrystalPotential adds a fast
oscillation on top of a base series:

    V_eps(q) = V(q) + alpha * chi(k q)        (argument taken mod 1)

with scalar amplitude alpha and positive integer frequency multiplier k, so

    grad V_eps(q) = grad V(q) + alpha * k * (grad chi)(k q).

Suprema over the torus (oscillation max V - min V, and the uniform distance
between two gradients) are found by a dense grid scan followed by a
golden-section polish along coordinate lines through the best grid point.
The grid resolves every admissible band-limited integrand, so the polish
converges to the true extremum of these smooth objectives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier import FourierFunction, _as_coords, wrap_coords

GRID_POINTS = {1: 2**14, 2: 2**9, 3: 2**6}  # points per axis in the scan
GOLDEN_STEPS = 20
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Potential:
    """A Fourier-series potential with a display label."""

    base: FourierFunction
    label: str = "V"

    @property
    def dimension(self) -> int:
        return self.base.dimension

    def value(self, q) -> np.ndarray:
        return self.base.value(q)

    def gradient(self, q) -> np.ndarray:
        return self.base.gradient(q)

    def hessian(self, q) -> np.ndarray:
        return self.base.hessian(q)

    def shifted(self, c: float) -> "Potential":
        return Potential(self.base.shifted(c), self.label)


@dataclass(frozen=True)
class CrystalPotential:
    """Base potential plus a fast oscillation alpha * chi(k q)."""

    base: FourierFunction
    chi: FourierFunction
    alpha: float
    k: int
    label: str = "V_eps"

    def __post_init__(self):
        if self.chi.dimension != self.base.dimension:
            raise ValueError("chi and base must share a dimension")
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise ValueError("crystal frequency multiplier k must be a positive integer")
        if not math.isfinite(self.alpha):
            raise ValueError("crystal amplitude alpha must be finite")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def dimension(self) -> int:
        return self.base.dimension

    def value(self, q) -> np.ndarray:
        arr = _as_coords(q, self.dimension)
        return self.base.value(arr) + self.alpha * self.chi.value(self.k * arr)

    def gradient(self, q) -> np.ndarray:
        arr = _as_coords(q, self.dimension)
        return self.base.gradient(arr) + (self.alpha * self.k) * self.chi.gradient(self.k * arr)

    def hessian(self, q) -> np.ndarray:
        arr = _as_coords(q, self.dimension)
        return self.base.hessian(arr) + (self.alpha * self.k**2) * self.chi.hessian(self.k * arr)

    def shifted(self, c: float) -> "CrystalPotential":
        return CrystalPotential(self.base.shifted(c), self.chi, self.alpha, self.k, self.label)


def crystal_eval(C: CrystalPotential, q, order: int = 1):
    """Value (order 0) or (value, gradient) (order 1) of a crystal potential."""
    if order not in (0, 1):
        raise ValueError("crystal_eval supports order 0 or 1")
    if order == 0:
        return C.value(q)
    return C.value(q), C.gradient(q)


def _value_fn(obj):
    if isinstance(obj, FourierFunction):
        return obj.value
    return obj.value


def _gradient_fn(obj):
    return obj.gradient


def _axis_grid(dimension: int) -> np.ndarray:
    n = GRID_POINTS[dimension]
    return np.arange(n) / n


def _grid_points(dimension: int) -> np.ndarray:
    axes = [_axis_grid(dimension)] * dimension
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _golden_polish(fun, x0: np.ndarray, h: float) -> tuple[np.ndarray, float]:
    """Coordinate-wise golden-section maximization around a grid candidate.

    For each coordinate in turn, runs GOLDEN_STEPS golden-section iterations
    on the bracket [x_i - h, x_i + h] and moves to the best point found.
    """
    x = np.array(x0, dtype=float)
    best = float(fun(x))
    for i in range(x.shape[0]):
        a = x[i] - h
        b = x[i] + h

        def along(t):
            y = x.copy()
            y[i] = t
            return float(fun(y))

        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc, fd = along(c), along(d)
        for _ in range(GOLDEN_STEPS):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                fc = along(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                fd = along(d)
        t = c if fc >= fd else d
        ft = max(fc, fd)
        if ft > best:
            x[i] = t
            best = ft
    return x, best


def _supremum(scalar_batched_fun, dimension: int) -> float:
    """sup over T^d of a smooth batched objective, grid scan plus polish."""
    pts = _grid_points(dimension)
    vals = np.asarray(scalar_batched_fun(pts), dtype=float)
    i = int(np.argmax(vals))
    h = 1.0 / GRID_POINTS[dimension]

    def pointwise(x):
        return scalar_batched_fun(wrap_coords(x)[None, :])[0]

    _, best = _golden_polish(pointwise, pts[i], h)
    return max(best, float(vals[i]))


def maximum(V) -> float:
    """max of a potential (or bare Fourier series) over the torus."""
    return _supremum(lambda pts: _value_fn(V)(pts), _dimension_of(V))


def minimum(V) -> float:
    return -_supremum(lambda pts: -_value_fn(V)(pts), _dimension_of(V))


def oscillation(V) -> float:
    """osc(V) = max V - min V over the torus."""
    return maximum(V) - minimum(V)


def sup_grad_distance(F, G) -> float:
    """sup over the torus of the euclidean norm of grad F - grad G."""
    dF, dG = _dimension_of(F), _dimension_of(G)
    if dF != dG:
        raise ValueError("potentials must share a dimension")
    gF, gG = _gradient_fn(F), _gradient_fn(G)

    def objective(pts):
        diff = gF(pts) - gG(pts)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    return _supremum(objective, dF)


def sup_hessian_norm(F) -> float:
    """sup over the torus of the spectral norm of the Hessian of F."""
    H = F.hessian

    def objective(pts):
        mats = H(pts)
        return np.abs(np.linalg.eigvalsh(mats)).max(axis=-1)

    return _supremum(objective, _dimension_of(F))


def shift_to_zero_min(V):
    """Shift a potential so its minimum over the torus is exactly zero.

    Only the constant Fourier coefficient changes, so gradients (and hence
    all dynamics) are untouched.
    """
    return V.shifted(-minimum(V))


def _dimension_of(obj) -> int:
    return obj.dimension
