"""Real Fourier calculus on the unit torus T^d = R^d / Z^d.

Positions live in the half-open cell [0,1)^d.  A finite real Fourier series
is stored as a map from integer wave vectors k to coefficient pairs (a_k, b_k):

    F(q) = sum_k  a_k cos(2 pi k.q) + b_k sin(2 pi k.q)

The period is fixed to 1 and every factor of 2*pi appears explicitly in the
derivative formulas rather than being folded into the coefficients.  The
derivative of a finite series is again a finite series, so gradients,
Hessians and third-derivative tensors are evaluated analytically; finite
differences appear only in the test oracles.

All evaluation methods accept a single point (shape (d,) or a TorusPosition)
or a batch of points (shape (..., d)) and return arrays with matching batch
dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def _as_coords(q, dimension: int | None = None) -> np.ndarray:
    """Coerce a TorusPosition or array-like to a float64 array of shape (..., d)."""
    if isinstance(q, TorusPosition):
        arr = q.coords
    else:
        arr = np.asarray(q, dtype=np.float64)
    if arr.ndim == 0:
        raise ValueError("position must have at least one axis (got a scalar)")
    if dimension is not None and arr.shape[-1] != dimension:
        raise ValueError(f"position has dimension {arr.shape[-1]}, expected {dimension}")
    return arr


def wrap_coords(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates to the fundamental cell [0,1)^d, elementwise.

    x - floor(x) can round up to exactly 1.0 for tiny negative inputs, so that
    case is folded back to keep the half-open invariant.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot wrap non-finite coordinates")
    r = x - np.floor(x)
    return np.where(r >= 1.0, r - 1.0, r)


def wrap_with_count(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Like wrap_coords but also return the integer part that was removed.

    Returns (r, m) with x == r + m, m integer-valued, r in [0,1).  Keeping m
    lets callers carry exact unwrapped positions: the winding numbers stay
    integers in floating point, so unwrapped - wrapped is exactly integral.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot wrap non-finite coordinates")
    m = np.floor(x)
    r = x - m
    high = r >= 1.0
    if np.any(high):
        r = np.where(high, r - 1.0, r)
        m = np.where(high, m + 1.0, m)
    return r, m


@dataclass(frozen=True)
class TorusPosition:
    """A point of T^d stored by its representative in [0,1)^d."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("TorusPosition holds a single point, shape (d,)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("TorusPosition coordinates must be finite")
        if np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise ValueError("TorusPosition coordinates must lie in [0,1)")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @property
    def dimension(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TorusPosition):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


def wrap(x) -> TorusPosition:
    """Wrap arbitrary finite coordinates into the fundamental cell.

    wrap([1.25]) == [0.25], wrap([-0.5]) == [0.5], and points already inside
    [0,1)^d pass through unchanged.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return TorusPosition(wrap_coords(arr))


@dataclass(frozen=True)
class DerivativeBundle:
    """Value and derivative tensors of a scalar function at one or many points.

    Tensors are populated up to the requested order and None beyond it.  The
    Hessian is symmetric and the third-derivative tensor fully symmetric by
    construction.  For batched input the leading axes of every field are the
    batch axes.
    """

    value: np.ndarray
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    third: np.ndarray | None = None


def _canonical_terms(dimension, terms) -> tuple:
    if isinstance(terms, dict):
        items = [(k, a, b) for k, (a, b) in terms.items()]
    else:
        # accept both (k, (a, b)) pairs and flat (k, a, b) triples
        items = [(t[0], t[1], t[2]) if len(t) == 3 else (t[0], t[1][0], t[1][1])
                 for t in terms]
    canon = []
    for k, a, b in items:
        k = tuple(int(c) for c in k)
        if len(k) != dimension:
            raise ValueError(f"wave vector {k} does not have dimension {dimension}")
        a = float(a)
        b = float(b)
        if a == 0.0 and b == 0.0:
            continue
        canon.append((k, a, b))
    canon.sort(key=lambda t: t[0])
    seen = set()
    for k, _, _ in canon:
        if k in seen:
            raise ValueError(f"duplicate wave vector {k}")
        seen.add(k)
    return tuple(canon)


@dataclass(frozen=True)
class FourierFunction:
    """Finite real Fourier series on T^d.

    terms maps each integer wave vector to its (cosine, sine) coefficient
    pair.  Terms with both coefficients zero are dropped; the remaining terms
    are kept sorted so equality and hashing are structural.  Instances are
    immutable; arithmetic returns new objects.
    """

    dimension: int
    terms: tuple = ()
    _kmat: np.ndarray = field(init=False, repr=False, compare=False)
    _ca: np.ndarray = field(init=False, repr=False, compare=False)
    _cb: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        canon = _canonical_terms(self.dimension, self.terms)
        object.__setattr__(self, "terms", canon)
        n = len(canon)
        kmat = np.zeros((n, self.dimension), dtype=np.float64)
        ca = np.zeros(n)
        cb = np.zeros(n)
        for i, (k, a, b) in enumerate(canon):
            kmat[i] = k
            ca[i] = a
            cb[i] = b
        object.__setattr__(self, "_kmat", kmat)
        object.__setattr__(self, "_ca", ca)
        object.__setattr__(self, "_cb", cb)

    @classmethod
    def from_terms(cls, dimension: int, terms) -> "FourierFunction":
        return cls(dimension=dimension, terms=_canonical_terms(dimension, terms))

    def term_map(self) -> dict:
        return {k: (a, b) for k, a, b in self.terms}

    # -- pointwise evaluation ------------------------------------------------

    def _trig(self, q) -> tuple[np.ndarray, np.ndarray]:
        arr = _as_coords(q, self.dimension)
        phase = TWO_PI * (arr @ self._kmat.T)
        return np.cos(phase), np.sin(phase)

    def value(self, q) -> np.ndarray:
        cos, sin = self._trig(q)
        return cos @ self._ca + sin @ self._cb

    def gradient(self, q) -> np.ndarray:
        cos, sin = self._trig(q)
        w = self._cb * cos - self._ca * sin
        return TWO_PI * (w @ self._kmat)

    def hessian(self, q) -> np.ndarray:
        cos, sin = self._trig(q)
        w = -(self._ca * cos + self._cb * sin)
        h = np.einsum("...n,ni,nj->...ij", w, self._kmat, self._kmat)
        return (TWO_PI ** 2) * h

    def third(self, q) -> np.ndarray:
        cos, sin = self._trig(q)
        w = self._ca * sin - self._cb * cos
        t = np.einsum("...n,ni,nj,nl->...ijl", w, self._kmat, self._kmat, self._kmat)
        return (TWO_PI ** 3) * t

    def laplacian(self, q) -> np.ndarray:
        cos, sin = self._trig(q)
        w = -(self._ca * cos + self._cb * sin)
        k2 = np.sum(self._kmat * self._kmat, axis=1)
        return (TWO_PI ** 2) * (w @ k2)

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "FourierFunction") -> "FourierFunction":
        if not isinstance(other, FourierFunction):
            return NotImplemented
        if other.dimension != self.dimension:
            raise ValueError("cannot add series of different dimension")
        merged = self.term_map()
        for k, (a, b) in other.term_map().items():
            pa, pb = merged.get(k, (0.0, 0.0))
            merged[k] = (pa + a, pb + b)
        return FourierFunction(self.dimension, _canonical_terms(self.dimension, merged))

    def __mul__(self, c) -> "FourierFunction":
        c = float(c)
        scaled = {k: (c * a, c * b) for k, (a, b) in self.term_map().items()}
        return FourierFunction(self.dimension, _canonical_terms(self.dimension, scaled))

    __rmul__ = __mul__

    def __neg__(self) -> "FourierFunction":
        return self * -1.0

    def __sub__(self, other: "FourierFunction") -> "FourierFunction":
        return self + (-other)

    def shifted(self, c: float) -> "FourierFunction":
        """Add the constant c.  Only the k = 0 cosine coefficient changes, so
        every derivative is exactly unaffected."""
        zero = (0,) * self.dimension
        merged = self.term_map()
        a, b = merged.get(zero, (0.0, 0.0))
        merged[zero] = (a + float(c), b)
        return FourierFunction(self.dimension, _canonical_terms(self.dimension, merged))


def eval_derivatives(F: FourierFunction, q, order: int = 3) -> DerivativeBundle:
    """Evaluate F and its derivative tensors up to the requested order (0..3)."""
    if not isinstance(order, (int, np.integer)) or isinstance(order, bool):
        raise TypeError("order must be an integer in 0..3")
    if order < 0 or order > 3:
        raise ValueError("order must be in 0..3")
    value = F.value(q)
    gradient = F.gradient(q) if order >= 1 else None
    hessian = F.hessian(q) if order >= 2 else None
    third = F.third(q) if order >= 3 else None
    return DerivativeBundle(value=value, gradient=gradient, hessian=hessian, third=third)


# -- text serialization ------------------------------------------------------
#
# One term per line: the d integer components of k, then a_k, then b_k,
# whitespace-separated.  '#' starts a comment; blank lines are ignored.


def to_text(F: FourierFunction) -> str:
    lines = [f"# dimension {F.dimension}, one term per line: k1..k{F.dimension} a_k b_k"]
    for k, a, b in F.terms:
        comps = " ".join(str(c) for c in k)
        lines.append(f"{comps} {a!r} {b!r}")
    return "\n".join(lines) + "\n"


def from_text(text: str, dimension: int | None = None) -> FourierFunction:
    terms = []
    inferred = dimension
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) < 3:
            raise ValueError(f"line {lineno}: need k components plus two coefficients")
        d = len(tok) - 2
        if inferred is None:
            inferred = d
        if d != inferred:
            raise ValueError(f"line {lineno}: dimension {d} != {inferred}")
        try:
            k = tuple(int(t) for t in tok[:d])
            a, b = float(tok[d]), float(tok[d + 1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        terms.append((k, a, b))
    if inferred is None:
        raise ValueError("no terms found and dimension not given")
    return FourierFunction(inferred, tuple(terms))
