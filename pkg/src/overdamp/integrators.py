"""Time integration of the scaled Langevin system and its overdamped limit.

Langevin dynamics on T^d x R^d in the overdamped scaling,

    dQ = (1/eps) P dt
    dP = -(1/eps) grad V_eps(Q) dt - (1/eps^2) P dt + (1/eps) sqrt(2/beta) dW,

is integrated with a B-A-O-A-B splitting whose thermostat substep is the
exact Ornstein-Uhlenbeck update over the full step:

    B: p <- p - (dt/2) (1/eps) grad V_eps(q)
    A: q <- wrap(q + (dt/2) (1/eps) p)
    O: p <- c p + sigma_eff xi,   c = exp(-dt/eps^2),
                                  sigma_eff = sqrt((1 - c^2)/beta)
    then A and B again.

The limit process dQ = -grad V(Q) dt + sqrt(2/beta) dB uses Euler-Maruyama.

Step counts: n = ceil(T/dt) (rounded up to a multiple of the output stride),
and the effective step is dt_eff = T/n <= dt, so the grid always lands
exactly on T.

Randomness: trajectory i draws from the counter stream (seed, stream_base+i).
Per trajectory the stream is consumed in a fixed order: d uniforms if the
initial position is uniform, then d normals if the initial momentum is
Gaussian, then d normals per time step.  Trajectories are simulated in fixed
blocks of BLOCK_TRAJ regardless of worker count, so results are bit-identical
for any degree of parallelism and any noise chunking.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fourier import TorusPosition, wrap_coords, wrap_with_count
from .rng import make_stream

BLOCK_TRAJ = 8192          # trajectories per simulation block (determinism unit)
NOISE_CHUNK_FLOATS = 4_000_000   # noise buffer budget per block, in float64s

LANGEVIN = "langevin"
OVERDAMPED = "overdamped"


@dataclass(frozen=True)
class ScalingParams:
    """Scaling and discretization parameters: eps in (0,1], beta, dt, T > 0."""

    eps: float
    beta: float
    dt: float
    T: float

    def __post_init__(self):
        problems = []
        if not (0.0 < self.eps <= 1.0):
            problems.append(f"eps={self.eps} outside (0, 1]")
        if not self.beta > 0.0:
            problems.append(f"beta={self.beta} must be positive")
        if not self.dt > 0.0:
            problems.append(f"dt={self.dt} must be positive")
        if not self.T > 0.0:
            problems.append(f"T={self.T} must be positive")
        if self.dt > 0.0 < self.T and self.dt > self.T:
            problems.append(f"dt={self.dt} exceeds T={self.T}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class PhaseState:
    """One phase point: wrapped position, momentum, time."""

    q: TorusPosition
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.shape != (self.q.dimension,):
            raise ValueError("momentum must have the position's dimension")
        if not np.all(np.isfinite(self.p)):
            raise ValueError("momentum must be finite")


# -- initial laws -------------------------------------------------------------


@dataclass(frozen=True)
class PointStart:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if any(not (0.0 <= c < 1.0) for c in self.coords):
            raise ValueError("start point must lie in [0,1)^d")


@dataclass(frozen=True)
class UniformStart:
    pass


@dataclass(frozen=True)
class ZeroMomentum:
    pass


@dataclass(frozen=True)
class PointMomentum:
    coords: tuple

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if any(not math.isfinite(c) for c in coords):
            raise ValueError("fixed momentum must be finite")
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class GaussianMomentum:
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError("sigma must be finite and nonnegative")


def default_langevin_dt(eps: float) -> float:
    """Default step rule: resolve the fast scale, capped at 1e-3."""
    return min(0.1 * eps * eps, 1e-3)


DEFAULT_OVERDAMPED_DT = 1e-4


# -- single-step operations ----------------------------------------------------


def langevin_step(state: PhaseState, potential, params: ScalingParams, noise,
                  skip_thermostat: bool = False) -> PhaseState:
    """One B-A-O-A-B step.  noise is the length-d standard normal for O.

    skip_thermostat drops the O substep entirely (the deterministic B-A-A-B
    scheme used by the energy-conservation test).
    """
    q = np.array(state.q.coords, dtype=np.float64)
    p = np.array(state.p, dtype=np.float64)
    h = params.dt / (2.0 * params.eps)
    p = p - h * potential.gradient(q)
    q = wrap_coords(q + h * p)
    if not skip_thermostat:
        c = math.exp(-params.dt / params.eps**2)
        sigma_eff = math.sqrt((1.0 - c * c) / params.beta)
        p = c * p + sigma_eff * np.asarray(noise, dtype=np.float64)
    q = wrap_coords(q + h * p)
    p = p - h * potential.gradient(q)
    return PhaseState(TorusPosition(q), p, state.t + params.dt)


def overdamped_step(q, potential, beta: float, dt: float, noise) -> TorusPosition:
    """One Euler-Maruyama step of the limit diffusion."""
    coords = q.coords if isinstance(q, TorusPosition) else np.asarray(q, dtype=np.float64)
    drift = -potential.gradient(coords) * dt
    kick = math.sqrt(2.0 * dt / beta) * np.asarray(noise, dtype=np.float64)
    return TorusPosition(wrap_coords(coords + drift + kick))


# -- ensembles ------------------------------------------------------------------


@dataclass
class Ensemble:
    """Recorded trajectories of one process on a shared time grid.

    positions has shape (n_traj, len(grid), d).  momenta matches positions
    when recorded.  winding, when recorded, holds the integer number of cell
    crossings accumulated per coordinate, so positions + winding recovers the
    unwrapped path exactly.
    """

    kind: str
    params: ScalingParams
    dt_eff: float
    grid: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray | None
    winding: np.ndarray | None
    seed: int
    stream_base: int
    potential: object
    q0: object
    p0: object

    @property
    def n_traj(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[2]

    def unwrapped_positions(self) -> np.ndarray:
        if self.winding is None:
            raise ValueError("ensemble was recorded without winding numbers")
        return self.positions + self.winding


def resolve_steps(params: ScalingParams, output_stride: int | None,
                  record_times=None) -> tuple[int, float, np.ndarray]:
    """Number of steps, effective dt, and the recorded step indices.

    Exactly one of output_stride / record_times is used.  With a stride the
    step count is rounded up to a stride multiple so the grid ends at T; with
    explicit times each must sit on the step grid to within 1e-9.
    """
    n0 = int(math.ceil(params.T / params.dt - 1e-9))
    n0 = max(n0, 1)
    if record_times is None:
        stride = 1 if output_stride is None else int(output_stride)
        if stride < 1:
            raise ValueError("output_stride must be >= 1")
        n = stride * int(math.ceil(n0 / stride))
        return n, params.T / n, np.arange(0, n + 1, stride, dtype=np.int64)
    if output_stride is not None:
        raise ValueError("pass either output_stride or record_times, not both")
    n = n0
    dt_eff = params.T / n
    steps = []
    for t in record_times:
        t = float(t)
        if not (0.0 <= t <= params.T + 1e-9):
            raise ValueError(f"record time {t} outside [0, T]")
        k = int(round(t / dt_eff))
        if abs(k * dt_eff - t) > 1e-9 * max(1.0, params.T):
            raise ValueError(f"record time {t} does not sit on the step grid (dt_eff={dt_eff})")
        steps.append(min(k, n))
    uniq = sorted(set(steps))
    return n, dt_eff, np.asarray(uniq, dtype=np.int64)


def _draw_initial(gen, d: int, q0, p0, zero_noise: bool):
    if isinstance(q0, PointStart):
        q = np.asarray(q0.coords, dtype=np.float64)
    elif isinstance(q0, UniformStart):
        q = gen.random(d) if not zero_noise else np.zeros(d)
    else:
        raise TypeError(f"unsupported initial position law {q0!r}")
    if p0 is None or isinstance(p0, ZeroMomentum):
        p = np.zeros(d)
    elif isinstance(p0, PointMomentum):
        p = np.asarray(p0.coords, dtype=np.float64)
    elif isinstance(p0, GaussianMomentum):
        p = p0.sigma * gen.standard_normal(d) if not zero_noise else np.zeros(d)
    else:
        raise TypeError(f"unsupported initial momentum law {p0!r}")
    return q, p


def _simulate_block(kind, potential, params, dt_eff, n_steps, record_steps,
                    seed, stream_base, block_start, block_count, dimension,
                    q0, p0, record_momenta, record_winding, zero_noise):
    B, d = block_count, dimension
    gens = [make_stream(seed, stream_base + block_start + i) for i in range(B)]
    q = np.empty((B, d))
    p = np.empty((B, d))
    for i, g in enumerate(gens):
        q[i], p[i] = _draw_initial(g, d, q0, p0, zero_noise)

    n_rec = len(record_steps)
    pos = np.empty((B, n_rec, d))
    mom = np.empty((B, n_rec, d)) if (record_momenta and kind == LANGEVIN) else None
    wind = np.empty((B, n_rec, d)) if record_winding else None
    W = np.zeros((B, d))

    rec_ptr = 0
    if n_rec and record_steps[0] == 0:
        pos[:, 0] = q
        if mom is not None:
            mom[:, 0] = p
        if wind is not None:
            wind[:, 0] = W
        rec_ptr = 1

    chunk = max(1, min(n_steps, NOISE_CHUNK_FLOATS // max(1, B * d)))
    buf = None if zero_noise else np.empty((B, chunk, d))
    zeros_xi = np.zeros((B, d)) if zero_noise else None

    if kind == LANGEVIN:
        h = dt_eff / (2.0 * params.eps)
        c = math.exp(-dt_eff / params.eps**2)
        sigma_eff = math.sqrt((1.0 - c * c) / params.beta)
        F = potential.gradient(q)
        filled_to = 0
        for k in range(1, n_steps + 1):
            if zero_noise:
                xi = zeros_xi
            else:
                if k > filled_to:
                    span = min(chunk, n_steps - filled_to)
                    for i, g in enumerate(gens):
                        g.standard_normal(out=buf[i, :span])
                    filled_to += span
                xi = buf[:, (k - 1) % chunk, :]
            p -= h * F
            x = q + h * p
            if record_winding:
                q, m = wrap_with_count(x)
                W += m
            else:
                q = wrap_coords(x)
            p *= c
            if not zero_noise:
                p += sigma_eff * xi
            x = q + h * p
            if record_winding:
                q, m = wrap_with_count(x)
                W += m
            else:
                q = wrap_coords(x)
            F = potential.gradient(q)
            p -= h * F
            if rec_ptr < n_rec and k == record_steps[rec_ptr]:
                pos[:, rec_ptr] = q
                if mom is not None:
                    mom[:, rec_ptr] = p
                if wind is not None:
                    wind[:, rec_ptr] = W
                rec_ptr += 1
    elif kind == OVERDAMPED:
        s = math.sqrt(2.0 * dt_eff / params.beta)
        filled_to = 0
        for k in range(1, n_steps + 1):
            if zero_noise:
                xi = zeros_xi
            else:
                if k > filled_to:
                    span = min(chunk, n_steps - filled_to)
                    for i, g in enumerate(gens):
                        g.standard_normal(out=buf[i, :span])
                    filled_to += span
                xi = buf[:, (k - 1) % chunk, :]
            x = q + (-dt_eff) * potential.gradient(q)
            if not zero_noise:
                x += s * xi
            if record_winding:
                q, m = wrap_with_count(x)
                W += m
            else:
                q = wrap_coords(x)
            if rec_ptr < n_rec and k == record_steps[rec_ptr]:
                pos[:, rec_ptr] = q
                if wind is not None:
                    wind[:, rec_ptr] = W
                rec_ptr += 1
    else:
        raise ValueError(f"unknown process kind {kind!r}")

    return block_start, pos, mom, wind


def _simulate_block_star(args):
    return _simulate_block(*args)


def simulate_ensemble(kind: str, potential, params: ScalingParams, n_traj: int,
                      seed: int, *, q0=None, p0=None, output_stride: int | None = None,
                      record_times=None, record_momenta: bool = False,
                      record_winding: bool = False, workers: int = 1,
                      zero_noise: bool = False, stream_base: int = 0) -> Ensemble:
    """Simulate n_traj independent trajectories and record them on a grid.

    q0 defaults to the uniform law on the torus; for Langevin runs p0
    defaults to the stationary Gaussian with variance 1/beta per component.
    """
    if kind not in (LANGEVIN, OVERDAMPED):
        raise ValueError(f"unknown process kind {kind!r}")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    d = potential.dimension
    if q0 is None:
        q0 = UniformStart()
    if isinstance(q0, PointStart) and len(q0.coords) != d:
        raise ValueError("start point dimension mismatch")
    if kind == LANGEVIN and p0 is None:
        p0 = GaussianMomentum(1.0 / math.sqrt(params.beta))

    n_steps, dt_eff, record_steps = resolve_steps(params, output_stride, record_times)
    grid = record_steps * dt_eff

    n_rec = len(record_steps)
    positions = np.empty((n_traj, n_rec, d))
    momenta = np.empty((n_traj, n_rec, d)) if (record_momenta and kind == LANGEVIN) else None
    winding = np.empty((n_traj, n_rec, d)) if record_winding else None

    tasks = []
    for start in range(0, n_traj, BLOCK_TRAJ):
        count = min(BLOCK_TRAJ, n_traj - start)
        tasks.append((kind, potential, params, dt_eff, n_steps, record_steps,
                      seed, stream_base, start, count, d, q0, p0,
                      record_momenta, record_winding, zero_noise))

    if workers <= 1 or len(tasks) == 1:
        for t in tasks:
            start, pos, mom, wind = _simulate_block(*t)
            _paste(positions, momenta, winding, start, pos, mom, wind)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for start, pos, mom, wind in ex.map(_simulate_block_star, tasks):
                _paste(positions, momenta, winding, start, pos, mom, wind)

    return Ensemble(kind=kind, params=params, dt_eff=dt_eff, grid=grid,
                    positions=positions, momenta=momenta, winding=winding,
                    seed=seed, stream_base=stream_base, potential=potential,
                    q0=q0, p0=p0)


def _paste(positions, momenta, winding, start, pos, mom, wind):
    stop = start + pos.shape[0]
    positions[start:stop] = pos
    if momenta is not None:
        momenta[start:stop] = mom
    if winding is not None:
        winding[start:stop] = wind


# -- CSV ------------------------------------------------------------------------


def ensemble_csv_header(E: Ensemble) -> list[str]:
    d = E.dimension
    cols = ["traj", "t"] + [f"q{i+1}" for i in range(d)]
    if E.momenta is not None:
        cols += [f"p{i+1}" for i in range(d)]
    return cols


def write_ensemble_csv(E: Ensemble, path) -> list[str]:
    """Stream the ensemble to CSV, trajectory-major then time.

    Floats are written with 17 significant digits so they round-trip exactly.
    Returns the column names.
    """
    cols = ensemble_csv_header(E)
    d = E.dimension
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(E.n_traj):
            rows = []
            for j, t in enumerate(E.grid):
                vals = [f"{i:d}", f"{t:.17g}"]
                vals += [f"{x:.17g}" for x in E.positions[i, j]]
                if E.momenta is not None:
                    vals += [f"{x:.17g}" for x in E.momenta[i, j]]
                rows.append(",".join(vals))
            fh.write("\n".join(rows) + "\n")
    return cols


def read_ensemble_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data
