"""Statistical estimators over recorded ensembles.

Everything here is a read-only reduction of an Ensemble: momentum-moment
tracking, weak-error tables between a scaled ensemble and an overdamped
reference, the martingale-ladder statistic, the tightness modulus, and the
expectations of the corrector rest terms.  Estimators report plain standard
errors of the mean; trajectories are independent by construction.

Continuous-time suprema are approximated by maxima over the recorded grid
(lower bounds, tightest at output stride 1), and time integrals use the
trapezoid rule on the recorded grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corrector import apply_overdamped_generator, residual_R1, residual_R2
from .fourier import FourierFunction
from .integrators import Ensemble

GRID_MATCH_TOL = 1e-9

# chunk size (in floats of the largest intermediate) for batched reductions
REDUCE_CHUNK_FLOATS = 20_000_000


def _mean_se(values: np.ndarray, axis=0) -> tuple[np.ndarray, np.ndarray]:
    n = values.shape[axis]
    mean = values.mean(axis=axis)
    if n > 1:
        se = values.std(axis=axis, ddof=1) / np.sqrt(n)
    else:
        se = np.zeros_like(mean)
    return mean, se


def _grid_indices(grid: np.ndarray, times) -> np.ndarray:
    """Index of each requested time on the grid, or ValueError if absent."""
    grid = np.asarray(grid)
    out = np.empty(len(times), dtype=np.int64)
    for j, t in enumerate(times):
        i = int(np.argmin(np.abs(grid - t)))
        if abs(grid[i] - t) > GRID_MATCH_TOL:
            raise ValueError(f"time {t} is not on the ensemble grid")
        out[j] = i
    return out


def _labeled(fs) -> list[tuple[str, FourierFunction]]:
    items = []
    for i, entry in enumerate(fs):
        if isinstance(entry, FourierFunction):
            items.append((f"f{i}", entry))
        else:
            label, f = entry
            items.append((str(label), f))
    return items


def _write_rows(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v
                             for v in row])


# -- Hamiltonian ------------------------------------------------------------------


def hamiltonian(q, p, V_eps) -> np.ndarray:
    """H(q, p) = |p|^2 / 2 + V_eps(q).

    Nonnegative when V_eps has been shifted to minimum zero, which is the
    caller's responsibility (see shift_to_zero_min).
    """
    p = np.asarray(p, dtype=np.float64)
    return 0.5 * np.sum(p * p, axis=-1) + V_eps.value(q)


# -- momentum moments ---------------------------------------------------------------


@dataclass(frozen=True)
class MomentReport:
    """Empirical momentum moments of one ensemble.

    per_time maps each grid time to (estimate of E|P_t|^(2 gamma), SE);
    sup_over_grid is the largest per-time estimate; mean_sup estimates
    E[sup_t |P_t|^2] by averaging trajectory-wise grid maxima.
    """

    gamma: float
    per_time: dict
    sup_over_grid: float
    mean_sup: float
    mean_sup_se: float

    def write_csv(self, path) -> list[str]:
        rows = [(t, est, se) for t, (est, se) in self.per_time.items()]
        header = ["t", "moment", "se"]
        _write_rows(path, header, rows)
        return header


def moment_report(E: Ensemble, gamma: float) -> MomentReport:
    if E.momenta is None:
        raise ValueError("moment_report requires an ensemble recorded with momenta")
    if not gamma >= 1.0:
        raise ValueError("gamma must be >= 1")
    psq = np.einsum("nmd,nmd->nm", E.momenta, E.momenta)
    vals = psq if gamma == 1.0 else psq**gamma
    est, se = _mean_se(vals, axis=0)
    per_time = {float(t): (float(est[j]), float(se[j]))
                for j, t in enumerate(E.grid)}
    sup_mean, sup_se = _mean_se(psq.max(axis=1))
    return MomentReport(gamma=float(gamma), per_time=per_time,
                        sup_over_grid=float(est.max()),
                        mean_sup=float(sup_mean), mean_sup_se=float(sup_se))


# -- weak error ----------------------------------------------------------------------


@dataclass(frozen=True)
class WeakErrorRow:
    eps: float
    label: str
    time: float
    estimate: float
    se: float


@dataclass(frozen=True)
class WeakErrorTable:
    rows: tuple

    def write_csv(self, path) -> list[str]:
        header = ["eps", "f", "t", "estimate", "se"]
        _write_rows(path, header,
                    [(r.eps, r.label, r.time, r.estimate, r.se) for r in self.rows])
        return header


def weak_error(E_eps: Ensemble, E_ref: Ensemble, fs, times) -> WeakErrorTable:
    """E f(Q^eps_t) - E f(Q_t) per test function and time, with pooled SE.

    Estimates are plain differences of ensemble means; the pooled SE is
    sqrt(SE_eps^2 + SE_ref^2).  Swapping the ensembles negates every estimate
    exactly and leaves the SEs unchanged.
    """
    idx_e = _grid_indices(E_eps.grid, times)
    idx_r = _grid_indices(E_ref.grid, times)
    rows = []
    eps = float(E_eps.params.eps)
    for label, f in _labeled(fs):
        vals_e = f.value(E_eps.positions[:, idx_e, :])
        vals_r = f.value(E_ref.positions[:, idx_r, :])
        mean_e, se_e = _mean_se(vals_e, axis=0)
        mean_r, se_r = _mean_se(vals_r, axis=0)
        pooled = np.sqrt(se_e**2 + se_r**2)
        for j, t in enumerate(times):
            rows.append(WeakErrorRow(eps, label, float(t),
                                     float(mean_e[j] - mean_r[j]),
                                     float(pooled[j])))
    return WeakErrorTable(tuple(rows))


# -- martingale ladder ----------------------------------------------------------------


@dataclass(frozen=True)
class LadderSpec:
    """Times t_1 <= ... <= t_{p+1}, window observables phi_1..phi_p, and f.

    The statistic is the expectation of

        (f(Q_{t_{p+1}}) - f(Q_{t_p}) - int_{t_p}^{t_{p+1}} Lf(Q_s) ds)
            * phi_1(Q_{t_1}) ... phi_p(Q_{t_p}),

    which vanishes for every choice of window exactly when the martingale
    property of f(Q_t) - int Lf ds holds against cylinder functions.
    """

    times: tuple
    observables: tuple
    f: FourierFunction

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observables", tuple(self.observables))
        if len(times) < 2:
            raise ValueError("a ladder needs at least two times")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("ladder times must be nondecreasing")
        if len(self.observables) != len(times) - 1:
            raise ValueError("need exactly one observable per ladder time "
                             "t_1..t_p")


def make_overdamped_generator(V, beta: float):
    """Closure q -> Lf(q) for the limit generator with fixed V and beta."""
    def apply(f: FourierFunction, q):
        return apply_overdamped_generator(f, V, beta, q)
    return apply


def ladder_statistic(E: Ensemble, spec: LadderSpec, L_apply) -> tuple[float, float]:
    """Ensemble mean and SE of the windowed martingale defect."""
    if spec.times[-1] > float(E.grid[-1]) + GRID_MATCH_TOL:
        raise ValueError("ladder times must not exceed the recorded horizon")
    idx = _grid_indices(E.grid, spec.times)
    i_lo, i_hi = int(idx[-2]), int(idx[-1])
    f = spec.f
    increment = (f.value(E.positions[:, i_hi, :])
                 - f.value(E.positions[:, i_lo, :]))
    if i_hi > i_lo:
        seg = E.positions[:, i_lo:i_hi + 1, :]
        lf = L_apply(f, seg)
        integral = np.trapezoid(lf, x=E.grid[i_lo:i_hi + 1], axis=1)
    else:
        integral = np.zeros(E.n_traj)
    window = np.ones(E.n_traj)
    for k, phi in enumerate(spec.observables):
        window = window * phi.value(E.positions[:, idx[k], :])
    mean, se = _mean_se((increment - integral) * window)
    return float(mean), float(se)


# -- tightness modulus -----------------------------------------------------------------


@dataclass(frozen=True)
class ModulusPoint:
    delta: float
    estimate: float
    se: float
    t_start: float
    lag: float


@dataclass(frozen=True)
class ModulusReport:
    points: tuple

    def write_csv(self, path) -> list[str]:
        header = ["delta", "modulus", "se", "t_at_max", "h_at_max"]
        _write_rows(path, header,
                    [(p.delta, p.estimate, p.se, p.t_start, p.lag)
                     for p in self.points])
        return header


def ka_modulus(E: Ensemble, f: FourierFunction, deltas, T=None) -> ModulusReport:
    """sup over grid pairs (t, t+h), h <= delta, of E[(f(Q_{t+h}) - f(Q_t))^2].

    The conditional expectation of the tightness criterion is proxied by the
    unconditional second moment, maximized over admissible start times; the
    SE is reported at the maximizing pair.  Requires a uniform grid.
    """
    horizon = float(E.params.T) if T is None else float(T)
    deltas = [float(dl) for dl in deltas]
    if any(dl <= 0 or dl >= horizon for dl in deltas):
        raise ValueError("each delta must lie strictly between 0 and the horizon")
    steps = np.diff(E.grid)
    if len(steps) == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ValueError("the tightness modulus requires a uniform output grid")
    dt_out = float(steps[0])
    fvals = f.value(E.positions)
    n, m = fvals.shape
    max_lag = min(m - 1, int(np.floor(max(deltas) / dt_out + 1e-9)))
    best = {}  # lag -> (per-start estimates,)
    for lag in range(1, max_lag + 1):
        diff = fvals[:, lag:] - fvals[:, :-lag]
        best[lag] = np.mean(diff * diff, axis=0)
    points = []
    for dl in sorted(deltas):
        lag_limit = min(m - 1, int(np.floor(dl / dt_out + 1e-9)))
        est, at = 0.0, (0, 0)
        for lag in range(1, lag_limit + 1):
            j = int(np.argmax(best[lag]))
            if best[lag][j] > est:
                est, at = float(best[lag][j]), (j, lag)
        if at == (0, 0) and est == 0.0:
            points.append(ModulusPoint(dl, 0.0, 0.0, 0.0, 0.0))
            continue
        j, lag = at
        col = fvals[:, j + lag] - fvals[:, j]
        _, se = _mean_se(col * col)
        points.append(ModulusPoint(dl, est, float(se),
                                   float(E.grid[j]), lag * dt_out))
    return ModulusReport(tuple(points))


# -- rest terms ------------------------------------------------------------------------


@dataclass(frozen=True)
class RestTermReport:
    """E[sup_t R1] and E[int_0^T R2 dt] with standard errors."""

    eps: float
    sup_r1: float
    sup_r1_se: float
    int_r2: float
    int_r2_se: float

    def write_csv(self, path) -> list[str]:
        header = ["eps", "sup_R1", "sup_R1_se", "int_R2", "int_R2_se"]
        _write_rows(path, header,
                    [(self.eps, self.sup_r1, self.sup_r1_se,
                      self.int_r2, self.int_r2_se)])
        return header


def rest_term_report(E: Ensemble, f: FourierFunction, V, V_eps) -> RestTermReport:
    """Trajectory-wise sup of R1 and trapezoid integral of R2, averaged.

    Work is chunked over trajectories so the third-derivative intermediates
    stay bounded in memory.
    """
    if E.momenta is None:
        raise ValueError("rest terms require an ensemble recorded with momenta")
    eps = float(E.params.eps)
    beta = float(E.params.beta)
    n, m, d = E.positions.shape
    chunk = max(1, REDUCE_CHUNK_FLOATS // max(1, m * d**3 * 8))
    sup_r1 = np.empty(n)
    int_r2 = np.empty(n)
    grid = np.asarray(E.grid)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        q = E.positions[lo:hi]
        p = E.momenta[lo:hi]
        r1 = residual_R1(f, eps, q, p)
        r2 = residual_R2(f, V, V_eps, eps, beta, q, p)
        sup_r1[lo:hi] = r1.max(axis=1)
        int_r2[lo:hi] = np.trapezoid(r2, x=grid, axis=1)
    m1, s1 = _mean_se(sup_r1)
    m2, s2 = _mean_se(int_r2)
    return RestTermReport(eps=eps, sup_r1=float(m1), sup_r1_se=float(s1),
                          int_r2=float(m2), int_r2_se=float(s2))
