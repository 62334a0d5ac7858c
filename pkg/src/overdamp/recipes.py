"""Prepackaged experiment recipes behind the CLI subcommands.

Each recipe takes a validated ExperimentConfig, writes one or more CSV files
into a directory, and returns {filename: column list} so the caller can record
the full schema in the artifact manifest.

Determinism contract: within one artifact every ensemble gets the stream base
ordinal << 40 in the order the ensembles are launched, and trajectory i of an
ensemble draws only from stream (seed, stream_base + i).  Nothing depends on
worker count or scheduling, so re-running any recipe with the same config and
seed reproduces every CSV byte for byte.

Grid planning: comparison recipes record quarter times {T/4, T/2, 3T/4, T},
so the step count is rounded up to a multiple of four (the effective step
dt_eff = T/n only shrinks).  Estimation recipes that integrate or take suprema
over time record every step unless the config pins an output stride.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .corrector import generator_gap_closed, generator_gap_direct, residual_R1
from .diagnostics import (
    LadderSpec,
    WeakErrorTable,
    _write_rows,
    ka_modulus,
    ladder_statistic,
    make_overdamped_generator,
    moment_report,
    rest_term_report,
    weak_error,
)
from .integrators import (
    LANGEVIN,
    OVERDAMPED,
    ScalingParams,
    simulate_ensemble,
    write_ensemble_csv,
)
from .potentials import (
    CrystalPotential,
    Potential,
    sup_grad_distance,
    sup_hessian_norm,
)
from .rng import make_stream

REFERENCE_EPS = 0.0  # eps column value marking overdamped-reference rows
LADDER_REF_SPACING = 5e-3  # reference output spacing for time integrals


def _quarter_plan(T: float, dt: float) -> tuple[int, int]:
    """Step count (multiple of 4) and stride recording exactly the quarters."""
    n0 = max(1, math.ceil(T / dt - 1e-9))
    n = 4 * math.ceil(n0 / 4)
    return n, n // 4


def _quarters(T: float) -> list[float]:
    return [0.25 * T, 0.5 * T, 0.75 * T, T]


def _largest_divisor_at_most(n: int, cap: int) -> int:
    best = 1
    for d in range(1, min(n, max(1, cap)) + 1):
        if n % d == 0:
            best = d
    return best


def _stride(cfg: ExperimentConfig, auto: int) -> int:
    return auto if cfg.stride == "auto" else int(cfg.stride)


def _base_potential(cfg: ExperimentConfig) -> Potential:
    return Potential(cfg.potential, label="V")


def _crystal_potential(cfg: ExperimentConfig, eps: float, alpha=None) -> CrystalPotential:
    rule = cfg.crystal
    if alpha is None:
        alpha = rule.alpha.value(eps)
    return CrystalPotential(cfg.potential, rule.chi, alpha, rule.k.value(eps))


def _eps_potential(cfg: ExperimentConfig, eps: float):
    if cfg.crystal is None:
        return _base_potential(cfg)
    return _crystal_potential(cfg, eps)


def _need_observables(cfg: ExperimentConfig, what: str):
    if not cfg.observables:
        raise ConfigError([f"{what}: the config declares no [observables]"])


def _langevin(cfg: ExperimentConfig, eps: float, ordinal: int, workers: int,
              *, stride: int | None = None, n_steps: int | None = None,
              record_momenta: bool = False):
    dt = cfg.dt_for(eps) if n_steps is None else cfg.T / n_steps
    params = ScalingParams(eps=eps, beta=cfg.beta, dt=dt, T=cfg.T)
    return simulate_ensemble(
        LANGEVIN, _eps_potential(cfg, eps), params, cfg.n_traj, cfg.seed,
        q0=cfg.q0, p0=cfg.p0_for(eps), output_stride=stride,
        record_momenta=record_momenta, workers=workers,
        stream_base=ordinal << 40)


def _reference(cfg: ExperimentConfig, ordinal: int, workers: int, stride: int,
               n_steps: int | None = None):
    dt = cfg.ref_dt if n_steps is None else cfg.T / n_steps
    params = ScalingParams(eps=1.0, beta=cfg.beta, dt=dt, T=cfg.T)
    return simulate_ensemble(
        OVERDAMPED, _base_potential(cfg), params, cfg.n_traj, cfg.seed,
        q0=cfg.q0, output_stride=stride, workers=workers,
        stream_base=ordinal << 40)


# -- simulate ------------------------------------------------------------------


def run_simulate(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Dump raw trajectories: one file per eps plus the overdamped reference."""
    schema = {}
    for i, eps in enumerate(cfg.eps_list):
        n0 = max(1, math.ceil(cfg.T / cfg.dt_for(eps) - 1e-9))
        E = _langevin(cfg, eps, i, workers,
                      stride=_stride(cfg, max(1, n0 // 100)),
                      record_momenta=True)
        name = f"langevin_eps_{eps:g}.csv"
        schema[name] = write_ensemble_csv(E, out / name)
    n_ref = max(1, math.ceil(cfg.T / cfg.ref_dt - 1e-9))
    ref = _reference(cfg, len(cfg.eps_list), workers,
                     _stride(cfg, max(1, n_ref // 100)))
    schema["overdamped_reference.csv"] = write_ensemble_csv(
        ref, out / "overdamped_reference.csv")
    return schema


# -- residuals -----------------------------------------------------------------


def run_residuals(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Pointwise corrector residuals over a random phase-point sample.

    R2 is evaluated along both routes (direct generator difference and the
    closed form) so the file itself witnesses their agreement.
    """
    _need_observables(cfg, "residuals")
    name, _, f = cfg.observables[0]
    d = cfg.dimension
    V = _base_potential(cfg)
    gen = make_stream(cfg.seed, 0)
    header = (["eps"] + [f"q{i+1}" for i in range(d)]
              + [f"p{i+1}" for i in range(d)]
              + ["R1", "R2_direct", "R2_closed"])
    rows = []
    for eps in cfg.eps_list:
        V_eps = _eps_potential(cfg, eps)
        q = gen.random((cfg.residual_samples, d))
        p = gen.standard_normal((cfg.residual_samples, d)) / math.sqrt(cfg.beta)
        r1 = residual_R1(f, eps, q, p)
        direct = np.abs(generator_gap_direct(f, V, V_eps, eps, cfg.beta, q, p))
        closed = np.abs(generator_gap_closed(f, V, V_eps, eps, cfg.beta, q, p))
        for j in range(cfg.residual_samples):
            rows.append([eps, *map(float, q[j]), *map(float, p[j]),
                         float(r1[j]), float(direct[j]), float(closed[j])])
    _write_rows(out / "residuals.csv", header, rows)
    return {"residuals.csv": header}


# -- converge ------------------------------------------------------------------


def run_converge(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Weak error of the Langevin position marginal against the overdamped
    reference at quarter times, one row per (eps, f, t)."""
    _need_observables(cfg, "converge")
    fs = [(n, f) for n, _, f in cfg.observables]
    times = _quarters(cfg.T)
    n_ref, stride_ref = _quarter_plan(cfg.T, cfg.ref_dt)
    ref = _reference(cfg, 0, workers, stride_ref, n_steps=n_ref)
    rows = []
    for i, eps in enumerate(cfg.eps_list):
        n, stride = _quarter_plan(cfg.T, cfg.dt_for(eps))
        E = _langevin(cfg, eps, i + 1, workers, stride=stride, n_steps=n)
        tab = weak_error(E, ref, fs, times)
        rows.extend(tab.rows)
    table = WeakErrorTable(tuple(rows))
    header = table.write_csv(out / "weak_error.csv")
    _print_converge_slope(table)
    return {"weak_error.csv": header}


def _print_converge_slope(table: WeakErrorTable) -> None:
    # observed rate only; the limit theorem carries no rate to assert against
    final = max(r.time for r in table.rows)
    per_eps = {}
    for r in table.rows:
        if r.time == final:
            per_eps.setdefault(r.eps, []).append(abs(r.estimate))
    if len(per_eps) < 2:
        return
    eps = sorted(per_eps, reverse=True)
    err = [max(per_eps[e]) for e in eps]
    if min(err) <= 0.0:
        return
    slope = np.polyfit(np.log(eps), np.log(err), 1)[0]
    pairs = ", ".join(f"{e:g}: {x:.3e}" for e, x in zip(eps, err))
    print(f"max weak error at t={final:g} by eps: {pairs}")
    print(f"observed log-log slope: {slope:.2f} (reported, not asserted)")


# -- moments -------------------------------------------------------------------


def run_moments(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Momentum moment curves E|P_t|^(2 gamma) with grid and pathwise suprema."""
    header = ["eps", "gamma", "t", "moment", "se",
              "sup_over_grid", "mean_sup", "mean_sup_se"]
    rows = []
    for i, eps in enumerate(cfg.eps_list):
        E = _langevin(cfg, eps, i, workers, stride=_stride(cfg, 1),
                      record_momenta=True)
        for gamma in cfg.gammas:
            rep = moment_report(E, gamma)
            for t in E.grid:
                est, se = rep.per_time[float(t)]
                rows.append([eps, gamma, float(t), est, se,
                             rep.sup_over_grid, rep.mean_sup, rep.mean_sup_se])
    _write_rows(out / "moments.csv", header, rows)
    return {"moments.csv": header}


# -- ladder --------------------------------------------------------------------


def run_ladder(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Martingale-ladder statistic on the overdamped reference and on each
    Langevin ensemble; the limit theorem predicts a vanishing statistic."""
    if cfg.ladder is None:
        raise ConfigError(["ladder: the config has no [ladder] section"])
    _need_observables(cfg, "ladder")
    spec = LadderSpec(cfg.ladder.times,
                      tuple(cfg.observable(n) for n in cfg.ladder.phi_names),
                      cfg.observable(cfg.ladder.f_name))
    L = make_overdamped_generator(_base_potential(cfg), cfg.beta)

    n0 = max(1, math.ceil(cfg.T / cfg.ref_dt - 1e-9))
    n_ref = 4 * ((n0 + 3) // 4)
    # stride must divide n_ref/4 so quarter-of-T ladder times stay recorded
    target = int(LADDER_REF_SPACING * n_ref / cfg.T + 1e-9)
    stride_ref = _largest_divisor_at_most(n_ref // 4, target)
    ref = _reference(cfg, 0, workers, stride_ref, n_steps=n_ref)
    _check_times_on_grid(ref.grid, spec.times, "ladder")

    header = ["ensemble", "eps", "estimate", "se"]
    est, se = ladder_statistic(ref, spec, L)
    rows = [["overdamped", REFERENCE_EPS, est, se]]
    for i, eps in enumerate(cfg.eps_list):
        n, _ = _quarter_plan(cfg.T, cfg.dt_for(eps))
        E = _langevin(cfg, eps, i + 1, workers, stride=_stride(cfg, 1),
                      n_steps=n)
        _check_times_on_grid(E.grid, spec.times, "ladder")
        est, se = ladder_statistic(E, spec, L)
        rows.append(["langevin", eps, est, se])
    _write_rows(out / "ladder.csv", header, rows)
    return {"ladder.csv": header}


def _check_times_on_grid(grid, times, what: str) -> None:
    bad = [t for t in times
           if np.min(np.abs(grid - t)) > 1e-9 * max(1.0, abs(t))]
    if bad:
        raise ConfigError(
            [f"{what}: times {bad} do not land on the simulation grid; "
             "use multiples of T/4 or adjust dt/stride"])


# -- modulus -------------------------------------------------------------------


def run_modulus(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Kurtz-Aldous-style tightness modulus of the Langevin family."""
    if cfg.modulus_deltas is None:
        raise ConfigError(["modulus: the config has no [modulus] section"])
    f = cfg.observable(cfg.modulus_f)
    header = ["eps", "delta", "modulus", "se", "t_at_max", "h_at_max"]
    rows = []
    for i, eps in enumerate(cfg.eps_list):
        E = _langevin(cfg, eps, i, workers, stride=_stride(cfg, 1))
        rep = ka_modulus(E, f, cfg.modulus_deltas)
        for pt in rep.points:
            rows.append([eps, pt.delta, pt.estimate, pt.se, pt.t_start, pt.lag])
    _write_rows(out / "modulus.csv", header, rows)
    return {"modulus.csv": header}


# -- rest-terms ----------------------------------------------------------------


def run_rest_terms(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Pathwise rest-term statistics E[sup R1] and E[int R2 dt] per eps."""
    _need_observables(cfg, "rest-terms")
    _, _, f = cfg.observables[0]
    V = _base_potential(cfg)
    header = ["eps", "sup_R1", "sup_R1_se", "int_R2", "int_R2_se"]
    rows = []
    for i, eps in enumerate(cfg.eps_list):
        E = _langevin(cfg, eps, i, workers, stride=_stride(cfg, 1),
                      record_momenta=True)
        rep = rest_term_report(E, f, V, _eps_potential(cfg, eps))
        rows.append([eps, rep.sup_r1, rep.sup_r1_se, rep.int_r2, rep.int_r2_se])
    _write_rows(out / "rest_terms.csv", header, rows)
    return {"rest_terms.csv": header}


# -- crystal -------------------------------------------------------------------


def run_crystal(cfg: ExperimentConfig, out: Path, workers: int) -> dict:
    """Oscillating-potential example in two regimes.

    regime "rule": alpha and k follow the configured rules, so the gradient
    distance alpha*k*sup|grad chi| vanishes with eps and the overdamped limit
    with the unperturbed V applies.  regime "contrast": alpha = 1/k, holding
    alpha*k fixed at 1, where the perturbation does not fade.  Both weak-error
    curves are measured against the same V-only overdamped reference, with the
    gradient-distance and curvature diagnostics recomputed from the potential
    objects rather than from the closed-form rule.
    """
    if cfg.crystal is None:
        raise ConfigError(["crystal: the config has no [crystal] section"])
    _need_observables(cfg, "crystal")
    fs = [(cfg.observables[0][0], cfg.observables[0][2])]
    times = [cfg.T]
    V = _base_potential(cfg)
    chi_hess = sup_hessian_norm(cfg.crystal.chi)

    n_ref, stride_ref = _quarter_plan(cfg.T, cfg.ref_dt)
    ref = _reference(cfg, 0, workers, stride_ref, n_steps=n_ref)

    header = ["regime", "eps", "alpha", "k", "sup_grad_distance",
              "curvature_scale", "f", "t", "estimate", "se"]
    rows = []
    ordinal = 1
    for regime in ("rule", "contrast"):
        for eps in cfg.eps_list:
            k = cfg.crystal.k.value(eps)
            alpha = cfg.crystal.alpha.value(eps) if regime == "rule" else 1.0 / k
            V_eps = _crystal_potential(cfg, eps, alpha=alpha)
            n, stride = _quarter_plan(cfg.T, cfg.dt_for(eps))
            params = ScalingParams(eps=eps, beta=cfg.beta, dt=cfg.T / n, T=cfg.T)
            E = simulate_ensemble(
                LANGEVIN, V_eps, params, cfg.n_traj, cfg.seed,
                q0=cfg.q0, p0=cfg.p0_for(eps), output_stride=stride,
                workers=workers, stream_base=ordinal << 40)
            ordinal += 1
            tab = weak_error(E, ref, fs, times)
            dist = sup_grad_distance(V_eps, V)
            for r in tab.rows:
                rows.append([regime, eps, alpha, k, dist,
                             alpha * k * k * chi_hess,
                             r.label, r.time, r.estimate, r.se])
    _write_rows(out / "crystal.csv", header, rows)
    return {"crystal.csv": header}


RECIPES = {
    "simulate": run_simulate,
    "residuals": run_residuals,
    "converge": run_converge,
    "moments": run_moments,
    "ladder": run_ladder,
    "modulus": run_modulus,
    "rest-terms": run_rest_terms,
    "crystal": run_crystal,
}
