"""Figure rendering for recipe artifacts.

Each recipe directory gets one figure.png summarizing its CSV output.  Figures
are rendered from the CSV files, not from in-memory state, so the plot always
reflects exactly what was written.  The Agg backend keeps rendering headless,
and the PNG metadata is pinned so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_NAME = "figure.png"
_SAVE_OPTS = {"dpi": 120, "metadata": {"Software": "overdamp"}}


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, directory: Path) -> None:
    fig.tight_layout()
    fig.savefig(directory / FIGURE_NAME, **_SAVE_OPTS)
    plt.close(fig)


def _floats(rows, key):
    return [float(r[key]) for r in rows]


def render_simulate(directory: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for path in sorted(directory.glob("langevin_eps_*.csv")):
        rows = _read(path)
        label = path.stem.replace("langevin_eps_", "eps=")
        shown = 0
        by_traj = defaultdict(list)
        for r in rows:
            by_traj[r["traj"]].append((float(r["t"]), float(r["q1"])))
        for traj in sorted(by_traj, key=int)[:3]:
            pts = by_traj[traj]
            ax.plot([t for t, _ in pts], [q for _, q in pts], lw=0.8,
                    label=label if shown == 0 else None)
            shown += 1
    ax.set_xlabel("t")
    ax.set_ylabel("q1 (wrapped)")
    ax.set_title("sample trajectories")
    ax.legend(fontsize=8)
    _save(fig, directory)


def render_residuals(directory: Path) -> None:
    rows = _read(directory / "residuals.csv")
    by_eps = defaultdict(lambda: ([], []))
    for r in rows:
        by_eps[float(r["eps"])][0].append(float(r["R1"]))
        by_eps[float(r["eps"])][1].append(float(r["R2_closed"]))
    eps = sorted(by_eps)
    mean = lambda xs: sum(xs) / len(xs)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(eps, [mean(by_eps[e][0]) for e in eps], "o-", label="mean R1")
    ax.loglog(eps, [mean(by_eps[e][1]) for e in eps], "s-", label="mean R2")
    ax.set_xlabel("eps")
    ax.set_ylabel("residual")
    ax.set_title("corrector residuals over sampled phase points")
    ax.legend()
    _save(fig, directory)


def render_converge(directory: Path) -> None:
    rows = _read(directory / "weak_error.csv")
    final = max(float(r["t"]) for r in rows)
    by_f = defaultdict(lambda: ([], [], []))
    for r in rows:
        if float(r["t"]) == final:
            by_f[r["f"]][0].append(float(r["eps"]))
            by_f[r["f"]][1].append(abs(float(r["estimate"])))
            by_f[r["f"]][2].append(float(r["se"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (eps, err, se) in sorted(by_f.items()):
        ax.errorbar(eps, err, yerr=[2 * s for s in se], marker="o",
                    capsize=3, label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel(f"|E f(Q_t) difference| at t={final:g}")
    ax.set_title("weak error vs overdamped reference (2 SE bars)")
    ax.legend()
    _save(fig, directory)


def render_moments(directory: Path) -> None:
    rows = _read(directory / "moments.csv")
    by_group = defaultdict(lambda: ([], []))
    for r in rows:
        key = (float(r["eps"]), float(r["gamma"]))
        by_group[key][0].append(float(r["t"]))
        by_group[key][1].append(float(r["moment"]))
    fig, ax = plt.subplots(figsize=(7, 4))
    for (eps, gamma), (ts, ms) in sorted(by_group.items()):
        ax.plot(ts, ms, lw=1.0, label=f"eps={eps:g}, gamma={gamma:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("E |P_t|^(2 gamma)")
    ax.set_title("momentum moments along the grid")
    ax.legend(fontsize=8)
    _save(fig, directory)


def render_ladder(directory: Path) -> None:
    rows = _read(directory / "ladder.csv")
    labels = []
    for r in rows:
        eps = float(r["eps"])
        labels.append(r["ensemble"] if eps == 0.0 else f"eps={eps:g}")
    est = _floats(rows, "estimate")
    se = _floats(rows, "se")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(range(len(rows)), est, yerr=[3 * s for s in se], fmt="o",
                capsize=4)
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xticks(range(len(rows)), labels, rotation=20)
    ax.set_ylabel("ladder statistic (3 SE bars)")
    ax.set_title("martingale-ladder identification")
    _save(fig, directory)


def render_modulus(directory: Path) -> None:
    rows = _read(directory / "modulus.csv")
    by_eps = defaultdict(lambda: ([], []))
    for r in rows:
        by_eps[float(r["eps"])][0].append(float(r["delta"]))
        by_eps[float(r["eps"])][1].append(float(r["modulus"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for eps, (ds, ms) in sorted(by_eps.items()):
        ax.loglog(ds, ms, "o-", label=f"eps={eps:g}")
    ax.set_xlabel("delta")
    ax.set_ylabel("max E (f(Q_{t+h}) - f(Q_t))^2,  h <= delta")
    ax.set_title("tightness modulus")
    ax.legend()
    _save(fig, directory)


def render_rest_terms(directory: Path) -> None:
    rows = _read(directory / "rest_terms.csv")
    eps = _floats(rows, "eps")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(eps, _floats(rows, "sup_R1"), "o-", label="E sup R1")
    ax.loglog(eps, _floats(rows, "int_R2"), "s-", label="E int R2 dt")
    ax.set_xlabel("eps")
    ax.set_ylabel("rest term estimate")
    ax.set_title("pathwise rest terms")
    ax.legend()
    _save(fig, directory)


def render_crystal(directory: Path) -> None:
    rows = _read(directory / "crystal.csv")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for regime, marker in (("rule", "o"), ("contrast", "s")):
        sub = [r for r in rows if r["regime"] == regime]
        eps = _floats(sub, "eps")
        ax1.loglog(eps, [abs(float(r["estimate"])) for r in sub],
                   marker + "-", label=regime)
        ax2.loglog(eps, _floats(sub, "sup_grad_distance"), marker + "-",
                   label=regime)
    ax1.set_xlabel("eps")
    ax1.set_ylabel("|weak error| at t=T")
    ax1.set_title("crystal vs plain overdamped limit")
    ax1.legend()
    ax2.set_xlabel("eps")
    ax2.set_ylabel("sup |grad V_eps - grad V|")
    ax2.set_title("gradient distance")
    ax2.legend()
    _save(fig, directory)


RENDERERS = {
    "simulate": render_simulate,
    "residuals": render_residuals,
    "converge": render_converge,
    "moments": render_moments,
    "ladder": render_ladder,
    "modulus": render_modulus,
    "rest-terms": render_rest_terms,
    "crystal": render_crystal,
}


def render(command: str, directory: Path) -> None:
    RENDERERS[command](Path(directory))
