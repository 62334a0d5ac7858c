"""Experiment configuration files.

Flat INI text with typed sections; every key is validated and unknown keys or
sections are rejected so a misspelled option can never be silently ignored.
Parsing collects every violation before failing, and serialize/parse round-trip
to an equal config.

Function-valued keys use a small expression grammar over finite Fourier sums:

    expr  := term (('+' | '-') term)*
    term  := [NUMBER '*'] atom
    atom  := cos(k1,...,kd) | sin(k1,...,kd) | const(c) | file(path)

cos/sin take an integer wave vector of the experiment dimension, const is a
constant offset, and file reads a coefficient table in the to_text format of
FourierFunction (path relative to the config file).  eps-dependent scalar
keys (dt, crystal alpha/k, gaussian momentum scale) use the forms
NUMBER | NUMBER*eps^NUMBER | eps^NUMBER, plus key-specific keywords documented
below.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .fourier import FourierFunction, from_text
from .integrators import (
    GaussianMomentum,
    PointStart,
    UniformStart,
    ZeroMomentum,
    default_langevin_dt,
)

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_POWER_RE = re.compile(rf"^(?:({_NUM})\s*\*\s*)?eps\^({_NUM})$")
_TERM_RE = re.compile(
    rf"^(?:({_NUM})\s*\*\s*)?(cos|sin|const|file)\s*\((.*)\)$", re.DOTALL)

SECTIONS = {
    "experiment": {"dimension", "beta", "T", "eps", "n_traj", "seed",
                   "dt", "ref_dt"},
    "potential": {"V"},
    "crystal": {"chi", "alpha", "k"},
    "initial": {"q0", "p0"},
    "observables": None,  # free-form: every key names a test function
    "ladder": {"times", "phis", "f"},
    "modulus": {"deltas", "f"},
    "moments": {"gammas"},
    "residuals": {"n_samples"},
    "output": {"stride"},
}

REQUIRED = {"experiment": {"dimension", "beta", "T", "eps", "n_traj", "seed"},
            "potential": {"V"},
            "crystal": {"chi", "alpha", "k"}}

# hypothesis on the initial momenta: eps * E|P_0|^3 -> 0, which for a Gaussian
# scale c*eps^a means a > -1/3
HEAVY_TAIL_BOUNDARY = -1.0 / 3.0


class ConfigError(ValueError):
    """All collected violations of one config file."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("invalid config:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class PowerLaw:
    """coef * eps^power, the scalar rule family for eps-dependent settings."""

    coef: float
    power: float

    def value(self, eps: float) -> float:
        return self.coef * eps**self.power


def _parse_power_law(raw: str, field: str, errors) -> PowerLaw | None:
    raw = raw.strip()
    m = _POWER_RE.match(raw)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        return PowerLaw(coef, float(m.group(2)))
    try:
        return PowerLaw(float(raw), 0.0)
    except ValueError:
        errors.append(f"{field}: expected NUMBER or [NUMBER*]eps^NUMBER, got {raw!r}")
        return None


@dataclass(frozen=True)
class TableRule:
    """Explicit eps -> value lookup for settings with no closed-form rule."""

    entries: tuple  # of (eps, value) pairs

    def value(self, eps: float):
        for e, v in self.entries:
            if abs(e - eps) <= 1e-12:
                return v
        raise KeyError(f"no table entry for eps={eps!r}")


_TABLE_RE = re.compile(r"^table\((.*)\)$", re.DOTALL)


def _parse_table(raw: str, field: str, errors, integer: bool = False):
    body = _TABLE_RE.match(raw).group(1)
    entries = []
    for pair in body.split(","):
        if ":" not in pair:
            errors.append(f"{field}: table entries look like eps: value, got {pair.strip()!r}")
            continue
        e_raw, v_raw = pair.split(":", 1)
        try:
            e = float(e_raw)
            v = int(v_raw) if integer else float(v_raw)
        except ValueError:
            errors.append(f"{field}: bad table entry {pair.strip()!r}")
            continue
        entries.append((e, v))
    if not entries:
        errors.append(f"{field}: empty table")
        return None
    return TableRule(tuple(entries))


@dataclass(frozen=True)
class DtRule:
    """Step-size rule: 'auto' (0.1 eps^2 capped at 1e-3) or a power law."""

    raw: str
    law: PowerLaw | None  # None means auto

    def value(self, eps: float) -> float:
        if self.law is None:
            return default_langevin_dt(eps)
        return self.law.value(eps)


@dataclass(frozen=True)
class KRule:
    """Crystal frequency rule: fixed integer, explicit table, or ceil of a
    power law."""

    raw: str
    law: PowerLaw | None
    fixed: int | None
    table: TableRule | None = None

    def value(self, eps: float) -> int:
        if self.table is not None:
            return self.table.value(eps)
        if self.fixed is not None:
            return self.fixed
        return max(1, math.ceil(self.law.value(eps) - 1e-12))


@dataclass(frozen=True)
class MomentumRule:
    """Initial momentum law: zero, stationary Gaussian, or scaled Gaussian."""

    raw: str
    kind: str  # zero | stationary | gaussian
    law: PowerLaw | None

    def law_for(self, eps: float, beta: float):
        if self.kind == "zero":
            return ZeroMomentum()
        if self.kind == "stationary":
            return GaussianMomentum(1.0 / math.sqrt(beta))
        return GaussianMomentum(self.law.value(eps))


@dataclass(frozen=True)
class CrystalRule:
    chi_spec: str
    chi: FourierFunction
    alpha_raw: str
    alpha: object  # PowerLaw or TableRule
    k: KRule


@dataclass(frozen=True)
class LadderConfig:
    times: tuple
    phi_names: tuple
    f_name: str


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int
    beta: float
    T: float
    eps_list: tuple
    dt: DtRule
    ref_dt: float
    n_traj: int
    seed: int
    potential_spec: str
    potential: FourierFunction
    crystal: CrystalRule | None
    q0_spec: str
    q0: object
    p0: MomentumRule
    observables: tuple  # of (name, spec, FourierFunction)
    ladder: LadderConfig | None
    modulus_deltas: tuple | None
    modulus_f: str | None
    gammas: tuple
    residual_samples: int
    stride: str

    def dt_for(self, eps: float) -> float:
        return self.dt.value(eps)

    def p0_for(self, eps: float):
        return self.p0.law_for(eps, self.beta)

    def observable(self, name: str) -> FourierFunction:
        for n, _, f in self.observables:
            if n == name:
                return f
        raise KeyError(f"no observable named {name!r}")


def _split_terms(expr: str):
    """Split on top-level +/- (sign attached), paren- and exponent-aware."""
    terms = []
    depth = 0
    sign = 1.0
    start = 0
    i = 0
    while i < len(expr):
        c = expr[i]
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth < 0:
                raise ValueError("unbalanced parentheses")
        elif c in "+-" and depth == 0:
            prev = expr[:i].rstrip()
            inside_number = (prev.endswith(("e", "E"))
                             and len(prev) >= 2 and (prev[-2].isdigit() or prev[-2] == "."))
            if not inside_number:
                if expr[start:i].strip():
                    terms.append((sign, expr[start:i]))
                    sign = 1.0
                sign *= -1.0 if c == "-" else 1.0
                start = i + 1
        i += 1
    if depth != 0:
        raise ValueError("unbalanced parentheses")
    tail = expr[start:]
    if tail.strip():
        terms.append((sign, tail))
    if not terms:
        raise ValueError("empty expression")
    return terms


def parse_function(expr: str, dimension: int, base_dir: Path | None = None) -> FourierFunction:
    """Evaluate the function grammar to a FourierFunction."""
    total = FourierFunction(dimension, [])
    for sign, term in _split_terms(expr):
        m = _TERM_RE.match(term.strip())
        if m is None:
            raise ValueError(f"cannot parse term {term.strip()!r}")
        coef = sign * (float(m.group(1)) if m.group(1) else 1.0)
        name, args = m.group(2), m.group(3).strip()
        if name in ("cos", "sin"):
            parts = [a.strip() for a in args.split(",")] if args else []
            if len(parts) != dimension:
                raise ValueError(
                    f"{name}({args}): wave vector must have {dimension} components")
            try:
                k = tuple(int(p) for p in parts)
            except ValueError:
                raise ValueError(f"{name}({args}): components must be integers")
            pair = (coef, 0.0) if name == "cos" else (0.0, coef)
            total = total + FourierFunction(dimension, {k: pair})
        elif name == "const":
            try:
                c = float(args)
            except ValueError:
                raise ValueError(f"const({args}): expected a number")
            total = total + FourierFunction(
                dimension, {(0,) * dimension: (coef * c, 0.0)})
        else:  # file
            path = Path(args.strip().strip("'\""))
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            loaded = from_text(path.read_text())
            if loaded.dimension != dimension:
                raise ValueError(
                    f"file({args}): has dimension {loaded.dimension}, expected {dimension}")
            total = total + loaded * coef
    return total


def _float_list(raw: str):
    return [float(x) for x in raw.split(",") if x.strip()]


def _get(parser, section, key, default=None):
    if parser.has_section(section) and parser.has_option(section, key):
        return parser.get(section, key).strip()
    return default


def parse_config_text(text: str, base_dir: Path | None = None,
                      allow_heavy_tails: bool = False) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    parser.optionxform = str
    errors: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"])

    for section in parser.sections():
        if section not in SECTIONS:
            errors.append(f"unknown section [{section}]")
        elif SECTIONS[section] is not None:
            for key in parser.options(section):
                if key not in SECTIONS[section]:
                    errors.append(f"unknown key {key!r} in [{section}]")
    for section, keys in REQUIRED.items():
        if section == "crystal" and not parser.has_section("crystal"):
            continue
        if not parser.has_section(section):
            errors.append(f"missing section [{section}]")
            continue
        for key in keys:
            if not parser.has_option(section, key):
                errors.append(f"missing key {key!r} in [{section}]")
    if errors and any(v.startswith("missing section") for v in errors):
        raise ConfigError(errors)

    def intval(section, key, default=None, minimum=None):
        raw = _get(parser, section, key)
        if raw is None:
            return default
        try:
            v = int(raw)
        except ValueError:
            errors.append(f"{key}: expected an integer, got {raw!r}")
            return default
        if minimum is not None and v < minimum:
            errors.append(f"{key}: must be >= {minimum}, got {v}")
        return v

    def floatval(section, key, default=None, positive=False):
        raw = _get(parser, section, key)
        if raw is None:
            return default
        try:
            v = float(raw)
        except ValueError:
            errors.append(f"{key}: expected a number, got {raw!r}")
            return default
        if positive and not v > 0:
            errors.append(f"{key}: must be positive, got {v}")
        return v

    dimension = intval("experiment", "dimension", default=1, minimum=1)
    beta = floatval("experiment", "beta", default=1.0, positive=True)
    T = floatval("experiment", "T", default=1.0, positive=True)
    n_traj = intval("experiment", "n_traj", default=1, minimum=1)
    seed = intval("experiment", "seed", default=0)
    if seed is not None and not (0 <= seed < 2**64):
        errors.append(f"seed: must fit in 64 bits, got {seed}")

    eps_raw = _get(parser, "experiment", "eps", "")
    eps_list: tuple = ()
    try:
        eps_list = tuple(_float_list(eps_raw))
    except ValueError:
        errors.append(f"eps: expected a comma-separated list of numbers, got {eps_raw!r}")
    if not eps_list:
        errors.append("eps: the list must be nonempty")
    else:
        if any(not (0.0 < e <= 1.0) for e in eps_list):
            errors.append("eps: every entry must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
            errors.append("eps: the list must be strictly decreasing")

    dt_raw = _get(parser, "experiment", "dt", "auto")
    if dt_raw == "auto":
        dt_rule = DtRule("auto", None)
    else:
        law = _parse_power_law(dt_raw, "dt", errors)
        dt_rule = DtRule(dt_raw, law)
        if law is not None and law.coef <= 0:
            errors.append("dt: the step size must be positive")
    ref_dt = floatval("experiment", "ref_dt", default=1e-4, positive=True)

    potential_spec = _get(parser, "potential", "V")
    potential = FourierFunction(dimension or 1, [])
    if potential_spec is not None:
        try:
            potential = parse_function(potential_spec, dimension or 1, base_dir)
        except (ValueError, OSError) as exc:
            errors.append(f"V: {exc}")
    potential_spec = potential_spec or ""

    crystal = None
    if parser.has_section("crystal"):
        chi_spec = _get(parser, "crystal", "chi")
        chi = FourierFunction(dimension or 1, [])
        if chi_spec is not None:
            try:
                chi = parse_function(chi_spec, dimension or 1, base_dir)
            except (ValueError, OSError) as exc:
                errors.append(f"chi: {exc}")
        chi_spec = chi_spec or ""
        alpha_raw = _get(parser, "crystal", "alpha", "0")
        if _TABLE_RE.match(alpha_raw):
            alpha = _parse_table(alpha_raw, "alpha", errors)
        else:
            alpha = _parse_power_law(alpha_raw, "alpha", errors)
        k_raw = _get(parser, "crystal", "k", "1")
        m = re.match(r"^ceil\((.+)\)$", k_raw)
        if _TABLE_RE.match(k_raw):
            k_table = _parse_table(k_raw, "k", errors, integer=True)
            if k_table is not None and any(v < 1 for _, v in k_table.entries):
                errors.append("k: table values must be >= 1")
            k_rule = KRule(k_raw, None, None, k_table)
        elif m:
            k_law = _parse_power_law(m.group(1), "k", errors)
            k_rule = KRule(k_raw, k_law, None)
        else:
            try:
                k_fixed = int(k_raw)
                if k_fixed < 1:
                    errors.append(f"k: must be >= 1, got {k_fixed}")
                k_rule = KRule(k_raw, None, k_fixed)
            except ValueError:
                errors.append(f"k: expected an integer, a table, or ceil(...), got {k_raw!r}")
                k_rule = KRule(k_raw, None, 1)
        for field, rule in (("alpha", alpha), ("k", k_rule.table)):
            if isinstance(rule, TableRule) and eps_list:
                for e in eps_list:
                    try:
                        rule.value(e)
                    except KeyError:
                        errors.append(f"{field}: table has no entry for eps={e!r}")
        if alpha is not None:
            crystal = CrystalRule(chi_spec, chi, alpha_raw, alpha, k_rule)

    q0_spec = _get(parser, "initial", "q0", "uniform")
    if q0_spec == "uniform":
        q0 = UniformStart()
    else:
        m = re.match(r"^point\((.*)\)$", q0_spec)
        if m:
            try:
                coords = tuple(float(x) for x in m.group(1).split(","))
                if len(coords) != (dimension or 1):
                    errors.append(f"q0: point needs {dimension} coordinates")
                    coords = (0.0,) * (dimension or 1)
                q0 = PointStart(coords)
            except ValueError as exc:
                errors.append(f"q0: {exc}")
                q0 = UniformStart()
        else:
            errors.append(f"q0: expected 'uniform' or point(...), got {q0_spec!r}")
            q0 = UniformStart()

    p0_spec = _get(parser, "initial", "p0", "stationary")
    if p0_spec == "zero":
        p0 = MomentumRule(p0_spec, "zero", None)
    elif p0_spec == "stationary":
        p0 = MomentumRule(p0_spec, "stationary", None)
    else:
        m = re.match(r"^gaussian\((.*)\)$", p0_spec)
        if m:
            law = _parse_power_law(m.group(1), "p0", errors)
            p0 = MomentumRule(p0_spec, "gaussian", law)
            if law is not None:
                if law.coef < 0:
                    errors.append("p0: the Gaussian scale must be nonnegative")
                if (law.power <= HEAVY_TAIL_BOUNDARY + 1e-12
                        and law.coef != 0.0 and not allow_heavy_tails):
                    errors.append(
                        "p0: scale grows like eps^a with a <= -1/3, so "
                        "eps E|P_0|^3 does not vanish; pass --allow-heavy-tails "
                        "to run anyway")
        else:
            errors.append(f"p0: expected zero, stationary, or gaussian(...), got {p0_spec!r}")
            p0 = MomentumRule(p0_spec, "zero", None)

    observables = []
    if parser.has_section("observables"):
        for name in parser.options("observables"):
            spec = parser.get("observables", name).strip()
            try:
                observables.append((name, spec,
                                    parse_function(spec, dimension or 1, base_dir)))
            except (ValueError, OSError) as exc:
                errors.append(f"observable {name}: {exc}")
    names = [n for n, _, _ in observables]
    if len(set(names)) != len(names):
        errors.append("observables: names must be unique")

    ladder = None
    if parser.has_section("ladder"):
        try:
            times = tuple(_float_list(_get(parser, "ladder", "times", "")))
        except ValueError:
            errors.append("ladder times: expected a list of numbers")
            times = ()
        phis = tuple(x.strip() for x in _get(parser, "ladder", "phis", "").split(",")
                     if x.strip())
        f_name = _get(parser, "ladder", "f", "")
        if len(times) < 2:
            errors.append("ladder: needs at least two times")
        elif any(b < a for a, b in zip(times, times[1:])):
            errors.append("ladder: times must be nondecreasing")
        elif T is not None and times[-1] > T + 1e-12:
            errors.append("ladder: times must not exceed T")
        if times and len(phis) != max(0, len(times) - 1):
            errors.append("ladder: needs exactly one phi per time t_1..t_p")
        for ref in (*phis, f_name):
            if ref and ref not in names:
                errors.append(f"ladder: unknown observable {ref!r}")
        if not f_name:
            errors.append("ladder: missing f")
        ladder = LadderConfig(times, phis, f_name)

    modulus_deltas = None
    modulus_f = None
    if parser.has_section("modulus"):
        try:
            modulus_deltas = tuple(_float_list(_get(parser, "modulus", "deltas", "")))
        except ValueError:
            errors.append("modulus deltas: expected a list of numbers")
            modulus_deltas = ()
        if not modulus_deltas:
            errors.append("modulus: deltas must be nonempty")
        elif T is not None and any(not (0 < dl < T) for dl in modulus_deltas):
            errors.append("modulus: every delta must lie strictly between 0 and T")
        modulus_f = _get(parser, "modulus", "f", names[0] if names else "")
        if modulus_f not in names:
            errors.append(f"modulus: unknown observable {modulus_f!r}")

    gammas_raw = _get(parser, "moments", "gammas", "1, 1.5")
    try:
        gammas = tuple(_float_list(gammas_raw))
        if any(g < 1.0 for g in gammas):
            errors.append("gammas: every entry must be >= 1")
    except ValueError:
        errors.append(f"gammas: expected a list of numbers, got {gammas_raw!r}")
        gammas = (1.0,)

    n_samples = intval("residuals", "n_samples", default=256, minimum=1)

    stride = _get(parser, "output", "stride", "auto")
    if stride != "auto":
        try:
            if int(stride) < 1:
                errors.append("stride: must be >= 1")
        except ValueError:
            errors.append(f"stride: expected 'auto' or an integer, got {stride!r}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        dimension=dimension, beta=beta, T=T, eps_list=eps_list, dt=dt_rule,
        ref_dt=ref_dt, n_traj=n_traj, seed=seed,
        potential_spec=potential_spec, potential=potential, crystal=crystal,
        q0_spec=q0_spec, q0=q0, p0=p0,
        observables=tuple(observables), ladder=ladder,
        modulus_deltas=modulus_deltas, modulus_f=modulus_f,
        gammas=gammas, residual_samples=n_samples, stride=stride)


def parse_config(path, allow_heavy_tails: bool = False) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), base_dir=path.parent,
                             allow_heavy_tails=allow_heavy_tails)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text whose parse equals cfg."""
    out = io.StringIO()
    out.write("[experiment]\n")
    out.write(f"dimension = {cfg.dimension}\n")
    out.write(f"beta = {cfg.beta!r}\n")
    out.write(f"T = {cfg.T!r}\n")
    out.write("eps = " + ", ".join(repr(e) for e in cfg.eps_list) + "\n")
    out.write(f"n_traj = {cfg.n_traj}\n")
    out.write(f"seed = {cfg.seed}\n")
    out.write(f"dt = {cfg.dt.raw}\n")
    out.write(f"ref_dt = {cfg.ref_dt!r}\n")
    out.write("\n[potential]\n")
    out.write(f"V = {cfg.potential_spec}\n")
    if cfg.crystal is not None:
        out.write("\n[crystal]\n")
        out.write(f"chi = {cfg.crystal.chi_spec}\n")
        out.write(f"alpha = {cfg.crystal.alpha_raw}\n")
        out.write(f"k = {cfg.crystal.k.raw}\n")
    out.write("\n[initial]\n")
    out.write(f"q0 = {cfg.q0_spec}\n")
    out.write(f"p0 = {cfg.p0.raw}\n")
    if cfg.observables:
        out.write("\n[observables]\n")
        for name, spec, _ in cfg.observables:
            out.write(f"{name} = {spec}\n")
    if cfg.ladder is not None:
        out.write("\n[ladder]\n")
        out.write("times = " + ", ".join(repr(t) for t in cfg.ladder.times) + "\n")
        out.write("phis = " + ", ".join(cfg.ladder.phi_names) + "\n")
        out.write(f"f = {cfg.ladder.f_name}\n")
    if cfg.modulus_deltas is not None:
        out.write("\n[modulus]\n")
        out.write("deltas = " + ", ".join(repr(d) for d in cfg.modulus_deltas) + "\n")
        out.write(f"f = {cfg.modulus_f}\n")
    out.write("\n[moments]\n")
    out.write("gammas = " + ", ".join(repr(g) for g in cfg.gammas) + "\n")
    out.write("\n[residuals]\n")
    out.write(f"n_samples = {cfg.residual_samples}\n")
    out.write("\n[output]\n")
    out.write(f"stride = {cfg.stride}\n")
    return out.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()
