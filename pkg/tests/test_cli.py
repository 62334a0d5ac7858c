import textwrap
from pathlib import Path

import pytest

from overdamp import cli
from overdamp import integrators
from overdamp.cli import main

BASE = textwrap.dedent("""\
    [experiment]
    dimension = 1
    beta = 1.0
    T = 0.25
    eps = 0.4, 0.2
    n_traj = 64
    seed = 7
    dt = 5e-3
    ref_dt = 5e-3

    [potential]
    V = cos(1)

    [initial]
    q0 = uniform
    p0 = {p0}

    [observables]
    cos1 = cos(1)

    {ladder}[residuals]
    n_samples = 16
    """)

LADDER = textwrap.dedent("""\
    [ladder]
    times = 0.0625, 0.125, 0.25
    phis = cos1, cos1
    f = cos1

    """)


def write_config(root: Path, name: str = "mini.ini", p0: str = "zero",
                 ladder: str = LADDER) -> Path:
    path = root / name
    path.write_text(BASE.format(p0=p0, ladder=ladder))
    return path


def csv_bytes(artifact: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(artifact.glob("*.csv"))}


def manifest_schema(text: str) -> dict:
    lines = text.splitlines()
    schema = {}
    for line in lines[lines.index("[schema]") + 1:]:
        if not line.strip() or line.startswith("["):
            break
        name, cols = line.split(" = ", 1)
        schema[name] = cols.split(",")
    return schema


def only_artifact(out: Path, command: str) -> Path:
    entries = list((out / command).iterdir())
    assert len(entries) == 1
    return entries[0]


def test_converge_artifact_layout(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["converge", "--config", str(cfg),
                 "--out", str(tmp_path / "out")]) == 0
    printed = Path(capsys.readouterr().out.strip().splitlines()[-1])
    art = only_artifact(tmp_path / "out", "converge")
    assert printed == art
    assert art.name.startswith("mini-") and len(art.name) == len("mini-") + 8
    assert (art / "weak_error.csv").is_file()
    assert (art / "manifest").is_file()
    assert (art / "figure.png").read_bytes().startswith(b"\x89PNG")


def test_manifest_records_schema_and_config(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg),
                 "--out", str(tmp_path / "out")]) == 0
    art = only_artifact(tmp_path / "out", "simulate")
    text = (art / "manifest").read_text()
    schema = manifest_schema(text)
    csvs = sorted(p.name for p in art.glob("*.csv"))
    assert sorted(schema) == csvs and len(csvs) >= 3
    for name in csvs:
        header = (art / name).read_text().splitlines()[0]
        assert header == ",".join(schema[name])
    assert f"seed = 7" in text
    assert "command = simulate" in text
    assert "config_hash = " in text
    assert "[config]" in text
    assert "workers" not in text


def test_rerun_replaces_artifact_in_place(tmp_path):
    cfg = write_config(tmp_path)
    args = ["residuals", "--config", str(cfg), "--out", str(tmp_path / "out")]
    assert main(args) == 0
    art = only_artifact(tmp_path / "out", "residuals")
    before = csv_bytes(art)
    (art / "sentinel").write_text("stale")
    assert main(args) == 0
    art2 = only_artifact(tmp_path / "out", "residuals")
    assert art2 == art
    assert not (art / "sentinel").exists()
    assert csv_bytes(art) == before


def test_worker_count_does_not_change_bytes(tmp_path, monkeypatch):
    monkeypatch.setattr(integrators, "BLOCK_TRAJ", 16)
    cfg = write_config(tmp_path)
    assert main(["converge", "--config", str(cfg),
                 "--out", str(tmp_path / "a")]) == 0
    assert main(["converge", "--config", str(cfg), "--workers", "3",
                 "--out", str(tmp_path / "b")]) == 0
    one = only_artifact(tmp_path / "a", "converge")
    par = only_artifact(tmp_path / "b", "converge")
    assert csv_bytes(one) == csv_bytes(par)
    assert (one / "manifest").read_bytes() == (par / "manifest").read_bytes()


def test_seed_override_yields_new_artifact(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["residuals", "--config", str(cfg), "--out", str(out)]) == 0
    base = only_artifact(out, "residuals")
    assert main(["residuals", "--config", str(cfg), "--out", str(out),
                 "--seed", "123"]) == 0
    arts = sorted((out / "residuals").iterdir())
    assert len(arts) == 2
    other = next(a for a in arts if a != base)
    assert "seed = 123" in (other / "manifest").read_text()
    assert csv_bytes(other) != csv_bytes(base)


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(BASE.format(p0="zero", ladder="") + "\nchunk = 3\n")
    assert main(["simulate", "--config", str(path),
                 "--out", str(tmp_path / "out")]) == 2
    assert "invalid config" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_heavy_tail_momentum_needs_flag(tmp_path, capsys):
    cfg = write_config(tmp_path, p0="gaussian(eps^-0.5)")
    args = ["residuals", "--config", str(cfg), "--out", str(tmp_path / "out")]
    assert main(args) == 2
    assert "--allow-heavy-tails" in capsys.readouterr().err
    assert main(args + ["--allow-heavy-tails"]) == 0


def test_ladder_without_section_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, ladder="")
    assert main(["ladder", "--config", str(cfg),
                 "--out", str(tmp_path / "out")]) == 2
    assert "[ladder]" in capsys.readouterr().err
    assert list((tmp_path / "out" / "ladder").iterdir()) == []


def test_failed_run_leaves_no_partial_artifact(tmp_path, capsys, monkeypatch):
    def boom(cfg, out, workers):
        (out / "partial.csv").write_text("half-written")
        raise RuntimeError("disk on fire")

    monkeypatch.setitem(cli.RECIPES, "residuals", boom)
    cfg = write_config(tmp_path)
    assert main(["residuals", "--config", str(cfg),
                 "--out", str(tmp_path / "out")]) == 1
    assert "runtime error" in capsys.readouterr().err
    assert list((tmp_path / "out" / "residuals").iterdir()) == []


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "x.ini"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2
    capsys.readouterr()
    cfg = write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--workers", "0"]) == 2
    assert main(["simulate", "--config", str(cfg), "--seed", "-1"]) == 2
