import math

import numpy as np
import pytest

from seglab import load_field
from seglab.cli import ConfigError, load_run_config, main, parse_config

ARC0 = f"0:0:{math.pi:.17g}:1"
ARC1 = f"1:{math.pi:.17g}:{2 * math.pi:.17g}:1"


def write_cfg(path, body: str):
    path.write_text(body)
    return str(path)


MINI = f"""
domain.h = 0.0625
populations.d = 2
populations.arcs = {ARC0}, {ARC1}
epsilon.schedule = 1.0, 0.3
diagnostics.enable = overlap, limit
"""


def test_parse_config_basics():
    raw = parse_config("domain.radius = 2.0  # trailing comment\n\nseed=5\n")
    assert raw["domain.radius"] == ("2.0", 1)
    assert raw["seed"] == ("5", 3)


def test_parse_config_errors():
    with pytest.raises(ConfigError) as e:
        parse_config("domain.radius 2.0")
    assert e.value.line == 1
    with pytest.raises(ConfigError) as e:
        parse_config("# ok\nnot.a.key = 1")
    assert e.value.line == 2
    with pytest.raises(ConfigError) as e:
        parse_config("seed = 1\nseed = 2")
    assert e.value.line == 2 and "duplicate" in e.value.message


def test_load_run_config_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    cfg = load_run_config(tmp_path / "none.cfg") if False else None
    p = tmp_path / "c.cfg"
    p.write_text("domain.h = 0.0625\n")
    cfg = load_run_config(p)
    assert cfg.radius == 1.0
    assert cfg.d == 2
    assert len(cfg.segments) == 2  # default: evenly spaced unit arcs
    assert cfg.schedule == (1.0,)
    assert cfg.ell.lam == 1.0 and cfg.ell.Lam == 2.0


def test_run_minimal(tmp_path, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    out = tmp_path / "out"
    cfg = write_cfg(
        tmp_path / "mini.cfg",
        f"domain.h = 0.0625\npopulations.d = 1\npopulations.arcs = {ARC0}\n"
        f"epsilon.schedule = 1.0\noutput.dir = {out}\n",
    )
    assert main(["run", cfg]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["convergence_log.csv", "field_e0_p0.csv", "summary.csv"]
    # every field artifact must parse back through the dump reader
    grid, classes, f = load_field(out / "field_e0_p0.csv")
    assert f.values.max() <= 1.0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "artifact,key,value"
    listed = {row.split(",")[0] for row in summary[1:]}
    assert listed == {"field_e0_p0.csv", "convergence_log.csv"}


def test_run_deterministic(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write_cfg(tmp_path / "m.cfg", MINI + f"output.dir = {a}\n")
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    assert main(["run", cfg]) == 0
    monkeypatch.setenv("SEGLAB_OUT", str(b))  # env override redirects, content identical
    assert main(["run", cfg]) == 0
    files_a = sorted(p.name for p in a.iterdir())
    files_b = sorted(p.name for p in b.iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_overlapping_arcs_no_artifacts(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    out = tmp_path / "never"
    cfg = write_cfg(
        tmp_path / "bad.cfg",
        f"populations.d = 2\npopulations.arcs = 0:0:4:1, 1:3:6:1\noutput.dir = {out}\n",
    )
    assert main(["run", cfg]) == 2
    assert "config:2" in capsys.readouterr().err
    assert not out.exists()


def test_run_bad_ellipticity(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    cfg = write_cfg(tmp_path / "e.cfg", "ellipticity.lam = 3\nellipticity.Lam = 1\n")
    assert main(["run", cfg]) == 2
    assert "config:1" in capsys.readouterr().err


def test_run_unknown_key_line_numbered(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    cfg = write_cfg(tmp_path / "k.cfg", "domain.h = 0.0625\n\nsolver.bogus = 1\n")
    assert main(["run", cfg]) == 2
    assert "config:3" in capsys.readouterr().err


def test_run_nonconvergence_keeps_artifacts(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    out = tmp_path / "slow"
    cfg = write_cfg(
        tmp_path / "s.cfg",
        f"domain.h = 0.0625\nepsilon.schedule = 1.0, 0.01\nsolver.max_outer = 2\n"
        f"output.dir = {out}\n",
    )
    assert main(["run", cfg]) == 3
    assert (out / "convergence_log.csv").exists()
    assert (out / "summary.csv").exists()
    assert "did not converge" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("SEGLAB_OUT", raising=False)
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_verify_default_passes(capsys):
    assert main(["verify", "--samples", "200"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("algebra,") and lines[0].endswith("PASS")
    assert lines[1].startswith("kind,")
    rows = lines[2:]
    assert len(rows) == 16  # 2 shapes x 2 exponents x sub/super x 2 ellipticities
    assert all(r.endswith("PASS") for r in rows)


def test_verify_low_exponent_fails(capsys):
    assert main(["verify", "--samples", "1", "--alpha-scale", "0.5"]) == 4
    out = capsys.readouterr().out
    assert ",FAIL" in out  # control rows below the admissible floor


def test_verify_bad_ellipticity(capsys):
    assert main(["verify", "--samples", "1", "--lam", "3", "--Lam", "1"]) == 2
    assert "config:0" in capsys.readouterr().err


def test_dump_barrier(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SEGLAB_OUT", str(tmp_path))
    assert main(["dump-barrier", "super", "1", "2", "1.5", "1", "2", "2"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1].endswith("PASS")
    prof = (tmp_path / "barrier_super.csv").read_text().splitlines()
    assert prof[1] == "radius,value,slope"
    assert len(prof) > 200


def test_dump_barrier_controls(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SEGLAB_OUT", str(tmp_path))
    assert main(["dump-barrier", "sub", "1", "2", "0.4", "1", "2", "2"]) == 4
    assert ",FAIL" in capsys.readouterr().out
    assert main(["dump-barrier", "sub", "1", "2", "1.5", "1", "2", "3"]) == 2
    assert main(["dump-barrier", "sub", "1", "2", "1.5", "3", "1", "2"]) == 2
