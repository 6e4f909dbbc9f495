import numpy as np
import pytest

from lrsplit import cli
from lrsplit.cli import (
    ExperimentConfig,
    cmd_convergence,
    cmd_decompose,
    cmd_emit_plots,
    cmd_singular_values,
    main,
    parse_config,
    read_csv,
)
from lrsplit.errors import ConfigError, SchemaError
from lrsplit.problems import PRESETS, ProblemSpec, build_laplacian_1d, write_matrix_market

from conftest import slope

BASE = """
[experiment]
problem = reaction_diffusion
m = 16
T = 0.5
ranks = 2
taus = 0.125, 0.0625
schemes = lowrank-lie
"""


def body(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_parse_defaults_and_ranges():
    cfg = parse_config(BASE.replace("ranks = 2", "ranks = 1-3").replace("taus = 0.125, 0.0625", "tau_halvings = 3-5"))
    assert cfg.ranks == [1, 2, 3]
    assert cfg.taus == [0.5 / 8, 0.5 / 16, 0.5 / 32]
    assert cfg.rank_threshold == 1e-8


@pytest.mark.parametrize("edit, field", [
    (("taus = 0.125, 0.0625", "taus ="), "taus"),
    (("taus = 0.125, 0.0625", "taus = 0.3"), "taus"),
    (("ranks = 2", "ranks ="), "ranks"),
    (("ranks = 2", "ranks = 0"), "ranks"),
    (("schemes = lowrank-lie", "schemes = euler"), "schemes"),
    (("m = 16", "m = sixteen"), "m"),
    (("m = 16", "m = 16\nbogus = 1"), "bogus"),
])
def test_validation_names_field(edit, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(BASE.replace(*edit))
    assert exc.value.field == field
    assert field in str(exc.value)


def test_single_point_one_row(tmp_path):
    cfg = parse_config(BASE.replace("taus = 0.125, 0.0625", "taus = 0.125"))
    records, path = cmd_convergence(cfg, tmp_path)
    lines = body(path)
    assert len(lines) == 2
    assert lines[0].split(",") == cli.CONVERGENCE_COLUMNS
    rec = records[0]
    assert rec.status == "ok"
    assert rec.n_steps * rec.tau == pytest.approx(0.5)
    assert rec.error_frobenius >= 0


def test_config_hash_echoed_and_deterministic(tmp_path):
    cfg = parse_config(BASE.replace("ranks = 2", "ranks = 1, 2"))
    _, p1 = cmd_convergence(cfg, tmp_path / "a")
    _, p2 = cmd_convergence(cfg, tmp_path / "b", threads=3)
    assert body(p1) == body(p2)
    cols, rows = read_csv(p1)
    assert len(rows) == 4
    assert all(r["config_hash"] == cfg.digest() for r in rows)
    assert [int(r["index"]) for r in rows] == [0, 1, 2, 3]
    assert cfg.digest() in p1.read_text().splitlines()[0]


def test_hash_changes_with_config():
    a = parse_config(BASE)
    b = parse_config(BASE.replace("m = 16", "m = 17"))
    assert a.digest() != b.digest()
    assert len(a.digest()) == 64


def test_fullrank_rows_use_full_rank(tmp_path):
    cfg = parse_config(BASE.replace("schemes = lowrank-lie", "schemes = lowrank-lie, fullrank-lie"))
    records, _ = cmd_convergence(cfg, tmp_path)
    assert [r.rank for r in records if r.scheme == "fullrank-lie"] == [16, 16]


def test_failed_point_recorded(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("overflow")

    cfg = parse_config(BASE)
    real = cli.integrate
    monkeypatch.setattr(cli, "integrate", lambda p, sc, *a, **k: boom() if sc.tau > 0.1 else real(p, sc, *a, **k))
    records, path = cmd_convergence(cfg, tmp_path)
    assert [r.status for r in records] == ["failed:FloatingPointError", "ok"]
    assert cli._exit_code([r.status for r in records]) == cli.EXIT_PARTIAL


def test_singvals_rank_one_linear(tmp_path, monkeypatch):
    m = 12
    x = np.linspace(0, 1, m)
    X0 = np.outer(np.sin(np.pi * x), np.sin(np.pi * x))
    prob = ProblemSpec(build_laplacian_1d(m) / 50, lambda t, X: np.zeros_like(X), X0, 1.0)
    monkeypatch.setitem(PRESETS, "reaction_diffusion", lambda m, T: prob)
    cfg = parse_config(BASE.replace("m = 16", f"m = {m}").replace("T = 0.5", "T = 1.0"))
    _, rank_rows, _ = cmd_singular_values(cfg, tmp_path)
    assert [r["effective_rank"] for r in rank_rows] == [1] * cfg.n_times


def test_singvals_reaction_diffusion_decreasing(tmp_path):
    cfg = parse_config(BASE.replace("m = 16", "m = 64"))
    sv_rows, _, (sv_path, rank_path) = cmd_singular_values(cfg, tmp_path)
    sigma = np.array([r["sigma"] for r in sv_rows])
    # strict decrease until the spectrum reaches roundoff
    head = sigma[sigma > 1e-13 * sigma[0]]
    assert len(head) >= 8
    assert np.all(np.diff(head) < 0)
    assert sv_path.exists() and rank_path.exists()


def test_singvals_dre_starts_at_rank_zero(tmp_path):
    cfg = parse_config(BASE.replace("reaction_diffusion", "dre").replace("m = 16", "m = 24")
                       .replace("T = 0.5", "T = 0.1").replace("taus = 0.125, 0.0625", "taus = 0.05"))
    _, rank_rows, _ = cmd_singular_values(cfg, tmp_path)
    ranks = [r["effective_rank"] for r in rank_rows]
    assert ranks[0] == 0
    assert ranks[1] > 0
    assert ranks[1] <= ranks[2]


def test_decompose_full_rank_and_triangle(tmp_path):
    cfg = parse_config(BASE.replace("ranks = 2", "ranks = 2, 16"))
    rows, _ = cmd_decompose(cfg, tmp_path)
    assert all(r["triangle_ok"] == 1 for r in rows)
    assert all(r["E_delta"] < 1e-13 for r in rows if r["rank"] == 16)


def test_decompose_splitting_slope(tmp_path):
    cfg = parse_config(BASE.replace("m = 16", "m = 32").replace("ranks = 2", "ranks = 4")
                       .replace("taus = 0.125, 0.0625", "tau_halvings = 3-7"))
    rows, _ = cmd_decompose(cfg, tmp_path)
    s = slope([r["tau"] for r in rows], [r["E_sp"] for r in rows])
    assert 0.8 <= s <= 1.2


def test_plot_scripts(tmp_path):
    cfg = parse_config(BASE)
    _, conv = cmd_convergence(cfg, tmp_path)
    script = cmd_emit_plots(conv)
    text = script.read_text()
    assert "'convergence.csv'" in text
    assert str(tmp_path) not in text
    assert "set logscale xy" in text
    *_, (sv, rk) = cmd_singular_values(cfg, tmp_path)
    text = cmd_emit_plots(sv).read_text()
    assert "set logscale y" in text and "set logscale xy" not in text


def test_plot_unknown_header_names_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("scheme,rank,tau\nlowrank-lie,1,0.1\n")
    with pytest.raises(SchemaError, match="error_frobenius"):
        cmd_emit_plots(bad)


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(BASE)
    assert main(["convergence", "--config", str(good), "--out", str(tmp_path / "o")]) == 0
    assert main(["plots", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "convergence.gp").exists()

    bad = tmp_path / "bad.ini"
    bad.write_text(BASE.replace("taus = 0.125, 0.0625", "taus ="))
    assert main(["convergence", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "taus" in capsys.readouterr().err

    assert main(["decompose", "--config", str(tmp_path / "missing.ini")]) == 1


def test_main_all_failed(tmp_path, monkeypatch):
    cfg_path = tmp_path / "c.ini"
    cfg_path.write_text(BASE)
    monkeypatch.setattr(cli, "integrate", lambda *a, **k: (_ for _ in ()).throw(FloatingPointError("x")))
    assert main(["convergence", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2


def test_main_matrix_market_dimension_mismatch(tmp_path):
    a = tmp_path / "A.mtx"
    write_matrix_market(a, build_laplacian_1d(8), symmetric=True)
    cfg_path = tmp_path / "c.ini"
    cfg_path.write_text(BASE.replace("reaction_diffusion", f"matrix_market\na_path = {a}"))
    assert main(["convergence", "--config", str(cfg_path), "--out", str(tmp_path)]) == 1


def test_matrix_market_problem_runs(tmp_path):
    m = 10
    a = tmp_path / "A.mtx"
    x0 = tmp_path / "X0.mtx"
    write_matrix_market(a, build_laplacian_1d(m) / 50, symmetric=True)
    write_matrix_market(x0, np.outer(np.arange(m), np.ones(m)) / m)
    cfg = parse_config(BASE.replace("reaction_diffusion", f"matrix_market\na_path = {a}\nx0_path = {x0}")
                       .replace("m = 16", f"m = {m}"))
    records, _ = cmd_convergence(cfg, tmp_path)
    assert all(r.status == "ok" for r in records)


def test_example_configs_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("reaction_diffusion.ini", "dre.ini"):
        cfg = cli.load_config(root / name)
        assert cfg.m == 64
        assert isinstance(cfg, ExperimentConfig)
