import json

import pytest

from reflocal import __version__
from reflocal.cli import build_parser, main, parse_grid


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    return header, body


def test_parse_grid_inclusive():
    assert parse_grid("-1:1:5") == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert parse_grid("2:3:1") == [2.0]


def test_rate(tmp_path):
    out = tmp_path / "rate.csv"
    assert main(["rate", "--b", "1", "--alpha-grid", "-5:5:101", "--x-grid", "0:2:5", "--out", str(out)]) == 0
    header, body = read_csv(out)
    assert header[0] == f"# reflocal {__version__}"
    assert any(h.startswith("# flags: ") for h in header)
    assert body[0] == "alpha,V,V_prime,x,V_star,V_star_prime,lambda_star"
    assert len(body) == 102
    row0 = body[51].split(",")
    assert row0[:3] == ["0", "0", "0.5"]


def test_mgf_with_residuals(tmp_path):
    out = tmp_path / "mgf.csv"
    assert main(["mgf", "--alpha", "-1", "--lambda", "0.5", "--residual-n", "64", "--out", str(out)]) == 0
    _, body = read_csv(out)
    assert len(body) == 12 and body[-1].startswith("1,1.2642411176571153")
    _, res = read_csv(tmp_path / "mgf_residuals.csv")
    assert [r.split(",")[0] for r in res[1:]] == ["64", "128", "256", "512"]


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nb = 2\nalpha-grid = -1:1:3\n")
    out = tmp_path / "r.csv"
    assert main(["rate", "--config", str(cfg), "--b", "1", "--out", str(out)]) == 0
    header, body = read_csv(out)
    flags = json.loads(header[3][len("# flags: "):])
    assert flags["b"] == 1.0 and flags["alpha_grid"] == [-1.0, 0.0, 1.0]
    assert len(body) == 4


def test_simulate_summary_and_dump(tmp_path):
    out = tmp_path / "s.json"
    args = ["simulate", "--t", "1", "--dt", "0.01", "--paths", "200", "--alpha", "-1", "--seed", "4"]
    assert main(args + ["--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["header"]["seed"] == 4
    assert set(doc["results"]) == {"exp_tilt_L", "L_over_t", "U_over_t", "occupation_mean"}
    assert main(args + ["--dump-paths", "2", "--out", str(tmp_path / "p.csv")]) == 0
    header, body = read_csv(tmp_path / "p_path1.csv")
    assert header[2] == "# seed: 4"
    assert body[0] == "t,X,L,U" and len(body) == 102


def test_export(tmp_path):
    assert main(["export", "--b", "2", "--out", str(tmp_path / "curves")]) == 0
    for name, cols in (("alpha_star", "lambda,alpha_star,alpha_star_prime"), ("V", "alpha,V,V_prime"),
                       ("V_star", "x,V_star,V_star_prime,lambda_star")):
        _, body = read_csv(tmp_path / "curves" / f"{name}.csv")
        assert body[0] == cols and len(body) == 202


def test_verify_pass_and_fail_exit_codes(tmp_path):
    out = tmp_path / "v" / "summary.json"
    common = ["verify", "--dt", "0.01", "--seed", "3", "--out", str(out)]
    assert main(common + ["--suite", "ergodic", "--t", "20", "--paths", "500"]) == 0
    assert (tmp_path / "v" / "ergodic_limits_3.json").exists()
    assert json.loads(out.read_text())["overall_pass"] is True
    # far too short horizons: the tail rate is nowhere near V*
    assert main(common + ["--suite", "ldp", "--t-list", "1,2", "--paths", "2000"]) == 1
    assert json.loads(out.read_text())["suites"]["ldp"]["overall_pass"] is False


@pytest.mark.parametrize("argv", [
    ["rate"],
    ["rate", "--b", "-1", "--x-grid", "0:1:2"],
    ["mgf", "--alpha", "5", "--lambda", "0.5"],
    ["mgf", "--alpha", "1"],
    ["simulate", "--dt", "0"],
    ["verify", "--suite", "nope"],
    ["rate", "--alpha-grid", "1:2"],
    ["rate", "--config", "/nonexistent/file"],
])
def test_usage_and_domain_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_help_lists_units():
    for sub in ("simulate", "verify", "mgf"):
        text = build_parser()._subparsers._group_actions[0].choices[sub].format_help()
        assert "[length]" in text and ("[time]" in text or "[1/time]" in text)


def test_variance_guard_counts_as_failed_suite(tmp_path):
    out = tmp_path / "summary.json"
    argv = ["verify", "--suite", "logmgf", "--alpha", "-5", "--t-list", "10,20", "--dt", "0.01",
            "--paths", "200", "--out", str(out)]
    assert main(argv) == 1
    assert "VarianceError" in json.loads(out.read_text())["suites"]["logmgf"]["error"]
