import csv
import json

import numpy as np
import pytest

from lyapgame.cli import main


def report(out):
    return json.loads((out / "report.json").read_text())


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_validate(tmp_path, capsys):
    assert main(["validate", "@fig1", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path)
    assert rep["results"]["constraint_counts"]["static"] == {"cce": 5, "ce": 8}
    assert "6 joint actions" in capsys.readouterr().out


def test_solve_static_then_certify(tmp_path):
    out = tmp_path / "s"
    assert main(["solve-static", "@fig1", "--kind", "cce", "--fairness", "10*log(1+u1)+log(1+u2)", "--out", str(out)]) == 0
    rep = report(out)
    np.testing.assert_allclose(rep["results"]["utilities"], [3.7323, 5.9091], atol=1e-3)
    assert rep["results"]["certification"]["satisfied"]
    assert rep["fairness_source"] == "flag"
    table = rows(out / "pmf.csv")
    assert table[0] == ["a_p1", "a_p2", "probability"] and len(table) == 7

    cert = tmp_path / "c"
    assert main(["certify", "@fig1", "--kind", "cce", "--pmf", str(out / "pmf.csv"), "--tol", "1e-6", "--out", str(cert)]) == 0
    assert report(cert)["results"]["certification"]["satisfied"]
    assert main(["certify", "@fig1", "--kind", "ne", "--pmf", str(out / "pmf.csv"), "--out", str(cert)]) == 0
    assert not report(cert)["results"]["certification"]["satisfied"]


def test_structured_fairness_flags(tmp_path):
    args = ["solve-static", "@fig1", "--fairness-kind", "linear", "--weights", "0", "1", "--out", str(tmp_path)]
    assert main(args) == 0
    assert report(tmp_path)["results"]["utilities"][1] == pytest.approx(9.3)


def test_silhouette_outputs(tmp_path):
    assert main(["silhouette", "@fig1", "--kind", "cce", "--directions", "64", "--out", str(tmp_path)]) == 0
    hull = np.array(report(tmp_path)["results"]["hull"])
    for v in ([3.5, 2.4], [3.5, 9.3], [3.8773, 3.7914]):
        assert np.min(np.max(np.abs(hull - v), axis=1)) <= 1e-3
    assert len(rows(tmp_path / "silhouette.csv")) == 65
    assert (tmp_path / "silhouette.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_stochastic_solve_and_policy_certify(tmp_path):
    out = tmp_path / "st"
    assert main(["solve-stochastic", "@weather", "--kind", "ce", "--out", str(out)]) == 0
    assert report(out)["results"]["certification"]["satisfied"]
    assert rows(out / "policy.csv")[0] == ["w_manager", "w_p1", "w_p2", "a_p1", "a_p2", "probability"]
    cert = tmp_path / "c"
    args = ["certify", "@weather", "--kind", "cce", "--policy", str(out / "policy.csv"), "--tol", "1e-6", "--out", str(cert)]
    assert main(args) == 0
    assert report(cert)["results"]["certification"]["satisfied"]


def test_run_dpp_bound_and_trace(tmp_path):
    out = tmp_path / "r"
    assert main(["run-dpp", "@fig1", "--V", "100", "--T", "100000", "--seed", "7", "--out", str(out)]) == 0
    res = report(out)["results"]
    assert res["bounds"]["B"] == 5062.5
    assert res["lower_bound_ok"] and res["envelope_ok"]
    assert res["final_phi_gammabar_mean"] >= res["bounds"]["utility_lower_bound"]
    table = rows(out / "trace.csv")
    assert len(table) == 100_001
    head = table[0]
    assert head[:6] == ["t", "w_manager", "w_p1", "w_p2", "a_p1", "a_p2"]
    assert {"Z_p1", "Q_p2", "sumJ_p1", "norm", "gbar"} <= set(head)
    assert (out / "trace.png").exists()


def test_special_engine_trace_columns(tmp_path):
    args = ["run-dpp", "@fig1", "--engine", "special", "--T", "200", "--seeds", "2", "--no-plots", "--out", str(tmp_path)]
    assert main(args) == 0
    head = rows(tmp_path / "trace.csv")[0]
    assert "Q_p1^gamma" in head and "Q_p2^beta" in head
    assert len(rows(tmp_path / "runs.csv")) == 3
    assert not list(tmp_path.glob("*.png"))


def test_sweep_v(tmp_path):
    args = ["sweep-v", "@fig1", "--V", "50", "100", "--T", "2000", "--seeds", "2", "--out", str(tmp_path)]
    assert main(args) == 0
    table = rows(tmp_path / "sweep.csv")
    assert [r[0] for r in table[1:]] == ["50", "100"]
    assert (tmp_path / "sweep.png").exists()


def test_sweep_v_workers_match_serial(tmp_path):
    base = ["sweep-v", "@fig1", "--V", "50", "100", "--T", "2000", "--no-plots"]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--workers", "2", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_extract_policy(tmp_path):
    assert main(["extract-policy", "@weather", "--V", "100", "--T", "50000", "--out", str(tmp_path)]) == 0
    res = report(tmp_path)["results"]
    assert res["certification"]["cce"]["worst_violation"] <= 0.05 * res["max_cap"]


def test_outputs_are_byte_identical_across_reruns(tmp_path, monkeypatch):
    args = ["run-dpp", "@weather", "--V", "20", "--T", "3000"]
    for name in ("a", "b"):
        monkeypatch.setenv("LYAPGAME_OUT", str(tmp_path / name))
        assert main(args) == 0
    for f in ("report.json", "trace.csv", "trace.png"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


@pytest.mark.parametrize(
    "args, code, category",
    [
        (["validate", "/nonexistent.game"], 2, "parse"),
        (["run-dpp", "@fig1", "--fairness", "log(u1)"], 3, "validation"),
        (["run-dpp", "@weather", "--engine", "special"], 3, "validation"),
        (["certify", "@fig1"], 3, "validation"),
    ],
)
def test_error_exit_codes(tmp_path, capsys, args, code, category):
    assert main(args + ["--out", str(tmp_path)]) == code
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == category


def test_bad_csv_header_is_a_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n")
    assert main(["certify", "@fig1", "--pmf", str(bad), "--out", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "parse"


def test_enumeration_overflow_is_reported(tmp_path):
    big = tmp_path / "big.game"
    big.write_text(
        "[players]\np1 = a b c\np2 = x y\n[events]\np1 = " + " ".join(f"e{k}" for k in range(9))
        + "\n[pmf]\nproduct\np1 = " + " ".join(["0.125"] * 8 + ["0"]) + "\n[utilities]\np1: a x = 1\n"
    )
    assert main(["validate", str(big), "--out", str(tmp_path)]) == 0
    assert report(tmp_path)["results"]["constraint_counts"]["stochastic"]["virtual_static_cce_built"] is None


def test_size_cap_exit_code(tmp_path, capsys):
    huge = tmp_path / "huge.game"
    labels = " ".join(f"a{k}" for k in range(1001))
    huge.write_text(f"[players]\np1 = {labels}\np2 = {labels}\n[utilities]\np1: a0 a0 = 1\n")
    assert main(["run-dpp", str(huge), "--T", "10", "--out", str(tmp_path)]) == 5
    assert json.loads(capsys.readouterr().err)["error"] == "size-cap"
