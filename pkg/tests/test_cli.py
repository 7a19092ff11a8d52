import json

import pytest

from qimlab.cli import main

TINY = ["--n", "16", "--trials", "3", "--iters", "400", "--seed", "5", "--threads", "2"]


def _read(path):
    return path.read_bytes()


# ---------------------------------------------------------------------------
# success-rate
# ---------------------------------------------------------------------------

def test_success_rate_schema_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["success-rate", "--model", "qim2", "--ratio", "8", *TINY]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    csv1 = out1 / "success_rate.csv"
    assert csv1.exists() and (out1 / "success_rate.png").exists()
    lines = csv1.read_text().splitlines()
    assert lines[0] == "model,n,m,trials,successes,rate"
    model, n, m, trials, succ, rate = lines[1].split(",")
    assert (model, n, m, trials) == ("qim2", "16", "128", "3")
    assert 0.0 <= float(rate) <= 1.0
    assert _read(csv1) == _read(out2 / "success_rate.csv")


def test_success_rate_no_plot(tmp_path):
    out = tmp_path / "o"
    assert main(["success-rate", "--model", "qim3", "--ratio", "8", "--no-plot",
                 *TINY, "--out", str(out)]) == 0
    assert not (out / "success_rate.png").exists()


def test_success_rate_cdp(tmp_path):
    out = tmp_path / "o"
    assert main(["success-rate", "--model", "qim3", "--kind", "cdp", "--field",
                 "complex", "--ratio", "8", "--no-plot", *TINY,
                 "--out", str(out)]) == 0
    lines = (out / "success_rate.csv").read_text().splitlines()
    assert lines[1].split(",")[2] == "128"   # m = L * n


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def test_convergence_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["convergence", "--model", "qim2,wf", "--ratio", "8",
                 "--tol", "1e-10", *TINY, "--out", str(out)]) == 0
    for name in ("qim2", "wf"):
        lines = (out / f"convergence_{name}.csv").read_text().splitlines()
        assert lines[0] == "iter,rel_error"
        first_it, first_rel = lines[1].split(",")
        assert first_it == "0" and float(first_rel) > 0
    assert (out / "convergence.png").exists()


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

def test_noise_outputs(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["noise", "--model", "qim3", "--ratio", "8", "--snr", "40",
            "--snr", "60", *TINY]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    lines = (out1 / "noise.csv").read_text().splitlines()
    assert lines[0] == "model,snr_db,trials,mse_db"
    assert len(lines) == 3
    rows = [ln.split(",") for ln in lines[1:]]
    mse = {float(r[1]): float(r[3]) for r in rows}
    assert mse[40.0] > mse[60.0]          # worse at lower SNR
    fit = json.loads((out1 / "noise_fit.json").read_text())
    assert "qim3" in fit["slope_mse_per_snr_db"]
    assert _read(out1 / "noise.csv") == _read(out2 / "noise.csv")
    assert _read(out1 / "noise_fit.json") == _read(out2 / "noise_fit.json")


# ---------------------------------------------------------------------------
# landscape
# ---------------------------------------------------------------------------

def test_landscape_pass_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["landscape", "--model", "qim2", "--n", "24", "--ratio", "10",
            "--trials", "3", "--iters", "400", "--seed", "2"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    report = json.loads((out1 / "landscape_report.json").read_text())
    assert report["violations"] == []
    assert report["m"] == 240 and not report["below_threshold"]
    assert _read(out1 / "landscape_report.json") == _read(out2 / "landscape_report.json")


def test_landscape_undersampled_warns_but_passes(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["landscape", "--model", "qim2", "--n", "24", "--m", "24",
                 "--trials", "2", "--iters", "100", "--seed", "3",
                 "--out", str(out)])
    assert code == 0
    report = json.loads((out / "landscape_report.json").read_text())
    assert report["below_threshold"]
    if report["violations"]:
        assert "below-threshold" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# oracle-check
# ---------------------------------------------------------------------------

def test_oracle_check_tiny_samples(tmp_path):
    out = tmp_path / "o"
    assert main(["oracle-check", "--samples", "1000", "--seed", "4",
                 "--out", str(out)]) == 0
    report = json.loads((out / "oracle_report.json").read_text())
    assert report["all_pass"]
    names = {c["name"] for c in report["checks"]}
    assert "erfc_refined_bounds" in names


# ---------------------------------------------------------------------------
# config handling and exit codes
# ---------------------------------------------------------------------------

def test_invalid_model_exits_2(tmp_path):
    assert main(["success-rate", "--model", "nope", "--out", str(tmp_path)]) == 2


def test_zero_trials_exits_2(tmp_path):
    assert main(["success-rate", "--model", "qim2", "--trials", "0",
                 "--out", str(tmp_path)]) == 2


def test_bad_beta_exits_2(tmp_path):
    assert main(["oracle-check", "--beta", "-1", "--out", str(tmp_path)]) == 2


def test_cdp_fractional_ratio_exits_2(tmp_path):
    assert main(["success-rate", "--model", "qim2", "--kind", "cdp",
                 "--ratio", "2.5", "--out", str(tmp_path)]) == 2


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 2


def test_config_file_merge_flags_win(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"models": "qim2", "n": 16, "ratios": [8.0],
                               "trials": 2, "iters": 300, "seed": 9,
                               "plot": False}))
    out = tmp_path / "o"
    assert main(["success-rate", "--config", str(cfg), "--trials", "3",
                 "--out", str(out)]) == 0
    lines = (out / "success_rate.csv").read_text().splitlines()
    assert lines[1].split(",")[3] == "3"    # flag overrode the file
    assert not (out / "success_rate.png").exists()   # file setting kept


def test_config_file_invalid_json_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{nope")
    assert main(["success-rate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
