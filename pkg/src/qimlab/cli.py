"""Command-line harness for the experiments and certification suites.

Subcommands
-----------
``success-rate``   empirical recovery rate versus m/n        -> success_rate.csv (+ .png)
``convergence``    relative error per iteration, one instance -> convergence_<algo>.csv (+ .png)
``noise``          MSE (dB) versus SNR (dB)                  -> noise.csv (+ .png)
``landscape``      landscape certification report            -> landscape_report.json
``oracle-check``   closed-form / inequality / MC report      -> oracle_report.json

Configuration can come from a JSON file (``--config``); explicit CLI flags
win over file values, which win over the built-in defaults.  Every command
is deterministic given (config, seed): per-trial streams are derived by
hashing the master seed with the trial coordinates, so reruns produce
byte-identical CSV/JSON regardless of ``--threads``.

Exit codes: 0 success, 1 a certified check failed, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import ConfigError, NonFinite, QimlabError
from .landscape import run_landscape_suite
from .losses import QimModel
from .measurements import add_amplitude_noise, gen_cdp_ensemble, gen_gaussian_ensemble, intensities
from .optim import (default_config, gradient_descent, random_init,
                    wirtinger_flow_baseline)
from .oracles import run_oracle_suite
from .rng import child_seed, stream

KNOWN_MODELS = ("qim1", "qim2", "qim3", "wf")

DEFAULTS = {
    "success-rate": dict(models="qim2,qim3", n=128, ratios=[x / 2 for x in range(2, 21)],
                         trials=100, iters=2500, tol=1e-5),
    "convergence": dict(models="qim2,qim3,wf", n=128, ratios=[6.0], trials=1,
                        iters=2500, tol=1e-12),
    "noise": dict(models="qim2,qim3", n=128, ratios=[8.0], trials=10, iters=2500,
                  tol=1e-5, snr=[20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0]),
    "landscape": dict(models="qim2", n=64, ratios=[10.0], trials=50, iters=2500,
                      tol=1e-5),
    "oracle-check": dict(),
}


@dataclass
class ExperimentConfig:
    command: str
    models: List[str] = dc_field(default_factory=list)
    n: int = 128
    ratios: List[float] = dc_field(default_factory=list)
    m: Optional[int] = None
    trials: int = 100
    iters: int = 2500
    tol: float = 1e-5
    seed: int = 1
    snr: List[float] = dc_field(default_factory=list)
    out: Path = Path("qimlab_out")
    threads: int = 0
    field: str = "real"
    kind: str = "gaussian"
    plot: bool = True
    samples: int = 1_000_000
    beta: float = 1.0

    def validate(self) -> None:
        for name in self.models:
            if name not in KNOWN_MODELS:
                raise ConfigError(f"unknown model {name!r}; choose from {KNOWN_MODELS}")
        if self.command == "landscape" and self.models and self.models[0] == "wf":
            raise ConfigError("the landscape suite applies to qim models, not wf")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.iters < 1:
            raise ConfigError("iters must be at least 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.samples < 1000:
            raise ConfigError("samples must be at least 1000")
        if self.field not in ("real", "complex"):
            raise ConfigError("field must be 'real' or 'complex'")
        if self.kind not in ("gaussian", "cdp"):
            raise ConfigError("kind must be 'gaussian' or 'cdp'")
        if self.m is not None:
            if self.m < 1:
                raise ConfigError("m must be at least 1")
        else:
            for r in self.ratios:
                if not r > 0:
                    raise ConfigError("ratios must be positive")
                if self.kind == "cdp" and abs(r - round(r)) > 1e-12:
                    raise ConfigError("cdp ratios are mask counts and must be integers")
        if self.command in ("success-rate", "convergence", "noise") and not self.models:
            raise ConfigError("at least one model is required")

    def m_grid(self) -> List[int]:
        if self.m is not None:
            return [self.m]
        return [int(round(r * self.n)) for r in self.ratios]


def _merge_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    merged = dict(DEFAULTS.get(command, {}))
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        merged.update(file_cfg)
    for key in ("models", "n", "ratios", "m", "trials", "iters", "tol", "seed",
                "snr", "out", "threads", "field", "kind", "plot", "samples", "beta"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    models = merged.get("models", "")
    if isinstance(models, str):
        models = [s.strip() for s in models.split(",") if s.strip()]
    cfg = ExperimentConfig(
        command=command,
        models=list(models),
        n=int(merged.get("n", 128)),
        ratios=[float(r) for r in merged.get("ratios", [])],
        m=None if merged.get("m") is None else int(merged["m"]),
        trials=int(merged.get("trials", 100)),
        iters=int(merged.get("iters", 2500)),
        tol=float(merged.get("tol", 1e-5)),
        seed=int(merged.get("seed", 1)),
        snr=[float(s) for s in merged.get("snr", [])],
        out=Path(merged.get("out", "qimlab_out")),
        threads=int(merged.get("threads", 0) or os.cpu_count() or 1),
        field=str(merged.get("field", "real")),
        kind=str(merged.get("kind", "gaussian")),
        plot=bool(merged.get("plot", True)),
        samples=int(merged.get("samples", 1_000_000)),
        beta=float(merged.get("beta", 1.0)),
    )
    cfg.validate()
    return cfg


def _write_csv(path: Path, header: List[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [repr(float(v)) if isinstance(v, float) else str(v) for v in row]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _qim_model(name: str) -> QimModel:
    if name == "qim1":
        return QimModel.qim1(drop_singular=True)
    if name == "qim2":
        return QimModel.qim2()
    if name == "qim3":
        return QimModel.qim3()
    raise ConfigError(f"not a qim model: {name}")


def _make_instance(cfg: ExperimentConfig, m: int, seed: int):
    """Ensemble, signal and noiseless data for one trial."""
    if cfg.kind == "cdp":
        L = m // cfg.n
        E = gen_cdp_ensemble(cfg.n, L, seed, field=cfg.field)
    else:
        E = gen_gaussian_ensemble(cfg.n, m, cfg.field, seed)
    g_x = stream(seed, 5)
    if cfg.field == "complex":
        x = g_x.standard_normal(cfg.n) + 1j * g_x.standard_normal(cfg.n)
    else:
        x = g_x.standard_normal(cfg.n)
    return E, x


def _run_one(cfg: ExperimentConfig, name: str, m: int, seed: int,
             snr: Optional[float] = None):
    E, x = _make_instance(cfg, m, seed)
    if snr is None:
        y = intensities(E, x).y
    else:
        y = add_amplitude_noise(E, x, snr, seed=seed).y
    if name == "wf":
        gd = default_config("intensity", max_iters=cfg.iters, tol=cfg.tol)
        return wirtinger_flow_baseline(E, y, x, gd, power_iters=50, seed=seed)
    model = _qim_model(name)
    gd = default_config(name, max_iters=cfg.iters, tol=cfg.tol)
    u0 = random_init(cfg.n, cfg.field, seed)
    return gradient_descent(model, E, y, x, gd, u0)


def _map_trials(cfg: ExperimentConfig, fn, indices):
    if cfg.threads <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, indices))


def cmd_success_rate(cfg: ExperimentConfig) -> int:
    rows = []
    for name in cfg.models:
        for m in cfg.m_grid():
            def trial(t, name=name, m=m):
                seed = child_seed(cfg.seed, 70, m, t)
                try:
                    return _run_one(cfg, name, m, seed).converged
                except NonFinite:
                    return False
            results = _map_trials(cfg, trial, range(cfg.trials))
            successes = int(sum(results))
            rows.append((name, cfg.n, m, cfg.trials, successes,
                         successes / cfg.trials))
    _write_csv(cfg.out / "success_rate.csv",
               ["model", "n", "m", "trials", "successes", "rate"], rows)
    if cfg.plot:
        from .plots import save_success_rate_plot
        save_success_rate_plot(rows, cfg.out / "success_rate.png")
    return 0


def cmd_convergence(cfg: ExperimentConfig) -> int:
    from .optim import export_trajectory_csv
    m = cfg.m_grid()[0]
    trajectories = {}
    for name in cfg.models:
        seed = child_seed(cfg.seed, 72, m)
        try:
            res = _run_one(cfg, name, m, seed)
        except NonFinite as exc:
            print(f"warning: {name} diverged: {exc}", file=sys.stderr)
            continue
        export_trajectory_csv(res, cfg.out / f"convergence_{name}.csv")
        trajectories[name] = res.trajectory
    if cfg.plot and trajectories:
        from .plots import save_convergence_plot
        save_convergence_plot(trajectories, cfg.out / "convergence.png")
    return 0


def cmd_noise(cfg: ExperimentConfig) -> int:
    if not cfg.snr:
        raise ConfigError("the noise command needs at least one SNR value")
    m = cfg.m_grid()[0]
    rows = []
    slopes = {}
    for name in cfg.models:
        pts = []
        for snr in cfg.snr:
            def trial(t, name=name, snr=snr):
                seed = child_seed(cfg.seed, 71, int(round(snr * 1000)), t)
                try:
                    res = _run_one(cfg, name, m, seed, snr=snr)
                except NonFinite:
                    return None
                return 20.0 * np.log10(max(res.final_dist_rel, 1e-300))
            vals = [v for v in _map_trials(cfg, trial, range(cfg.trials)) if v is not None]
            mse = float(np.mean(vals)) if vals else float("nan")
            rows.append((name, float(snr), len(vals), mse))
            pts.append((snr, mse))
        finite = [(s, v) for s, v in pts if np.isfinite(v)]
        if len(finite) >= 2:
            A = np.vstack([[s for s, _ in finite], np.ones(len(finite))]).T
            slope = float(np.linalg.lstsq(A, np.array([v for _, v in finite]),
                                          rcond=None)[0][0])
            slopes[name] = slope
    _write_csv(cfg.out / "noise.csv", ["model", "snr_db", "trials", "mse_db"], rows)
    if slopes:
        _write_json(cfg.out / "noise_fit.json",
                    json.dumps({"slope_mse_per_snr_db": slopes}, sort_keys=True,
                               indent=2) + "\n")
    if cfg.plot:
        from .plots import save_noise_plot
        save_noise_plot(rows, cfg.out / "noise.png")
    return 0


def cmd_landscape(cfg: ExperimentConfig) -> int:
    if cfg.field != "real":
        raise ConfigError("landscape certification runs on the real field only")
    model = _qim_model(cfg.models[0] if cfg.models else "qim2")
    gd = default_config(model.variant, max_iters=cfg.iters, tol=cfg.tol)
    report = run_landscape_suite(model, n=cfg.n, m=cfg.m_grid()[0], seed=cfg.seed,
                                 census_trials=cfg.trials, census_cfg=gd)
    _write_json(cfg.out / "landscape_report.json", report.to_json())
    if report.violations:
        if report.below_threshold:
            print("warning: sign checks failed in the below-threshold regime "
                  f"(m = {report.m} < 6 n); no guarantee applies", file=sys.stderr)
            return 0
        print("landscape check failure:", "; ".join(report.violations), file=sys.stderr)
        return 1
    return 0


def cmd_oracle_check(cfg: ExperimentConfig) -> int:
    report = run_oracle_suite(mc_samples=cfg.samples, seed=cfg.seed, beta=cfg.beta)
    _write_json(cfg.out / "oracle_report.json", report.to_json())
    if not report.all_pass:
        failed = [c.name for c in report.checks if not c.ok]
        print("oracle check failure:", ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qimlab",
        description="Quotient-intensity phase retrieval experiments and certification")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("success-rate", "empirical recovery rate versus m/n"),
        ("convergence", "per-iteration relative error on one instance"),
        ("noise", "MSE versus SNR under amplitude noise"),
        ("landscape", "landscape certification report"),
        ("oracle-check", "closed-form and inequality certification report"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", dest="models", default=None,
                       help="comma-separated models (qim1|qim2|qim3|wf)")
        p.add_argument("--n", type=int, default=None, help="signal dimension")
        p.add_argument("--ratio", dest="ratios", type=float, action="append",
                       default=None, help="m/n ratio (repeatable)")
        p.add_argument("--m", type=int, default=None, help="absolute measurement count")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--iters", type=int, default=None, help="max iterations")
        p.add_argument("--tol", type=float, default=None, help="success threshold")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--snr", dest="snr", type=float, action="append", default=None,
                       help="SNR in dB (repeatable; noise command)")
        p.add_argument("--samples", type=int, default=None,
                       help="MC samples (oracle-check)")
        p.add_argument("--beta", type=float, default=None,
                       help="qim2 beta for the oracle MC comparison")
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: logical cores)")
        p.add_argument("--field", choices=("real", "complex"), default=None)
        p.add_argument("--kind", choices=("gaussian", "cdp"), default=None)
        p.add_argument("--no-plot", dest="plot", action="store_false", default=None,
                       help="skip figure rendering")
    return parser


_COMMANDS = {
    "success-rate": cmd_success_rate,
    "convergence": cmd_convergence,
    "noise": cmd_noise,
    "landscape": cmd_landscape,
    "oracle-check": cmd_oracle_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args.command, args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QimlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
