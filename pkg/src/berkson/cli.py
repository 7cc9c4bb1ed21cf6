"""Command-line front end.

Every subcommand reads one JSON config schema (``--config``); flags override
config keys one to one.  Artifacts go to the ``--out`` directory together
with a ``manifest.json`` that records the config hash, seed, version,
timestamps and output paths.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import acceptance
from . import harness as hz
from .convolution import QUADRATURE, ANALYTIC, admissible_domain, convolve, curve
from .errors import BerksonError
from .estimators import WidehistConfig, actpass, majority_bisection, widehist
from .function_class import MarginParams, make_power
from .lowerbound import ACTIVE, PASSIVE, kl_report, make_pair, rate_from_kl, verify_gap_scaling
from .oracle import NoisyOracle

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3
COMMANDS = ("convolve", "estimate", "rates", "lowerbound", "gapscan", "selftest")


class ConfigError(Exception):
    """Malformed or incomplete configuration; the message names the key path."""


# -- config schema ------------------------------------------------------------


def _number(path, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}: expected a positive number, got {v!r}")
    if nonneg and not v >= 0:
        raise ConfigError(f"{path}: expected a non-negative number, got {v!r}")
    return float(v)


def _integer(path, v, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int) and not (isinstance(v, float) and v.is_integer()):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}: expected an integer >= {minimum}, got {v}")
    return v


def _int_list(path, v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [_integer(path, v, 1)]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected an integer or a non-empty list of integers")
    return [_integer(f"{path}[{i}]", x, 1) for i, x in enumerate(v)]


def _num_list(path, v, positive=True):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [_number(path, v, positive=positive)]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected a number or a non-empty list of numbers")
    return [_number(f"{path}[{i}]", x, positive=positive) for i, x in enumerate(v)]


def _choice(options):
    def check(path, v):
        if v not in options:
            raise ConfigError(f"{path}: expected one of {list(options)}, got {v!r}")
        return v

    return check


def _threshold(path, v):
    if isinstance(v, dict):
        if set(v) != {"randomized"}:
            raise ConfigError(f"{path}: expected a number or {{\"randomized\": [lo, hi]}}")
        lo, hi = _num_list(f"{path}.randomized", v["randomized"], positive=False)
        return hz.Randomized(lo, hi)
    return _number(path, v)


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true or false, got {v!r}")
    return v


SCHEMA = {
    "mode": _choice((PASSIVE, ACTIVE)),
    "k": lambda p, v: _number(p, v, positive=True),
    "c": lambda p, v: _number(p, v, positive=True),
    "C": lambda p, v: _number(p, v, positive=True),
    "sigma": lambda p, v: _number(p, v, nonneg=True),
    "gamma": lambda p, v: _number(p, v, positive=True),
    "t": _threshold,
    "n": _int_list,
    "trials": lambda p, v: _integer(p, v, 1),
    "seed": lambda p, v: _integer(p, v, 0),
    "a": lambda p, v: _num_list(p, v, positive=False),
    "sigma_grid": _num_list,
    "a_grid": _num_list,
    "method": _choice((ANALYTIC, QUADRATURE)),
    "n_points": lambda p, v: _integer(p, v, 2),
    "delta": lambda p, v: _number(p, v, positive=True),
    "kappa": lambda p, v: _number(p, v, positive=True),
    "crossing": _choice(("interpolate", "center")),
    "tolerance": lambda p, v: _number(p, v, positive=True),
    "quick": _bool,
}

FLAG_KEYS = ("seed", "trials", "n", "sigma", "k", "mode", "c", "C", "t", "gamma", "a")


def validate(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    out = {}
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"config.{key}: unknown key")
        out[key] = SCHEMA[key](f"config.{key}", value)
    return out


def require(cfg: dict, *keys: str):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError("config." + missing[0] + ": required (set it in --config or with a flag)")


def load_config(args) -> tuple[dict, dict]:
    """Merge the JSON config with flag overrides; return (raw, validated)."""
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"--config: cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--config: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON object")
    for key in FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    if getattr(args, "quick", False):
        raw["quick"] = True
    return raw, validate(raw)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _list_flag(text: str):
    parts = [p for p in text.split(",") if p.strip()]
    vals = [_parse_value(p.strip()) for p in parts]
    return vals if len(vals) != 1 else vals[0]


# -- manifest and atomic writes -----------------------------------------------


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical (sorted-key) JSON form of ``cfg``."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    config_hash: str
    seed: int | None
    tool_version: str
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    command: str = ""
    timings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2)


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Outputs:
    def __init__(self, directory: str):
        self.dir = Path(directory)
        self.paths: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        write_atomic(path, text)
        self.paths.append(str(path))
        return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(header)
    for row in rows:
        out.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# -- subcommands -----------------------------------------------------------------


def _margin(cfg, sigma=None) -> MarginParams:
    return MarginParams(k=cfg["k"], c=cfg["c"], C=cfg.get("C", 1.0), sigma=cfg["sigma"] if sigma is None else sigma)


def _estimator_config(cfg) -> WidehistConfig:
    kw = {key: cfg[key] for key in ("delta", "kappa", "crossing") if key in cfg}
    return WidehistConfig(**kw)


def cmd_convolve(cfg, out: Outputs) -> int:
    require(cfg, "k", "c", "sigma", "t")
    m = make_power(_margin(cfg), cfg["t"])
    sigma = cfg["sigma"]
    rows = curve(m, sigma, cfg.get("n_points", 401))
    if cfg.get("method") == QUADRATURE:
        rows[:, 2] = convolve(m, sigma, method=QUADRATURE)(rows[:, 0])
    out.write("convolve.csv", _csv_text(("w", "m", "F"), rows.tolist()))
    return EXIT_OK


def _single_n(cfg) -> int:
    ns = cfg["n"]
    if len(ns) != 1:
        raise ConfigError("config.n: expected a single sample size for this command")
    return ns[0]


def cmd_estimate(cfg, out: Outputs) -> int:
    require(cfg, "mode", "k", "c", "sigma", "n", "t")
    if isinstance(cfg["t"], hz.Randomized):
        raise ConfigError("config.t: estimate needs a fixed threshold")
    n = _single_n(cfg)
    m = make_power(_margin(cfg), cfg["t"])
    oracle = NoisyOracle(m, n, seed=cfg.get("seed", 0), stream=0)
    sigma, est = cfg["sigma"], _estimator_config(cfg)
    if cfg["mode"] == PASSIVE:
        trace = widehist(oracle.passive_batch(n), sigma, cfg["k"], cfg["c"], oracle.domain, est)
    elif sigma == 0:
        trace = majority_bisection(oracle, n, cfg["c"], est.delta)
    else:
        trace = actpass(oracle, n, cfg["k"], cfg["c"], est)
    body = trace.to_dict()
    body["t"] = cfg["t"]
    body["error"] = abs(trace.t_hat - cfg["t"])
    out.write("estimate.json", _dumps(body))
    log = oracle.log
    out.write("queries.csv", _csv_text(("trial_id", "step", "w", "y"),
                                       [(0, i, float(w), int(y)) for i, (w, y) in enumerate(zip(log.w, log.y))]))
    print(json.dumps({"t_hat": trace.t_hat, "error": body["error"]}))
    return EXIT_OK


def _sigma_law(cfg):
    if "gamma" in cfg and "sigma" in cfg:
        raise ConfigError("config.gamma: give either sigma (constant) or gamma (power law), not both")
    if "gamma" in cfg:
        return hz.PowerLaw(cfg["gamma"])
    require(cfg, "sigma")
    return hz.Constant(cfg["sigma"])


def cmd_rates(cfg, out: Outputs) -> int:
    require(cfg, "mode", "k", "c", "n")
    law = _sigma_law(cfg)
    try:
        exp_cfg = hz.ExperimentConfig(
            mode=cfg["mode"],
            k=cfg["k"],
            c=cfg["c"],
            C=cfg.get("C", 1.0),
            sigma_law=law,
            n_grid=tuple(cfg["n"]),
            trials=cfg.get("trials", 500),
            seed=cfg.get("seed", 0),
            estimator=_estimator_config(cfg),
            t=cfg.get("t", 0.0),
        )
    except BerksonError as exc:
        raise ConfigError(f"config: {exc}") from exc
    res = hz.run_sweep(exp_cfg, cfg.get("tolerance", hz.DEFAULT_TOLERANCE))
    out.write("rates.csv", hz.sweep_csv([res]))
    out.write("rates.json", hz.sweep_json([res]) + "\n")
    print(json.dumps(res.fit.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_lowerbound(cfg, out: Outputs) -> int:
    require(cfg, "k", "c", "sigma")
    k, c, C, sigma = cfg["k"], cfg["c"], cfg.get("C", 1.0), cfg["sigma"]
    summary: dict = {"k": k, "c": c, "C": C, "sigma": sigma}
    if "a" in cfg:
        n = _single_n(cfg) if "n" in cfg else 1
        reports = []
        for a in cfg["a"]:
            pair = make_pair(k, sigma, a, c, C)
            rep = kl_report(pair, n)
            reports.append({"a": a, "n": n, **rep.to_dict()})
        summary["kl_reports"] = reports
        pair = make_pair(k, sigma, cfg["a"][-1], c, C)
        lo, hi = admissible_domain(sigma)
        w = np.linspace(lo, hi, cfg.get("n_points", 2001))
        f0, f1 = pair.F0(w), pair.F1(w)
        out.write("gap_curve.csv", _csv_text(("w", "F0", "F1", "gap"), np.column_stack([w, f0, f1, np.abs(f1 - f0)]).tolist()))
    if "n" in cfg and "mode" in cfg:
        summary["rates"] = [{"n": n, "mode": cfg["mode"], "a_star": rate_from_kl(k, sigma, n, cfg["mode"], c, C)}
                            for n in cfg["n"]]
    if "kl_reports" not in summary and "rates" not in summary:
        raise ConfigError("config.a: give separations a, or sample sizes n together with mode")
    out.write("lowerbound.json", _dumps(summary))
    return EXIT_OK


def cmd_gapscan(cfg, out: Outputs) -> int:
    require(cfg, "k", "c", "sigma_grid", "a_grid")
    rep = verify_gap_scaling(cfg["k"], cfg["c"], cfg.get("C", 1.0), sorted(cfg["sigma_grid"]), sorted(cfg["a_grid"]))
    out.write("gapscan.json", rep.to_json() + "\n")
    out.write("gapscan.csv", _csv_text(("sigma", "a", "regime", "gap", "predicted", "ratio"),
                                       [(x.sigma, x.a, x.regime, x.gap, x.predicted, x.ratio) for x in rep.cells]))
    return EXIT_OK if rep.passed else EXIT_RUNTIME


def cmd_selftest(cfg, out: Outputs, timings: dict) -> int:
    seed, quick = cfg.get("seed", 0), cfg.get("quick", False)
    results = acceptance.run_all(seed=seed, quick=quick)
    for r in results:
        print(r.line())
        timings[f"criterion_{r.number}"] = round(r.seconds, 3)
    body = {"seed": seed, "quick": quick, "criteria": [r.to_dict() for r in results]}
    if quick:
        body["smoke"] = acceptance.smoke_sweep(seed)
    out.write("selftest.json", _dumps(body))
    out.write("selftest.csv", _csv_text(("criterion", "title", "passed", "summary"),
                                        [(r.number, r.title, r.passed, r.summary) for r in results]))
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


# -- entry point -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="berkson", description="Threshold learning under Berkson feature noise.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="berkson-out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--n", type=_list_flag, help="sample size(s), comma separated")
        p.add_argument("--sigma", type=float)
        p.add_argument("--gamma", type=float, help="power-law noise sigma_n = n^-gamma")
        p.add_argument("--k", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--C", type=float)
        p.add_argument("--mode", choices=(PASSIVE, ACTIVE))
        p.add_argument("--t", type=float)
        p.add_argument("--a", type=_list_flag, help="separation(s), comma separated")
        if name == "selftest":
            p.add_argument("--quick", action="store_true", help="deterministic criteria only")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        raw, cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Outputs(args.out)
    manifest = RunManifest(config_hash(raw), cfg.get("seed"), _version(), _now(), command=args.command)
    handlers = {
        "convolve": cmd_convolve,
        "estimate": cmd_estimate,
        "rates": cmd_rates,
        "lowerbound": cmd_lowerbound,
        "gapscan": cmd_gapscan,
    }
    try:
        if args.command == "selftest":
            code = cmd_selftest(cfg, out, manifest.timings)
        else:
            code = handlers[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BerksonError, ArithmeticError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest.finished = _now()
    manifest.outputs = list(out.paths)
    write_atomic(out.dir / "manifest.json", manifest.to_json() + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
