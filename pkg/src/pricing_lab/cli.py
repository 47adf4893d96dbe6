"""Command-line front end: run, sweep, and repro subcommands.

Config documents are strict JSON with exactly the top-level keys
`problem`, `offline`, `policies`, and `run`; any unrecognized key at any
level is a config error (exit 2). Runtime failures exit 3. The repro
subcommand carries the canned experiment definitions; tests import those
builders directly so there is a single source of truth.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .harness import (ExperimentConfig, PolicyConfig, SweepRow, bias_sweep,
                      build_env, make_problem, measure_instance,
                      run_experiment, write_aggregate_csv, write_sweep_csv,
                      write_trace_csv)
from .samplers import ContextSampler

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    """Anything wrong with the requested experiment, found before it runs."""


_TOP_KEYS = {"problem", "offline", "policies", "run"}
_PROBLEM_KEYS = {"d1", "d2", "param_scale", "noise_R", "alpha_coord_range",
                 "beta_coord_range", "x_range", "y_range"}
_OFFLINE_KEYS = {"N", "price_scheme", "v_true", "fixed_price"}
_RUN_KEYS = {"T", "reps", "seed", "grid_size", "delta_mc_samples"}
_POLICY_PARAM_KEYS = {
    "co3": {"v_bound", "lam", "eps", "grid_size", "restarts"},
    "gco3": {"v_bound", "lam", "eps", "grid_size", "restarts"},
    "rco3": {"alpha_exp", "lam", "eps", "grid_size", "test_scale"},
    "ucb": {"lam", "eps", "grid_size"},
    "ucb_offline": {"lam", "eps", "grid_size"},
    "ts": {"prior_cov_scale", "noise_sigma"},
    "ts_offline": {"lam", "prior_cov_scale", "noise_sigma"},
    "greedy_offline": set(),
    "clairvoyant": set(),
}
_PRICE_SCHEMES = ("uniform", "fixed", "two_point")


def _require_keys(section: dict, allowed: set, label: str,
                  required: Sequence[str] = ()) -> None:
    if not isinstance(section, dict):
        raise ConfigError("%s must be an object" % label)
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError("%s: unknown key(s) %s" % (label, sorted(unknown)))
    missing = [k for k in required if k not in section]
    if missing:
        raise ConfigError("%s: missing required key(s) %s" % (label, missing))


def _as_int(value, label: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("%s must be an integer, got %r" % (label, value))
    return value


def _as_float(value, label: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("%s must be a number, got %r" % (label, value))
    return float(value)


def _as_pair(value, label: str) -> Tuple[float, float]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2):
        raise ConfigError("%s must be a pair [low, high]" % label)
    return (_as_float(value[0], label), _as_float(value[1], label))


def resolve_config(doc: dict, seed_override: Optional[int] = None,
                   v_allow_extra: float = 0.0) -> Tuple[ExperimentConfig, dict]:
    """Validate a config document; return the config and its resolved form.

    v_allow_extra widens the admissible-parameter headroom beyond the
    document's own v_true; sweeps pass the largest grid bias so one
    problem definition covers every grid point.
    """
    _require_keys(doc, _TOP_KEYS, "config",
                  required=("problem", "offline", "policies", "run"))
    prob = doc["problem"]
    _require_keys(prob, _PROBLEM_KEYS, "problem", required=("d1", "d2"))
    d1 = _as_int(prob["d1"], "problem.d1")
    d2 = _as_int(prob["d2"], "problem.d2")
    param_scale = _as_float(prob.get("param_scale", 1.0), "problem.param_scale")
    noise_R = _as_float(prob.get("noise_R", 0.1), "problem.noise_R")
    a_range = _as_pair(prob.get("alpha_coord_range", (0.5, 1.0)),
                       "problem.alpha_coord_range")
    b_range = _as_pair(prob.get("beta_coord_range", (0.5, 1.0)),
                       "problem.beta_coord_range")
    if param_scale <= 0:
        raise ConfigError("problem.param_scale must be positive")
    if noise_R < 0:
        raise ConfigError("problem.noise_R must be nonnegative")

    off = doc["offline"]
    _require_keys(off, _OFFLINE_KEYS, "offline", required=("N", "v_true"))
    n_off = _as_int(off["N"], "offline.N")
    v_true = _as_float(off["v_true"], "offline.v_true")
    scheme = off.get("price_scheme", "uniform")
    if scheme not in _PRICE_SCHEMES:
        raise ConfigError("offline.price_scheme must be one of %s, got %r"
                          % (list(_PRICE_SCHEMES), scheme))
    fixed_price = off.get("fixed_price")
    if fixed_price is not None:
        fixed_price = _as_float(fixed_price, "offline.fixed_price")
    if n_off < 0:
        raise ConfigError("offline.N must be nonnegative")
    if v_true < 0:
        raise ConfigError("offline.v_true must be nonnegative")

    run = doc["run"]
    _require_keys(run, _RUN_KEYS, "run", required=("T", "reps"))
    T = _as_int(run["T"], "run.T")
    reps = _as_int(run["reps"], "run.reps")
    seed = _as_int(run.get("seed", 0), "run.seed")
    grid_size = _as_int(run.get("grid_size", 512), "run.grid_size")
    delta_mc = _as_int(run.get("delta_mc_samples", 4000),
                       "run.delta_mc_samples")
    if seed_override is not None:
        seed = seed_override

    raw_policies = doc["policies"]
    if not isinstance(raw_policies, list) or not raw_policies:
        raise ConfigError("policies must be a nonempty array")
    policies: List[PolicyConfig] = []
    for i, entry in enumerate(raw_policies):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ConfigError("policies[%d] must be an object with a 'kind'" % i)
        kind = entry["kind"]
        if kind not in _POLICY_PARAM_KEYS:
            raise ConfigError("policies[%d]: unknown kind %r (known: %s)"
                              % (i, kind, sorted(_POLICY_PARAM_KEYS)))
        allowed = _POLICY_PARAM_KEYS[kind] | {"kind", "name"}
        unknown = set(entry) - allowed
        if unknown:
            raise ConfigError("policies[%d] (%s): unknown parameter(s) %s"
                              % (i, kind, sorted(unknown)))
        params = {k: v for k, v in entry.items() if k not in ("kind", "name")}
        for k, v in params.items():
            if v is not None:
                _as_float(v, "policies[%d].%s" % (i, k))
        policies.append(PolicyConfig(kind=kind, name=entry.get("name"),
                                     params=params))

    v_bound_default = 1.1 * v_true
    v_allow = max(v_true, v_allow_extra)
    try:
        sampler_kwargs = {}
        if "x_range" in prob:
            sampler_kwargs["x_range"] = _as_pair(prob["x_range"], "problem.x_range")
        if "y_range" in prob:
            sampler_kwargs["y_range"] = _as_pair(prob["y_range"], "problem.y_range")
        sampler = ContextSampler(d1=d1, d2=d2, **sampler_kwargs)
        spec = make_problem(d1, d2, param_scale, noise_R, sampler,
                            alpha_coord_range=a_range, beta_coord_range=b_range,
                            v_allow=v_allow)
        cfg = ExperimentConfig(
            spec=spec, sampler=sampler, T=T, N=n_off, reps=reps,
            master_seed=seed, v_true=v_true, v_bound=v_bound_default,
            policies=tuple(policies), param_scale=param_scale,
            alpha_coord_range=a_range, beta_coord_range=b_range,
            price_scheme=scheme, fixed_price=fixed_price,
            delta_mc_samples=delta_mc, grid_size=grid_size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, resolved_doc(cfg)


def resolved_doc(cfg: ExperimentConfig) -> dict:
    """The normalized config document; re-parses to an equivalent run."""
    problem = {
        "d1": cfg.spec.d1, "d2": cfg.spec.d2,
        "param_scale": cfg.param_scale, "noise_R": cfg.spec.noise_R,
        "alpha_coord_range": list(cfg.alpha_coord_range),
        "beta_coord_range": list(cfg.beta_coord_range),
        "x_range": list(cfg.sampler.x_range),
        "y_range": list(cfg.sampler.y_range),
    }
    offline = {"N": cfg.N, "price_scheme": cfg.price_scheme,
               "v_true": cfg.v_true}
    if cfg.fixed_price is not None:
        offline["fixed_price"] = cfg.fixed_price
    policies = []
    for pc in cfg.policies:
        entry = {"kind": pc.kind}
        if pc.name != pc.kind:
            entry["name"] = pc.name
        entry.update(pc.params)
        if pc.kind in ("co3", "gco3") and "v_bound" not in pc.params:
            entry["v_bound"] = cfg.v_bound
        if entry.get("eps") is None:
            entry.pop("eps", None)
        policies.append(entry)
    run = {"T": cfg.T, "reps": cfg.reps, "seed": cfg.master_seed,
           "grid_size": cfg.grid_size, "delta_mc_samples": cfg.delta_mc_samples}
    return {"problem": problem, "offline": offline, "policies": policies,
            "run": run}


def parse_grid(spec_str: str, T: int) -> List[float]:
    """Squared-bias grid: either `T^{-n/D}:A..B` or comma-separated floats."""
    m = re.fullmatch(r"T\^\{-n/(\d+)\}:(\d+)\.\.(\d+)", spec_str.strip())
    if m:
        denom, lo, hi = int(m.group(1)), int(m.group(2)), int(m.group(3))
        if denom == 0 or lo > hi:
            raise ConfigError("bad grid range in %r" % spec_str)
        return [float(T) ** (-n / denom) for n in range(lo, hi + 1)]
    try:
        vals = [float(tok) for tok in spec_str.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError("cannot parse grid %r" % spec_str) from exc
    if not vals:
        raise ConfigError("empty grid %r" % spec_str)
    if any(v < 0 for v in vals):
        raise ConfigError("grid values must be nonnegative")
    return vals


def _load_doc(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config file not found: %s" % path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid JSON in %s: %s" % (path, exc)) from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object in %s" % path)
    return doc


def _thread_count(args) -> int:
    if getattr(args, "threads", None) is not None:
        n = args.threads
    else:
        raw = os.environ.get("PRICING_LAB_THREADS")
        if raw is None:
            return 1
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError("PRICING_LAB_THREADS must be an integer, got %r"
                              % raw) from exc
    if n < 1:
        raise ConfigError("thread count must be at least 1, got %d" % n)
    return n


def _preflight(cfg: ExperimentConfig, variant: int = 0) -> Dict[str, float]:
    """Build one environment up front so bad specs fail as config errors."""
    try:
        return measure_instance(cfg, rep=0, variant=variant)
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError("infeasible experiment: %s" % exc) from exc


def _write_manifest(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _single_point_rows(result) -> List[SweepRow]:
    v_sq = result.config.v_true ** 2
    rows = []
    for agg in result.aggregates:
        std = float(agg.finals.std(ddof=1)) if agg.finals.size > 1 else 0.0
        rows.append(SweepRow(policy=agg.name, v_true_sq=v_sq,
                             mean_final_regret=float(agg.finals.mean()),
                             std_final_regret=std))
    return rows


def _run_to_dir(cfg: ExperimentConfig, doc: dict, out_dir: Path,
                threads: int, extra_manifest: Optional[dict] = None) -> None:
    measured = _preflight(cfg)
    result = run_experiment(cfg, threads=threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out_dir / "trace.csv", result.traces)
    write_aggregate_csv(out_dir / "aggregate.csv", result.aggregates)
    write_sweep_csv(out_dir / "sweep.csv", _single_point_rows(result))
    payload = {"command": "run", "config": doc, "measured": measured,
               "version": __version__}
    if extra_manifest:
        payload.update(extra_manifest)
    _write_manifest(out_dir, payload)


def cmd_run(args) -> int:
    threads = _thread_count(args)
    doc = _load_doc(args.config)
    cfg, resolved = resolve_config(doc, seed_override=args.seed)
    _run_to_dir(cfg, resolved, Path(args.out), threads)
    return EXIT_OK


def cmd_sweep(args) -> int:
    threads = _thread_count(args)
    doc = _load_doc(args.config)
    run_sec = doc.get("run", {})
    T = run_sec.get("T") if isinstance(run_sec, dict) else None
    if not isinstance(T, int):
        raise ConfigError("run.T must be set to expand the grid")
    grid = parse_grid(args.grid, T)
    v_allow = math.sqrt(max(grid))
    cfg, resolved = resolve_config(doc, seed_override=args.seed,
                                   v_allow_extra=v_allow)
    for i, v_sq in enumerate(grid):
        _preflight(replace(cfg, v_true=math.sqrt(v_sq)), variant=i)
    rows = bias_sweep(cfg, grid, threads=threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out_dir / "sweep.csv", rows)
    _write_manifest(out_dir, {"command": "sweep", "config": resolved,
                              "grid": grid, "version": __version__})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Canned experiment definitions (importable; repro and the test suite share
# these builders).

FIG2A_SEED = 7
FIG2B_SEED = 11
FIG2C_SEED = 13
FIG2AB_SCALE = 70.0
FIG2AB_NOISE = 0.25
FIG2AB_LAM = 2e-4
FIG2AB_N = 20000
FIG2AB_T = 1000
FIG2AB_VTRUE_COEF = 4.0
FIG2C_T = 5000
FIG2C_N = 20000
FIG2C_LAM = 0.1
FIG2C_NOISE = 0.16
FIG2C_TEST_SCALE = 12.0
FIG2C_EPS = 0.05


def _fig2ab_config(d2: int, v_ratio: float, reps: int, seed: int,
                   lead_kind: str) -> ExperimentConfig:
    v_true = FIG2AB_VTRUE_COEF * FIG2AB_SCALE * FIG2AB_T ** (-5.0 / 16.0)
    lam = FIG2AB_LAM
    sampler = ContextSampler(d1=5, d2=d2, y_range=(0.8, 1.2))
    spec = make_problem(5, d2, FIG2AB_SCALE, FIG2AB_NOISE, sampler,
                        v_allow=v_true)
    policies = (
        PolicyConfig(lead_kind, params={"v_bound": v_ratio * v_true, "lam": lam}),
        PolicyConfig("ucb", params={"lam": lam}),
        PolicyConfig("ucb_offline", params={"lam": lam}),
        PolicyConfig("ts", params={"prior_cov_scale": FIG2AB_SCALE ** 2,
                                   "noise_sigma": FIG2AB_NOISE}),
        PolicyConfig("ts_offline", params={"lam": lam,
                                           "noise_sigma": FIG2AB_NOISE}),
    )
    return ExperimentConfig(
        spec=spec, sampler=sampler, T=FIG2AB_T, N=FIG2AB_N, reps=reps,
        master_seed=seed, v_true=v_true, v_bound=v_ratio * v_true,
        policies=policies, param_scale=FIG2AB_SCALE)


def fig2a_configs(reps: int = 20) -> Dict[str, ExperimentConfig]:
    """Scalar-elasticity comparison at tight (1.1x) and loose (10x) bias bounds."""
    return {"v_tight": _fig2ab_config(1, 1.1, reps, FIG2A_SEED, "co3"),
            "v_loose": _fig2ab_config(1, 10.0, reps, FIG2A_SEED, "co3")}


def fig2b_config(reps: int = 20) -> ExperimentConfig:
    """Vector-elasticity variant: the two-ellipsoid policy replaces the scalar one."""
    return _fig2ab_config(5, 1.1, reps, FIG2B_SEED, "gco3")


def fig2c_config(reps: int = 20) -> Tuple[ExperimentConfig, List[float]]:
    """Test-then-commit bias sweep over v_true^2 = T^{-n/5}, n = 0..9.

    Scalar instance with fixed contexts: the price sensitivity to a unit
    of parameter bias is about 3.4x the price interval width, so biases
    near the detection boundary displace the committed price across a
    good part of the interval while the online policy still resolves the
    interval well inside the horizon. That separation is what makes the
    rise-then-fall of the regret curve visible at this T.
    """
    grid = [float(FIG2C_T) ** (-n / 5.0) for n in range(10)]
    alpha_range, beta_range = (0.4, 0.6), (0.5, 0.7)
    sampler = ContextSampler(d1=1, d2=1, x_range=(2.0, 2.0), y_range=(1.0, 1.0))
    spec = make_problem(1, 1, 1.0, FIG2C_NOISE, sampler,
                        alpha_coord_range=alpha_range,
                        beta_coord_range=beta_range,
                        v_allow=math.sqrt(max(grid)))
    policies = (
        PolicyConfig("rco3", params={"alpha_exp": 0.25, "lam": FIG2C_LAM,
                                     "test_scale": FIG2C_TEST_SCALE,
                                     "eps": FIG2C_EPS}),
        PolicyConfig("ucb", params={"lam": FIG2C_LAM, "eps": FIG2C_EPS}),
    )
    cfg = ExperimentConfig(
        spec=spec, sampler=sampler, T=FIG2C_T, N=FIG2C_N, reps=reps,
        master_seed=FIG2C_SEED, v_true=math.sqrt(max(grid)), v_bound=0.0,
        policies=policies, param_scale=1.0,
        alpha_coord_range=alpha_range, beta_coord_range=beta_range)
    return cfg, grid


def cmd_repro(args) -> int:
    threads = _thread_count(args)
    out_root = Path(args.out) / args.figure
    reps = args.reps
    if args.figure == "fig2a":
        cfgs = fig2a_configs(reps=reps)
        ratios = {"v_tight": 1.1, "v_loose": 10.0}
        for label, cfg in cfgs.items():
            _run_to_dir(cfg, resolved_doc(cfg), out_root / label, threads,
                        extra_manifest={"v_over_v_true": ratios[label]})
        _write_manifest(out_root, {
            "command": "repro", "figure": "fig2a",
            "v_over_v_true": sorted(ratios.values()),
            "runs": {label: str(out_root / label) for label in cfgs},
            "version": __version__})
        return EXIT_OK
    if args.figure == "fig2b":
        cfg = fig2b_config(reps=reps)
        _run_to_dir(cfg, resolved_doc(cfg), out_root, threads,
                    extra_manifest={"figure": "fig2b"})
        return EXIT_OK
    if args.figure == "fig2c":
        cfg, grid = fig2c_config(reps=reps)
        rows = bias_sweep(cfg, grid, threads=threads)
        out_root.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(out_root / "sweep.csv", rows)
        _write_manifest(out_root, {
            "command": "repro", "figure": "fig2c", "grid": grid,
            "config": resolved_doc(cfg), "version": __version__})
        return EXIT_OK
    raise ConfigError("unknown figure %r" % args.figure)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pricing-lab",
        description="Contextual dynamic pricing with biased offline data: "
                    "seeded regret experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="bias sweep over a squared-bias grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--grid", required=True,
                         help="T^{-n/5}:0..9 or comma-separated values")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--threads", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_repro = sub.add_parser("repro", help="rebuild a canned experiment")
    p_repro.add_argument("figure", choices=("fig2a", "fig2b", "fig2c"))
    p_repro.add_argument("--out", default="repro_out")
    p_repro.add_argument("--reps", type=int, default=20)
    p_repro.add_argument("--threads", type=int, default=None)
    p_repro.set_defaults(func=cmd_repro)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        raise
    except Exception as exc:
        print("runtime error: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
