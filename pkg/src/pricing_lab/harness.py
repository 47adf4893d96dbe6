"""Environment construction, episode execution, replication, aggregation.

Everything an experiment needs sits in one config: the pricing problem,
the context law, the offline log recipe, the policy roster, and the
replication counts. Replications are independent given the master seed;
each owns counter-derived random streams, so reps can run on any thread
layout and reduce to identical aggregates.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import policies as pol
from . import rngs
from .model import Context, DemandParams, ProblemSpec, step_regret
from .offline import (OfflineDataset, OfflineSummary, build_summary,
                      estimate_delta_sq, generate_offline, make_biased_params)
from .samplers import ContextSampler

__all__ = [
    "PolicyConfig",
    "ExperimentConfig",
    "RegretTrace",
    "PolicyAggregate",
    "ExperimentResult",
    "Environment",
    "make_problem",
    "default_config",
    "build_env",
    "run_episode",
    "run_experiment",
    "bias_sweep",
    "SweepRow",
    "measure_instance",
    "write_trace_csv",
    "write_aggregate_csv",
    "write_sweep_csv",
    "revenue_range_bound",
]

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class PolicyConfig:
    """One roster entry: a policy kind plus its keyword parameters."""

    kind: str
    name: Optional[str] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in pol.POLICY_KINDS:
            raise ValueError("unknown policy kind %r (known: %s)"
                             % (self.kind, ", ".join(pol.POLICY_KINDS)))
        if self.name is None:
            object.__setattr__(self, "name", self.kind)


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ProblemSpec
    sampler: ContextSampler
    T: int
    N: int
    reps: int
    master_seed: int
    v_true: float
    v_bound: float
    policies: Tuple[PolicyConfig, ...]
    param_scale: float = 1.0
    alpha_coord_range: Tuple[float, float] = (0.5, 1.0)
    beta_coord_range: Tuple[float, float] = (0.5, 1.0)
    price_scheme: str = "uniform"
    fixed_price: Optional[float] = None
    delta_mc_samples: int = 4000
    grid_size: int = 512

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if self.v_true < 0:
            raise ValueError("v_true must be nonnegative")
        if self.v_bound < 0:
            raise ValueError("v_bound must be nonnegative")
        if not self.policies:
            raise ValueError("policy roster is empty")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ValueError("duplicate policy names: %s" % names)


@dataclass(frozen=True)
class RegretTrace:
    """Pathwise regret of one policy over one replication."""

    policy: str
    rep: int
    instant: np.ndarray   # (T,) step regret, each >= 0
    cum: np.ndarray       # (T,) exact prefix sums of instant

    @property
    def final(self) -> float:
        return float(self.cum[-1])


@dataclass(frozen=True)
class PolicyAggregate:
    name: str
    mean_cum: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    finals: np.ndarray    # (reps,)

    @property
    def mean_final(self) -> float:
        return float(self.mean_cum[-1])


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    traces: Tuple[RegretTrace, ...]
    aggregates: Tuple[PolicyAggregate, ...]

    def aggregate(self, name: str) -> PolicyAggregate:
        for a in self.aggregates:
            if a.name == name:
                return a
        raise KeyError("no aggregate for policy %r" % name)


@dataclass(frozen=True)
class Environment:
    """Everything one replication is run against. Policies never see this."""

    theta_star: DemandParams
    theta_prime: DemandParams
    offline: Optional[OfflineDataset]   # None when the config has N = 0
    summary: Optional[OfflineSummary]
    xs: np.ndarray        # (T, d1) online contexts
    ys: np.ndarray        # (T, d2)
    noise: np.ndarray     # (T,) demand noise
    spec: ProblemSpec


def make_problem(d1: int, d2: int, param_scale: float, noise_R: float,
                 sampler: ContextSampler,
                 alpha_coord_range: Tuple[float, float] = (0.5, 1.0),
                 beta_coord_range: Tuple[float, float] = (0.5, 1.0),
                 v_allow: float = 0.0,
                 bound_slack: float = 1.15) -> ProblemSpec:
    """ProblemSpec whose interval bounds come from the parameter sampler support.

    alpha coords are drawn uniform on alpha_coord_range scaled by
    param_scale/sqrt(d1); beta coords the same with a minus sign. The
    l/u bounds on alpha'x and |beta'y| then follow from the context
    sampler's support. Norm caps get bound_slack of headroom plus v_allow
    so biased parameters up to distance v_allow stay admissible.
    """
    a_lo, a_hi = alpha_coord_range
    b_lo, b_hi = beta_coord_range
    if not (0 < a_lo <= a_hi and 0 < b_lo <= b_hi):
        raise ValueError("coordinate ranges must be positive and ordered")
    A = param_scale
    # alpha'x = sum_i U_i W_i A / d1 with U ~ alpha_coord_range and W the
    # raw x_range draw, so the 1/sqrt(d1) scalings cancel; same for beta'y.
    x_lo, x_hi = sampler.x_range
    y_lo, y_hi = sampler.y_range
    return ProblemSpec(
        d1=d1, d2=d2,
        alpha_max=bound_slack * (A * a_hi + v_allow),
        beta_max=bound_slack * (A * b_hi + v_allow),
        x_max=sampler.x_max, y_max=sampler.y_max, y_min=sampler.y_min,
        l_alpha=a_lo * A * x_lo, u_alpha=a_hi * A * x_hi,
        l_beta=b_lo * A * y_lo, u_beta=b_hi * A * y_hi,
        noise_R=noise_R,
        lambda_min_Exx=sampler.lambda_min_exx,
    )


def default_config(d1: int = 5, d2: int = 1, T: int = 1000, N: int = 1000,
                   reps: int = 20, master_seed: int = 0, v_true: float = 0.1,
                   v_bound: float = 0.11, param_scale: float = 1.0,
                   noise_R: float = 0.1,
                   policies: Sequence[PolicyConfig] = (),
                   **kwargs) -> ExperimentConfig:
    """Convenience constructor wiring sampler, spec, and config together."""
    sampler = ContextSampler(d1=d1, d2=d2)
    spec = make_problem(d1, d2, param_scale, noise_R, sampler,
                        v_allow=kwargs.pop("v_allow", v_true))
    if not policies:
        policies = (PolicyConfig("ucb"), PolicyConfig("clairvoyant"))
    return ExperimentConfig(spec=spec, sampler=sampler, T=T, N=N, reps=reps,
                            master_seed=master_seed, v_true=v_true,
                            v_bound=v_bound, policies=tuple(policies),
                            param_scale=param_scale, **kwargs)


def _sample_theta_star(cfg: ExperimentConfig, rng: np.random.Generator) -> DemandParams:
    a_lo, a_hi = cfg.alpha_coord_range
    b_lo, b_hi = cfg.beta_coord_range
    A = cfg.param_scale
    d1, d2 = cfg.spec.d1, cfg.spec.d2
    alpha = rng.uniform(a_lo, a_hi, d1) * (A / math.sqrt(d1))
    beta = -rng.uniform(b_lo, b_hi, d2) * (A / math.sqrt(d2))
    return DemandParams(alpha=alpha, beta=beta)


def build_env(cfg: ExperimentConfig, rep: int, variant: int = 0) -> Environment:
    """Deterministic environment for one replication.

    variant keys the offline-data streams only; sweeps use it to redraw
    offline logs while the online model and context path stay fixed.
    """
    theta_star = _sample_theta_star(cfg, rngs.stream(cfg.master_seed, rep, rngs.THETA))
    if cfg.v_true > 0:
        dir_rng = rngs.stream(cfg.master_seed, rep, rngs.BIAS_DIR, variant)
        direction = dir_rng.standard_normal(cfg.spec.d)
        theta_prime = make_biased_params(theta_star, cfg.v_true, direction,
                                         cfg.spec)
    else:
        theta_prime = theta_star
    if cfg.N > 0:
        off_rng = rngs.stream(cfg.master_seed, rep, rngs.OFFLINE, variant)
        offline = generate_offline(theta_prime, cfg.spec, cfg.N,
                                   cfg.price_scheme, cfg.sampler, off_rng,
                                   fixed_price=cfg.fixed_price)
        summary = build_summary(offline)
    else:
        offline, summary = None, None
    ctx_rng = rngs.stream(cfg.master_seed, rep, rngs.ONLINE_CTX)
    xs, ys = cfg.sampler.draw_batch(ctx_rng, cfg.T)
    noise_rng = rngs.stream(cfg.master_seed, rep, rngs.ONLINE_NOISE)
    noise = noise_rng.standard_normal(cfg.T) * cfg.spec.noise_R
    return Environment(theta_star=theta_star, theta_prime=theta_prime,
                       offline=offline, summary=summary, xs=xs, ys=ys,
                       noise=noise, spec=cfg.spec)


def _build_policy(pc: PolicyConfig, env: Environment, cfg: ExperimentConfig,
                  rep: int, idx: int, variant: int) -> pol.PolicyHandle:
    spec = cfg.spec
    params = dict(pc.params)

    def take(key, default):
        return params.pop(key, default)

    def done():
        if params:
            raise ValueError("policy %r: unknown parameter(s) %s"
                             % (pc.name, sorted(params)))

    prng = rngs.policy_stream(cfg.master_seed, rep, idx, variant)
    kind = pc.kind
    if env.offline is None and kind in ("co3", "gco3", "rco3", "ts_offline",
                                        "greedy_offline"):
        raise ValueError("policy %r needs offline data but the config has N = 0"
                         % pc.name)
    if kind in ("co3", "gco3", "ucb", "ucb_offline"):
        ccfg = pol.Co3Config(
            T=cfg.T,
            v_bound=float(take("v_bound", cfg.v_bound)),
            lam=float(take("lam", 1.0)),
            eps=take("eps", None),
            grid_size=int(take("grid_size", cfg.grid_size)),
            restarts=int(take("restarts", 4)),
        )
        done()
        if kind == "co3":
            fit_rng = rngs.stream(cfg.master_seed, rep, rngs.FIT_MULTISTART, variant)
            return pol.co3_new(env.offline, env.summary, ccfg, spec, fit_rng=fit_rng)
        if kind == "gco3":
            return pol.gco3_new(env.offline, env.summary, ccfg, spec)
        if kind == "ucb":
            return pol.ucb_new(ccfg, spec)
        data = env.offline if cfg.N > 0 else None
        summ = env.summary if cfg.N > 0 else None
        return pol.ucb_offline_new(data, summ, ccfg, spec)
    if kind == "rco3":
        rcfg = pol.Rco3Config(
            T=cfg.T,
            alpha_exp=float(take("alpha_exp", 0.25)),
            lam=float(take("lam", 1.0)),
            eps=take("eps", None),
            grid_size=int(take("grid_size", cfg.grid_size)),
            test_scale=float(take("test_scale", 1.0)),
        )
        done()
        return pol.rco3_new(env.offline, env.summary, rcfg, spec, prng)
    if kind == "ts":
        scale = float(take("prior_cov_scale", 1.0))
        sigma = float(take("noise_sigma", spec.noise_R))
        done()
        return pol.ts_new(np.zeros(spec.d), scale, sigma, spec, prng)
    if kind == "ts_offline":
        lam = float(take("lam", 1.0))
        scale = float(take("prior_cov_scale", 1.0))
        sigma = float(take("noise_sigma", spec.noise_R))
        done()
        return pol.ts_offline_new(env.offline, env.summary, lam, sigma, spec,
                                  prng, prior_cov_scale=scale)
    if kind == "greedy_offline":
        done()
        return pol.greedy_offline_new(env.summary, spec)
    if kind == "clairvoyant":
        done()
        return pol.clairvoyant_new(env.theta_star, spec)
    raise ValueError("unknown policy kind %r" % kind)


def run_episode(policy: pol.PolicyHandle, env: Environment, T: int,
                rep: int = 0, name: Optional[str] = None) -> RegretTrace:
    """Drive one policy through T rounds; the policy sees (ctx, p, D) only."""
    theta_star = env.theta_star
    spec = env.spec
    alpha, beta = theta_star.alpha, theta_star.beta
    instant = np.empty(T)
    for t in range(T):
        ctx = Context(env.xs[t], env.ys[t])
        p = policy.choose_price(ctx)
        demand = float(alpha @ ctx.x + (beta @ ctx.y) * p + env.noise[t])
        policy.observe(ctx, p, demand)
        instant[t] = step_regret(theta_star, p, ctx, spec)
    return RegretTrace(policy=name or policy.kind, rep=rep, instant=instant,
                       cum=np.cumsum(instant))


def revenue_range_bound(spec: ProblemSpec, T: int) -> float:
    """Global cap T*u*(u_alpha + u_beta*u) on any cumulative regret."""
    return T * spec.u * (spec.u_alpha + spec.u_beta * spec.u)


def _run_rep(cfg: ExperimentConfig, rep: int, variant: int,
             env: Optional[Environment] = None) -> List[RegretTrace]:
    if env is None:
        env = build_env(cfg, rep, variant)
    cap = revenue_range_bound(cfg.spec, cfg.T)
    out = []
    for idx, pc in enumerate(cfg.policies):
        handle = _build_policy(pc, env, cfg, rep, idx, variant)
        trace = run_episode(handle, env, cfg.T, rep=rep, name=pc.name)
        if trace.final > cap + 1e-9:
            raise RuntimeError(
                "policy %r rep %d: cumulative regret %.6g exceeds the revenue "
                "range bound %.6g" % (pc.name, rep, trace.final, cap))
        out.append(trace)
    return out


def _aggregate(cfg: ExperimentConfig,
               per_rep: List[List[RegretTrace]]) -> Tuple[PolicyAggregate, ...]:
    aggs = []
    for idx, pc in enumerate(cfg.policies):
        cums = np.stack([per_rep[r][idx].cum for r in range(cfg.reps)])
        mean = cums.mean(axis=0)
        if cfg.reps > 1:
            sem = cums.std(axis=0, ddof=1) / math.sqrt(cfg.reps)
        else:
            sem = np.zeros_like(mean)
        aggs.append(PolicyAggregate(name=pc.name, mean_cum=mean,
                                    band_low=mean - 2.0 * sem,
                                    band_high=mean + 2.0 * sem,
                                    finals=cums[:, -1].copy()))
    return tuple(aggs)


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   variant: int = 0) -> ExperimentResult:
    """All reps of all policies, reduced in rep order regardless of threads."""
    if threads < 1:
        raise ValueError("threads must be at least 1")
    reps = range(cfg.reps)
    if threads == 1:
        per_rep = [_run_rep(cfg, r, variant) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_rep = list(ex.map(lambda r: _run_rep(cfg, r, variant), reps))
    traces = tuple(tr for rep_traces in per_rep for tr in rep_traces)
    return ExperimentResult(config=cfg, traces=traces,
                            aggregates=_aggregate(cfg, per_rep))


@dataclass(frozen=True)
class SweepRow:
    policy: str
    v_true_sq: float
    mean_final_regret: float
    std_final_regret: float


def bias_sweep(cfg: ExperimentConfig, v_true_sq_grid: Sequence[float],
               threads: int = 1) -> List[SweepRow]:
    """One run_experiment per squared-bias grid point.

    The online model and context paths are shared across grid points (the
    theta-star and online streams ignore the variant); only the bias
    direction and offline log are redrawn per point.
    """
    rows: List[SweepRow] = []
    for i, v_sq in enumerate(v_true_sq_grid):
        if v_sq < 0:
            raise ValueError("squared bias must be nonnegative, got %g" % v_sq)
        point_cfg = replace(cfg, v_true=math.sqrt(v_sq))
        result = run_experiment(point_cfg, threads=threads, variant=i)
        for agg in result.aggregates:
            finals = agg.finals
            std = float(finals.std(ddof=1)) if finals.size > 1 else 0.0
            rows.append(SweepRow(policy=agg.name, v_true_sq=float(v_sq),
                                 mean_final_regret=float(finals.mean()),
                                 std_final_regret=std))
    return rows


def measure_instance(cfg: ExperimentConfig, rep: int = 0,
                     variant: int = 0) -> Dict[str, float]:
    """Per-run diagnostics for the manifest: dispersion, bias, offline gap."""
    env = build_env(cfg, rep, variant)
    out = {
        "lam_min_offline_gram": env.summary.lam_min if env.summary else 0.0,
        "v_true": cfg.v_true,
        "theta_gap": float(np.linalg.norm(env.theta_prime.as_vector()
                                          - env.theta_star.as_vector())),
    }
    if cfg.spec.d2 == 1 and env.summary is not None and env.summary.a_hat is not None:
        rng = rngs.stream(cfg.master_seed, rep, rngs.DELTA_MC, variant)
        d2, se = estimate_delta_sq(env.summary, env.theta_star, cfg.sampler,
                                   cfg.spec, cfg.delta_mc_samples, rng)
        out["delta_sq"] = d2
        out["delta_sq_se"] = se
    return out


# ---------------------------------------------------------------------------
# CSV output


def write_trace_csv(path, traces: Sequence[RegretTrace]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("policy,rep,t,instant_regret,cum_regret\n")
        for tr in traces:
            for t in range(tr.instant.shape[0]):
                fh.write("%s,%d,%d,%s,%s\n"
                         % (tr.policy, tr.rep, t + 1,
                            _FLOAT_FMT % tr.instant[t], _FLOAT_FMT % tr.cum[t]))


def write_aggregate_csv(path, aggregates: Sequence[PolicyAggregate]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("policy,t,mean_cum_regret,band_low,band_high\n")
        for agg in aggregates:
            for t in range(agg.mean_cum.shape[0]):
                fh.write("%s,%d,%s,%s,%s\n"
                         % (agg.name, t + 1, _FLOAT_FMT % agg.mean_cum[t],
                            _FLOAT_FMT % agg.band_low[t],
                            _FLOAT_FMT % agg.band_high[t]))


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("policy,v_true_sq,mean_final_regret,std_final_regret\n")
        for row in rows:
            fh.write("%s,%s,%s,%s\n"
                     % (row.policy, _FLOAT_FMT % row.v_true_sq,
                        _FLOAT_FMT % row.mean_final_regret,
                        _FLOAT_FMT % row.std_final_regret))
