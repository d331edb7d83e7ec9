"""Command-line experiment runner.

Writes ``ledger.csv`` (one row per round), ``summary.csv`` (one row per seed)
and ``metadata.json`` to the output directory. See ``docs/formats.md`` for
the column lists.
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__, losses
from .aggregating import (AggregatingRegressor, as_label_weights, comparator_losses,
                          theoretical_regret_bound)
from .bandit import OBAMA
from .baselines import OnlineGradientDescent, OnlineNewtonStep
from .batch import boost_confidence
from .boosting import hedge_bound, run_cheating_boost
from .datagen import (RandomGuesser, binary_to_class, lower_bound_mistakes, margin_adversary,
                      margin_stream, stochastic_stream, verify_shattering)
from .sampler import SamplerBudgetError, SamplerConfig
from .weights import WeightSet

EXPERIMENTS = ("regret", "bandit", "boosting", "batch", "lowerbound")


@dataclass
class ExperimentConfig:
    experiment: str = None
    d: int = 1
    K: int = 2
    B: float = 2.0
    R: float = 1.0
    L: float = 1.0
    n: int = 500
    mu: float = None
    delta: float = 0.1
    N: int = 4
    gamma: float = None
    sampler: str = "grid"
    grid_points: int = 129
    m: int = 64
    steps: int = 200
    eta: float = None
    seeds: str = "1"
    out: str = "results"
    weight_set: str = "pinned"
    stream: str = "stochastic"
    noise: float = 0.0

    def seed_list(self):
        text = str(self.seeds).strip()
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        return list(range(int(text)))

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        for name in ("d", "K", "n", "N", "m", "steps", "grid_points"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        for name in ("B", "R", "L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mu is not None and not 0.0 <= self.mu <= 0.5:
            raise ValueError("mu must lie in [0, 1/2]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.sampler not in ("grid", "langevin"):
            raise ValueError("sampler must be grid or langevin")
        if self.weight_set not in ("pinned", "ball"):
            raise ValueError("weight_set must be pinned or ball")
        if self.stream not in ("stochastic", "margin"):
            raise ValueError("stream must be stochastic or margin")
        if self.stream == "margin" and (self.d != 1 or self.K != 2):
            raise ValueError("the margin stream needs d = 1 and K = 2")
        if not self.seed_list():
            raise ValueError("no seeds given")
        return self

    def sampler_config(self, seed=0):
        return SamplerConfig(method=self.sampler, m=self.m, steps=self.steps,
                             step_size=self.eta, grid_points=self.grid_points, seed=seed)

    def make_weight_set(self):
        return WeightSet(self.K, self.d, self.B, kind=self.weight_set)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key, value):
    kind = _TYPES[key]
    if value is None or value == "":
        return None
    if kind is int or kind == "int":
        return int(value)
    if kind is float or kind == "float":
        return float(value)
    return str(value)


def read_config_file(path):
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TYPES:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _convert(key, value)
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="ilr", description=__doc__.splitlines()[0])
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat key=value file; flags override it")
    for name in ("d", "K", "n", "N", "m", "steps"):
        p.add_argument(f"--{name}", type=int)
    for name in ("B", "R", "L", "mu", "delta", "gamma", "eta", "noise"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--sampler", choices=("grid", "langevin"))
    p.add_argument("--weight-set", dest="weight_set", choices=("pinned", "ball"))
    p.add_argument("--stream", choices=("stochastic", "margin"))
    p.add_argument("--seeds", help="a count (0..S-1) or a comma-separated list")
    p.add_argument("--out", help="output directory")
    return p


def resolve_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return ExperimentConfig(**values)


# -- experiments ----------------------------------------------------------

def _realizable_matrix(ws, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return ws.matrix(ws.sample_uniform(rng))


def _comparator_params(ws, cfg):
    if ws.dim <= 4:
        return ws.grid(cfg.grid_points if ws.dim <= 2 else 13)
    rng = np.random.default_rng(0)
    return ws.sample_uniform(rng, 2000)


def run_regret(cfg, seed):
    ws = cfg.make_weight_set()
    if cfg.stream == "margin":
        gamma = cfg.gamma if cfg.gamma is not None else min(1.0, math.log(cfg.n) / cfg.B)
        X, yb = margin_stream(cfg.n, gamma, seed=seed)
        labels = np.array([binary_to_class(v) for v in yb])
    else:
        W = _realizable_matrix(ws, seed)
        s = stochastic_stream(W, cfg.d, cfg.K, cfg.n, cfg.noise, seed, cfg.R)
        X, labels = s.X, s.y
    mu = 1.0 / cfg.n if cfg.mu is None else cfg.mu
    learner = AggregatingRegressor(ws, mu=mu, L=cfg.L, sampler=cfg.sampler_config(seed))
    ogd = OnlineGradientDescent(ws, R=cfg.R)
    ons = OnlineNewtonStep(ws, R=cfg.R)
    Y = np.array([as_label_weights(y, cfg.K) for y in labels])

    rows = []
    totals = np.zeros(3)
    for t, (x, y) in enumerate(zip(X, Y), start=1):
        z = learner.predict(x)
        loss = float(losses.weighted_logistic_loss(z, y))
        learner.update(x, y)
        l_ogd = float(losses.weighted_logistic_loss(ogd.step(x, y), y))
        l_ons = float(losses.weighted_logistic_loss(ons.step(x, y), y))
        totals += (loss, l_ogd, l_ons)
        rows.append([seed, t, int(np.argmax(y)), loss, float(np.max(np.abs(z))),
                     None, l_ogd, l_ons])
    if cfg.sampler == "grid":
        comp_params = learner.grid
    else:
        # a sampled comparator set, plus the final proper iterates
        comp_params = np.vstack([_comparator_params(ws, cfg), ogd.theta, ons.theta])
    comp = comparator_losses(ws, comp_params, X, Y)
    best = int(np.argmin(comp.sum(axis=0)))
    for row, c in zip(rows, comp[:, best]):
        row[5] = float(c)
    comparator_total = float(comp[:, best].sum())
    bound = theoretical_regret_bound(ws.dim, cfg.L, cfg.B, cfg.R, cfg.n, mu)
    summary = {
        "seed": seed, "n": cfg.n, "learner_loss": totals[0],
        "comparator_loss": comparator_total, "regret": totals[0] - comparator_total,
        "bound_continuous": bound, "bound_with_grid_slack": bound + math.log(len(comp_params)),
        "bound_finite": math.log(len(comp_params)) + 2.0 + 2.0 * mu * cfg.n,
        "max_abs_logit": learner.max_abs_logit,
        "logit_bound": math.log(cfg.K / mu) if mu > 0 else math.inf,
        "ogd_regret": totals[1] - comparator_total, "ons_regret": totals[2] - comparator_total,
    }
    return rows, summary


def run_bandit(cfg, seed):
    ws = cfg.make_weight_set()
    W = _realizable_matrix(ws, seed)
    s = stochastic_stream(W, cfg.d, cfg.K, cfg.n, cfg.noise, seed, cfg.R)
    learner = OBAMA(ws, cfg.n, R=cfg.R, mu=cfg.mu, sampler=cfg.sampler_config(seed), seed=seed)
    rows = []
    mistakes = 0
    for t, (x, y) in enumerate(s, start=1):
        r = learner.round(x, y)
        mistakes += r.mistake
        rows.append([seed, t, int(y), r.y_hat, int(r.mistake), float(r.p[r.y_hat]),
                     float(r.y_tilde.sum()), int(r.resmoothed)])
    comparator = float(np.sum(losses.logistic_loss(s.X @ W.T, s.y)))
    st = learner.settings
    d, K = cfg.d, cfg.K
    sqrt_term = math.sqrt(d * K * K * math.log(cfg.B * cfg.R * cfg.n / (d * K) + math.e) * cfg.n)
    summary = {
        "seed": seed, "n": cfg.n, "mistakes": mistakes, "comparator_loss": comparator,
        "mu": learner.mu, "L": learner.L, "bound_exp": st.bound_exp,
        "bound_sqrt": st.bound_sqrt, "mistake_bound": comparator + st.bound,
        "shape_bound_c10": comparator + 10.0 * sqrt_term,
        "resmoothings": learner.resmoothings,
    }
    return rows, summary


def run_boosting(cfg, seed):
    gamma = 0.2 if cfg.gamma is None else cfg.gamma
    booster = run_cheating_boost(cfg.K, cfg.N, cfg.n, gamma, seed=seed, keep_rows=True)
    lg = booster.ledger
    rows = [[seed, t, i_t, y_hat, y, mistake] + list(map(int, em)) + list(map(float, edges))
            for t, i_t, y_hat, y, mistake, em, edges in lg.rows]
    summary = {
        "seed": seed, "n": cfg.n, "N": cfg.N, "gamma": gamma, "mistakes": lg.mistakes,
        "error": lg.mistakes / cfg.n, "min_expert_mistakes": int(lg.expert_mistakes.min()),
        "hedge_bound": hedge_bound(lg.expert_mistakes, cfg.N, cfg.delta),
        "cost_violations": lg.cost_violations, "max_abs_score": lg.max_abs_score,
        "score_bound": math.log(cfg.n * cfg.K),
    }
    return rows, summary


# A fixed four-point distribution on [-1, 1] with logistic labels.
BATCH_XS = np.array([-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0])
BATCH_W = 1.5


def discrete_problem(w_star=BATCH_W, xs=BATCH_XS):
    """Joint probabilities ``P[x, y]`` of the batch experiment (labels 0 and 1)."""
    p0 = 1.0 / (1.0 + np.exp(-w_star * xs))
    return np.stack([p0, 1.0 - p0], axis=1) / len(xs)


def discrete_risk(joint, probs):
    return float(-(joint * np.log(probs)).sum())


def best_discrete_risk(joint, B, xs=BATCH_XS, points=200_001):
    w = np.linspace(-B, B, points)
    z = np.stack([w[:, None] * xs[None, :], np.zeros((points, len(xs)))], axis=-1)
    return float(np.min(-(joint[None] * losses.log_softmax(z)).sum(axis=(1, 2))))


def run_batch(cfg, seed):
    ws = WeightSet.pinned(2, 1, cfg.B)
    joint = discrete_problem()
    rng = np.random.default_rng(seed)
    xi = rng.choice(len(BATCH_XS), size=cfg.n)
    X = BATCH_XS[xi][:, None]
    Y = (rng.uniform(size=cfg.n) * joint[xi].sum(axis=1) > joint[xi, 0]).astype(int)

    M = math.ceil(math.log(2.0 / cfg.delta))
    chunk = cfg.n // (2 * M)

    def factory():
        return AggregatingRegressor(ws, n=max(chunk, 1), sampler=cfg.sampler_config(seed))

    def regret_fn(m):
        return theoretical_regret_bound(ws.dim, 1.0, cfg.B, 1.0, m, mu=1.0 / m)

    g = boost_confidence(X, Y, cfg.delta, factory, regret_fn, seed=seed)
    probs = np.array([g.predict_proba(np.array([x])) for x in BATCH_XS])
    risk = discrete_risk(joint, probs)
    best = best_discrete_risk(joint, cfg.B)
    rows = [[seed, i + 1, float(x), float(probs[i, 0]), float(probs[i, 1])]
            for i, x in enumerate(BATCH_XS)]
    summary = {"seed": seed, "n": cfg.n, "delta": cfg.delta, "M": len(g.predictors),
               "mu": g.mu, "risk": risk, "best_risk": best, "gap": risk - best,
               "min_prob": float(probs.min()), "floor": g.mu / 2.0}
    return rows, summary


def run_lowerbound(cfg, seed):
    gamma = 1e-3 if cfg.gamma is None else cfg.gamma
    learner = RandomGuesser(seed)
    inst, mistakes = margin_adversary(cfg.d, gamma, learner, seed=seed)
    rows = [[seed, t] + [float(v) for v in x] + [int(y)]
            for t, (x, y) in enumerate(zip(inst.X, inst.y), start=1)]
    n = len(inst.y)
    B = math.log(max(n, 2)) / gamma
    summary = {"seed": seed, "n": n, "d": cfg.d, "gamma": gamma, "mistakes": mistakes,
               "shattered": int(verify_shattering(inst)),
               "lower_bound": lower_bound_mistakes(cfg.d, gamma),
               "comparator_loss_bound": n * math.log1p(math.exp(-gamma * B))}
    return rows, summary


RUNNERS = {"regret": run_regret, "bandit": run_bandit, "boosting": run_boosting,
           "batch": run_batch, "lowerbound": run_lowerbound}


def ledger_header(cfg):
    if cfg.experiment == "regret":
        return ["seed", "t", "y", "loss", "max_abs_logit", "comparator_loss",
                "ogd_loss", "ons_loss"]
    if cfg.experiment == "bandit":
        return ["seed", "t", "y", "y_hat", "mistake", "p_y_hat", "y_tilde_l1", "resmoothed"]
    if cfg.experiment == "boosting":
        return (["seed", "t", "i_t", "y_hat", "y", "mistake"]
                + [f"expert_mistakes_{i + 1}" for i in range(cfg.N)]
                + [f"edge_{i + 1}" for i in range(cfg.N)])
    if cfg.experiment == "batch":
        return ["seed", "x_index", "x", "g_0", "g_1"]
    return ["seed", "t"] + [f"x{j + 1}" for j in range(cfg.d + 1)] + ["y"]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _run_one(args):
    cfg, seed = args
    return RUNNERS[cfg.experiment](cfg, seed)


def run(cfg):
    """Run every seed and write the three output files. Returns the summaries."""
    cfg.validate()
    seeds = cfg.seed_list()
    workers = max(1, min(int(os.environ.get("ILR_THREADS", "1")), len(seeds)))
    jobs = [(cfg, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "ledger.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ledger_header(cfg))
        for rows, _ in results:
            w.writerows([[_fmt(v) for v in row] for row in rows])
    summaries = [s for _, s in results]
    with open(os.path.join(cfg.out, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(summaries[0]))
        for s in summaries:
            w.writerow([_fmt(v) for v in s.values()])
    meta = {"version": __version__, "config": asdict(cfg), "seeds": seeds,
            "sampler": asdict(cfg.sampler_config()),
            "baselines": {"ogd_c": cfg.B / (2.0 * cfg.R * math.sqrt(2.0)),
                          "ons_alpha": math.exp(-cfg.B * cfg.R),
                          "ons_projection_iters": 50, "ons_projection_tol": 1e-8}}
    with open(os.path.join(cfg.out, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return summaries


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    if cfg.experiment is None:
        parser.error("--experiment is required (on the command line or in --config)")
    try:
        cfg.validate()
    except ValueError as exc:
        parser.error(str(exc))
    try:
        summaries = run(cfg)
    except SamplerBudgetError as exc:
        print(f"ilr: sampler budget exceeded: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"ilr: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(summaries)} run(s) to {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
