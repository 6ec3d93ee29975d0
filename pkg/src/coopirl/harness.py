"""Command-line experiment harness.

    irl-harness <alg1|alg2|planners-eval|verify-ideal|build> --config FILE
                [--seeds 1,2,3] [--out DIR] [--non-interactive]

Each seed writes its own CSV; an aggregate CSV with the mean and standard
error across seeds is written after all seeds finish.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .bayesian_irl import ALG2_COLUMNS, CHAIN_COLUMNS, BayesConfig, algorithm2_rows, run_algorithm2
from .environments import (
    MazeMakerSpec,
    RandomMdpSpec,
    build_lemma3_fixture,
    build_maze_maker,
    build_random_mdp,
    build_theorem3_fixture,
    maze_start_distribution,
)
from .feasible_set import build_ideal_environment, constraints_for, random_off_plane, verify_affine_of_true
from .interactive_irl import ALG1_COLUMNS, algorithm1_rows, run_algorithm1
from .mdp_core import TwoAgentMdp
from .planners import (
    ResponseModel,
    avi_boltzmann,
    avi_eps_greedy,
    commitment_value,
    lowest_index_response,
    optimal_joint_policy,
)
from .seeding import stream

SCHEMA_VERSION = 1
SELECTORS = ("alg1", "alg2", "planners-eval", "verify-ideal", "build")
THREADS_ENV = "IRL_HARNESS_THREADS"


class ConfigError(ValueError):
    """The run configuration is malformed."""


@dataclass
class RunConfig:
    algorithm: str
    environment: dict
    follower: dict = field(default_factory=lambda: {"model": "optimal"})
    episodes: int = 50
    samples: int = 2000
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "results"
    start: object = "uniform"
    betas: list = field(default_factory=lambda: [2.0, 5.0, 10.0, 20.0])
    epsilons: list = field(default_factory=lambda: [0.0, 0.1, 0.3, 0.5])
    bayes: dict = field(default_factory=dict)
    verify: dict = field(default_factory=lambda: {"n_states": 5, "discount": 0.9, "probes": 20})
    non_interactive: bool = False
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: dict, algorithm: str | None = None) -> "RunConfig":
        data = dict(data)
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if algorithm is not None:
            data["algorithm"] = algorithm
        if data.get("algorithm") not in SELECTORS:
            raise ConfigError(f"algorithm must be one of {SELECTORS}")
        if "environment" not in data and data["algorithm"] != "verify-ideal":
            raise ConfigError("environment is required")
        data.setdefault("environment", {})
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ConfigError("seeds must be a nonempty list of nonnegative integers")
        if self.algorithm in ("alg1", "alg2") and (not isinstance(self.episodes, int) or self.episodes < 1):
            raise ConfigError("episodes must be a positive integer")
        if self.algorithm == "alg2":
            if not isinstance(self.samples, int) or self.samples < 0:
                raise ConfigError("samples must be a nonnegative integer")
            if self.follower.get("model") != "boltzmann":
                raise ConfigError("alg2 needs a boltzmann follower")
            try:
                BayesConfig(**self.bayes)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad bayes section: {exc}") from exc
        if self.algorithm == "alg1" and self.follower.get("model", "optimal") != "optimal":
            raise ConfigError("alg1 needs an optimal follower")
        try:
            ResponseModel.from_config(self.follower)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad follower section: {exc}") from exc
        if self.algorithm != "verify-ideal":
            kind = self.environment.get("kind")
            if kind not in ("random", "maze", "fixture", "file"):
                raise ConfigError("environment.kind must be random, maze, fixture or file")
            try:
                build_environment(self.environment, self.seeds[0])
            except ConfigError:
                raise
            except (TypeError, ValueError, KeyError, OSError) as exc:
                raise ConfigError(f"bad environment section: {exc}") from exc


def build_environment(env_cfg: dict, seed: int):
    """Return ``(mdp, start distribution)`` for one seed."""
    cfg = dict(env_cfg)
    kind = cfg.pop("kind")
    if kind == "random":
        cfg.setdefault("seed", seed)
        mdp = build_random_mdp(RandomMdpSpec(**cfg))
        return mdp, np.full(mdp.n_states, 1.0 / mdp.n_states)
    if kind == "maze":
        cfg.setdefault("seed", seed)
        if cfg.get("reward_cells") is not None:
            cfg["reward_cells"] = tuple(tuple(c) for c in cfg["reward_cells"])
        if "reward_values" in cfg:
            cfg["reward_values"] = tuple(cfg["reward_values"])
        spec = MazeMakerSpec(**cfg)
        return build_maze_maker(spec), maze_start_distribution(spec)
    if kind == "fixture":
        name = cfg.pop("name")
        if name == "theorem3":
            mdp = build_theorem3_fixture(**cfg)
        elif name == "lemma3":
            mdp = build_lemma3_fixture(**cfg)
        else:
            raise ConfigError(f"unknown fixture {name!r}")
        start = np.zeros(mdp.n_states)
        start[0] = 1.0
        return mdp, start
    if kind == "file":
        mdp = TwoAgentMdp.from_json(Path(cfg.pop("path")).read_text())
        return mdp, np.full(mdp.n_states, 1.0 / mdp.n_states)
    raise ConfigError(f"unknown environment kind {kind!r}")


def resolve_start(cfg: RunConfig, default: np.ndarray) -> np.ndarray:
    if cfg.start == "uniform":
        return np.full(default.size, 1.0 / default.size)
    if cfg.start == "default":
        return default
    start = np.asarray(cfg.start, dtype=float)
    if start.shape != default.shape:
        raise ConfigError("start distribution has the wrong length")
    return start


# ---------------------------------------------------------------- pipelines

def _alg1(cfg: RunConfig, seed: int):
    mdp, start = build_environment(cfg.environment, seed)
    records = run_algorithm1(mdp, resolve_start(cfg, start), cfg.episodes, seed)
    return {"main": (ALG1_COLUMNS, algorithm1_rows(records))}


def _alg2(cfg: RunConfig, seed: int):
    mdp, start = build_environment(cfg.environment, seed)
    model = ResponseModel.from_config(cfg.follower)
    records, chain = run_algorithm2(mdp, resolve_start(cfg, start), cfg.episodes, cfg.samples,
                                    model.beta, seed, BayesConfig(**cfg.bayes),
                                    interactive=not cfg.non_interactive)
    return {"main": (ALG2_COLUMNS, algorithm2_rows(records)), "chain": (CHAIN_COLUMNS, chain)}


PLANNER_COLUMNS = ("model", "parameter", "avi_return", "joint_commitment_return", "gap")


def _planners_eval(cfg: RunConfig, seed: int):
    mdp, start = build_environment(cfg.environment, seed)
    start = resolve_start(cfg, start)
    joint_pi1 = optimal_joint_policy(mdp)[0]
    rows = []
    for beta in cfg.betas:
        model = ResponseModel.boltzmann(beta)
        avi = float(start @ commitment_value(mdp, avi_boltzmann(mdp, beta).pi1, model))
        base = float(start @ commitment_value(mdp, joint_pi1, model))
        rows.append({"model": "boltzmann", "parameter": beta, "avi_return": avi,
                     "joint_commitment_return": base, "gap": avi - base})
    for eps in cfg.epsilons:
        model = ResponseModel.eps_greedy(eps)
        avi = float(start @ commitment_value(mdp, avi_eps_greedy(mdp, eps).pi1, model))
        base = float(start @ commitment_value(mdp, joint_pi1, model))
        rows.append({"model": "eps_greedy", "parameter": eps, "avi_return": avi,
                     "joint_commitment_return": base, "gap": avi - base})
    return {"main": (PLANNER_COLUMNS, rows)}


VERIFY_COLUMNS = ("n_states", "true_accepted", "affine_accepted", "off_plane_rejected",
                  "off_plane_probes_rejected", "probes")


def _verify_ideal(cfg: RunConfig, seed: int):
    N = int(cfg.verify.get("n_states", 5))
    discount = float(cfg.verify.get("discount", 0.9))
    probes = int(cfg.verify.get("probes", 20))
    rng = stream(seed, "environment")
    r_star = rng.dirichlet(np.ones(N))

    def oracle(mdp, pi1):
        return lowest_index_response(mdp.with_reward(r_star), pi1)

    true_ok = verify_affine_of_true(r_star, discount, oracle, n_probes=probes, rng=stream(seed, "objective"))
    aff_ok = verify_affine_of_true(2 * r_star + 0.1, discount, oracle, n_probes=probes,
                                   rng=stream(seed, "objective"))
    other = random_off_plane(r_star, rng)
    other_rejected = not verify_affine_of_true(other, discount, oracle, n_probes=probes,
                                               rng=stream(seed, "objective"))
    env = build_ideal_environment(r_star, discount)
    mdp = env.as_mdp()
    cs = constraints_for(mdp, np.ones((N, 1)), lowest_index_response(mdp, np.ones((N, 1))))
    rejected = sum(cs.slack(random_off_plane(r_star, rng)).min() < -1e-9 for _ in range(probes))
    return {"main": (VERIFY_COLUMNS, [{
        "n_states": N, "true_accepted": int(true_ok), "affine_accepted": int(aff_ok),
        "off_plane_rejected": int(other_rejected), "off_plane_probes_rejected": int(rejected),
        "probes": probes}])}


PIPELINES = {"alg1": _alg1, "alg2": _alg2, "planners-eval": _planners_eval, "verify-ideal": _verify_ideal}


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in columns})


def aggregate(per_seed: list, columns, key_columns) -> tuple[list, list]:
    """Mean and standard error of every non-key numeric column, matched by row position."""
    value_cols = [c for c in columns if c not in key_columns]
    out_cols = list(key_columns) + [f"{c}_{stat}" for c in value_cols for stat in ("mean", "se")] + ["n_seeds"]
    rows = []
    for i in range(min(len(r) for r in per_seed)):
        base = per_seed[0][i]
        row = {k: base[k] for k in key_columns}
        for c in value_cols:
            vals = [float(r[i][c]) for r in per_seed if r[i][c] != ""]
            n = len(vals)
            row[f"{c}_mean"] = float(np.mean(vals)) if n else ""
            row[f"{c}_se"] = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else (0.0 if n else "")
        row["n_seeds"] = len(per_seed)
        rows.append(row)
    return out_cols, rows


AGGREGATE_KEYS = {"alg1": ("episode",), "alg2": ("episode",), "planners-eval": ("model", "parameter"),
                  "verify-ideal": ("n_states",)}


def worker_count(n_jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    return max(1, min(cap, n_jobs))


def _run_one(args):
    cfg, seed = args
    return PIPELINES[cfg.algorithm](cfg, seed)


def execute(cfg: RunConfig) -> dict:
    """Run every seed, write per-seed and aggregate CSVs, return a summary."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.algorithm.replace("-", "_")
    if cfg.algorithm == "alg2" and cfg.non_interactive:
        name += "_noninteractive"
    if cfg.algorithm == "build":
        mdp, _ = build_environment(cfg.environment, cfg.seeds[0])
        path = out / f"mdp_seed{cfg.seeds[0]}.json"
        path.write_text(mdp.to_json())
        return {"files": [str(path)]}
    jobs = [(cfg, s) for s in cfg.seeds]
    workers = worker_count(len(jobs))
    if workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))      # merged in seed order
    files = []
    for seed, res in zip(cfg.seeds, results):
        for part, (cols, rows) in res.items():
            suffix = "" if part == "main" else f"_{part}"
            path = out / f"{name}{suffix}_seed{seed}.csv"
            write_csv(path, cols, rows)
            files.append(str(path))
    cols = results[0]["main"][0]
    agg_cols, agg_rows = aggregate([r["main"][1] for r in results], cols, AGGREGATE_KEYS[cfg.algorithm])
    path = out / f"{name}_aggregate.csv"
    write_csv(path, agg_cols, agg_rows)
    files.append(str(path))
    return {"files": files, "results": results}


def _parse_seeds(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irl-harness", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=SELECTORS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seeds", help="comma separated seeds, overrides the config")
    p.add_argument("--out", help="output directory, overrides the config")
    p.add_argument("--non-interactive", action="store_true",
                   help="alg2 only: keep the first commitment for every episode")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if args.seeds:
            data["seeds"] = _parse_seeds(args.seeds)
        if args.out:
            data["output_dir"] = args.out
        if args.non_interactive:
            if args.command != "alg2":
                raise ConfigError("--non-interactive applies to alg2 only")
            data["non_interactive"] = True
        cfg = RunConfig.from_dict(data, algorithm=args.command)
    except (ConfigError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = execute(cfg)
    except Exception as exc:  # noqa: BLE001 - reported to the caller as exit status 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if cfg.algorithm == "verify-ideal":
        ok = all(r["main"][1][0]["true_accepted"] and r["main"][1][0]["affine_accepted"]
                 and r["main"][1][0]["off_plane_rejected"]
                 and r["main"][1][0]["off_plane_probes_rejected"] == r["main"][1][0]["probes"]
                 for r in summary["results"])
        print(f"aff-collapse: {'pass' if ok else 'fail'}")
        if not ok:
            return 1
    for f in summary["files"]:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
