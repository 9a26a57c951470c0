"""Command-line entry points: generate, train, eval, bounds.

Every command reads a JSON config (--config), writes its outputs under
--out, and is deterministic given the seeds in the config: rerunning a
generate/train/eval chain reproduces the output files byte for byte.
The only opt-out is `eval --timings`, which fills the time_s column of
the gap table with measured wall-clock seconds instead of the
deterministic 0.0 placeholder (measured timings always go to the
timings.json sidecar either way).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import learning, model, scheduling, two_stage

__all__ = ["main", "build_parser"]

ENV_THREADS = "CO_PIPELINE_THREADS"


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _child_seeds(master_seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def _fmt_num(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


# ---------------------------------------------------------------------------
# generate


def _cmd_generate(config: dict, out: Path, seed_override, threads: int) -> int:
    app = config["application"]
    master_seed = int(config["seed"]) if seed_override is None else int(seed_override)
    out.mkdir(parents=True, exist_ok=True)
    inst_dir = out / "instances"
    inst_dir.mkdir(exist_ok=True)
    rows = []
    if app == "two_stage":
        cells = [
            (w, k, s)
            for w in config["widths"]
            for k in config["K"]
            for s in config["scenarios"]
        ]
        per_cell = int(config["per_cell"])
        bound_iters = int(config.get("bound_iters", 500))
        seeds = _child_seeds(master_seed, len(cells) * per_cell)
        pos = 0
        for width, K, n_scen in cells:
            for i in range(per_cell):
                x = two_stage.generate_instance(width, K, n_scen, seed=seeds[pos])
                pos += 1
                inst_id = f"ts_w{width}_K{K}_S{n_scen}_{i:03d}"
                two_stage.save_instance(inst_dir / f"{inst_id}.json", x)
                lb, _, _ = two_stage.lagrangian_bound(x, iters=bound_iters)
                rows.append(
                    {
                        "id": inst_id,
                        "file": f"instances/{inst_id}.json",
                        "width": width,
                        "K": K,
                        "num_scenarios": n_scen,
                        "seed": x.seed,
                        "lower_bound": lb,
                        "bound_iters": bound_iters,
                    }
                )
    elif app == "scheduling":
        cells = [(n, rho) for n in config["n"] for rho in config["rho"]]
        per_cell = int(config["per_cell"])
        seeds = _child_seeds(master_seed, len(cells) * per_cell)
        pos = 0
        for n, rho in cells:
            for i in range(per_cell):
                x = scheduling.generate_sched_instance(n, rho, seed=seeds[pos])
                pos += 1
                inst_id = f"sm_n{n}_rho{rho:g}_{i:03d}"
                scheduling.save_sched_instance(inst_dir / f"{inst_id}.json", x)
                rows.append(
                    {
                        "id": inst_id,
                        "file": f"instances/{inst_id}.json",
                        "n": n,
                        "rho": rho,
                        "seed": x.seed,
                    }
                )
    else:
        raise ValueError(f"unknown application {app!r}")
    manifest = {"application": app, "config": config, "seed": master_seed, "instances": rows}
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(rows)} instances to {out}")
    return 0


# ---------------------------------------------------------------------------
# dataset loading


def _load_dataset(dataset_dir: str):
    root = Path(dataset_dir)
    with open(root / "manifest.json") as fh:
        manifest = json.load(fh)
    app = manifest["application"]
    instances = []
    for row in manifest["instances"]:
        path = root / row["file"]
        if app == "two_stage":
            instances.append(two_stage.load_instance(path))
        else:
            instances.append(scheduling.load_sched_instance(path))
    return app, manifest, instances


# ---------------------------------------------------------------------------
# train


def _perturbation_from(config) -> model.PerturbationConfig | None:
    if not config:
        return None
    return model.PerturbationConfig(
        sigma=float(config["sigma"]),
        nsamples=int(config.get("nsamples", 20)),
        seed=int(config.get("seed", 0)),
    )


def _cmd_train(config: dict, out: Path, seed_override, threads: int) -> int:
    app, manifest, instances = _load_dataset(config["dataset"])
    if app != config.get("application", app):
        raise ValueError("config application does not match the dataset")
    method = config.get("method", "experience")
    out.mkdir(parents=True, exist_ok=True)

    if method == "experience":
        pert = _perturbation_from(config.get("perturbation"))
        if app == "two_stage":
            pairs = [
                (x, row["lower_bound"])
                for x, row in zip(instances, manifest["instances"])
            ]
            loss_cfg, train_set = two_stage.experience_loss_config(pairs, pert)
        else:
            loss_cfg = scheduling.experience_loss_config(
                instances, post=config.get("post", "ls"), perturbation=pert
            )
            train_set = instances
        learner_cfg = config.get("learner", {})
        seeds = [int(seed_override)] if seed_override is not None else [
            int(s) for s in learner_cfg.get("seeds", range(10))
        ]
        learner = learning.LearnerConfig(
            box_radius=float(learner_cfg.get("box_radius", 10.0)),
            budget=int(learner_cfg.get("budget", 1000)),
            seeds=tuple(seeds),
        )
        weights, report = learning.learn_by_experience(
            train_set, learner, loss_cfg, threads=threads
        )
    elif method == "fyl":
        if app != "two_stage":
            raise ValueError("fyl training is implemented for the two_stage application")
        fyl_cfg = config.get("fyl", {})
        bound_iters = int(fyl_cfg.get("bound_iters", 500))
        pairs = []
        for x in instances:
            _, duals, _ = two_stage.lagrangian_bound(x, iters=bound_iters)
            z = two_stage.lagrangian_heuristic(x, duals)
            completion = (
                frozenset(
                    two_stage.mst_constrained(x.graph, x.d.mean(axis=1), z.first_stage)
                )
                - z.first_stage
            )
            target = two_stage.EasySolution(
                first_stage=z.first_stage, second_stage=completion
            )
            pairs.append((x, two_stage.incidence_vector(x, target)))
        weights = learning.fyl_learn(
            pairs,
            argmin_vec=two_stage.easy_incidence,
            features_of=two_stage.features,
            epsilon=float(fyl_cfg.get("epsilon", 1.0)),
            n_z=int(fyl_cfg.get("n_z", 20)),
            steps=int(fyl_cfg.get("steps", 500)),
            rate=float(fyl_cfg.get("rate", 0.05)),
            box_radius=float(fyl_cfg.get("box_radius", 10.0)),
            seed=int(seed_override) if seed_override is not None else int(fyl_cfg.get("seed", 0)),
        )
        report = {
            "per_seed": [],
            "best_w": [float(v) for v in weights.w],
            "config_hash": learning.config_hash(config),
        }
    else:
        raise ValueError(f"unknown training method {method!r}")

    model.save_weights(out / "weights.json", weights)
    _write_json(out / "report.json", report)
    print(f"trained {method} weights -> {out / 'weights.json'}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _two_stage_algorithms(entry: dict):
    kind = entry["kind"]
    if kind == "approx_baseline":
        return lambda x, row: two_stage.evaluate_solution(x, two_stage.approx_baseline(x))
    if kind == "pipeline":
        weights = model.load_weights(entry["weights"])

        def run(x, row):
            z = two_stage.pipeline_solution(x, weights)
            return two_stage.evaluate_solution(x, z)

        return run
    if kind == "lagrangian_heuristic":
        iters = int(entry.get("iters", 500))

        def run(x, row):
            _, duals, _ = two_stage.lagrangian_bound(x, iters=iters)
            z = two_stage.lagrangian_heuristic(x, duals)
            return two_stage.evaluate_solution(x, z)

        return run
    raise ValueError(f"unknown two_stage algorithm kind {kind!r}")


def _scheduling_algorithms(entry: dict):
    kind = entry["kind"]
    if kind == "spt":
        def run(x, row):
            order = scheduling.spt_layer(x.p)
            return scheduling.evaluate_schedule(x, order)[0]

        return run
    if kind in ("pipeline", "pipeline_ls"):
        weights = model.load_weights(entry["weights"])
        post = "ls" if kind == "pipeline_ls" else "none"

        def run(x, row):
            order = scheduling.pipeline_order(x, weights, post=post)
            return scheduling.evaluate_schedule(x, order)[0]

        return run
    if kind == "pipeline_pert_ls":
        weights = model.load_weights(entry["weights"])
        sigma = float(entry.get("sigma", 1.0))
        nsamples = int(entry.get("nsamples", 150))
        seed = int(entry.get("seed", 0))

        def run(x, row):
            order = scheduling.perturbed_decode(
                x, weights, sigma=sigma, nsamples=nsamples, seed=seed, post="ls"
            )
            return scheduling.evaluate_schedule(x, order)[0]

        return run
    if kind == "brute_force":
        def run(x, row):
            return scheduling.brute_force_schedule(x)[0]

        return run
    raise ValueError(f"unknown scheduling algorithm kind {kind!r}")


def _gap_pct(cost: float, reference: float) -> float:
    den = abs(reference)
    if den < 1e-12:
        den = 1.0
    return 100.0 * (cost - reference) / den


def _cmd_eval(config: dict, out: Path, threads: int, timings: bool) -> int:
    app, manifest, instances = _load_dataset(config["dataset"])
    algorithms = config["algorithms"]
    out.mkdir(parents=True, exist_ok=True)

    runners = []
    for entry in algorithms:
        make = _two_stage_algorithms if app == "two_stage" else _scheduling_algorithms
        runners.append((entry["name"], make(entry)))

    rows = manifest["instances"]
    # cost[name][i], measured wall time in the sidecar regardless of --timings
    costs: dict[str, list[float]] = {}
    walls: dict[str, list[float]] = {}
    for name, run in runners:
        def timed(pair):
            x, row = pair
            start = time.perf_counter()
            cost = float(run(x, row))
            return cost, time.perf_counter() - start

        results = learning.parallel_map(timed, list(zip(instances, rows)), threads)
        costs[name] = [c for c, _ in results]
        walls[name] = [t for _, t in results]

    # references per instance
    references = []
    if app == "two_stage":
        references = [float(row["lower_bound"]) for row in rows]
    else:
        for i, x in enumerate(instances):
            best = min(costs[name][i] for name, _ in runners)
            if x.n <= scheduling.BRUTE_FORCE_JOB_LIMIT:
                best = min(best, scheduling.brute_force_schedule(x)[0])
            references.append(best)

    bucket_key = "width" if app == "two_stage" else "n"
    csv_path = out / "gaps.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "algorithm", "cost", "reference", "gap_pct", "time_s"])
        gaps: dict[str, list[float]] = {name: [] for name, _ in runners}
        for i, row in enumerate(rows):
            for name, _ in runners:
                gap = _gap_pct(costs[name][i], references[i])
                gaps[name].append(gap)
                wall = f"{walls[name][i]:.6f}" if timings else "0.0"
                writer.writerow(
                    [row["id"], name, _fmt_num(costs[name][i]),
                     _fmt_num(references[i]), f"{gap:.6f}", wall]
                )
        buckets = sorted({row[bucket_key] for row in rows})
        for bucket in [*buckets, "all"]:
            idx = [
                i for i, row in enumerate(rows)
                if bucket == "all" or row[bucket_key] == bucket
            ]
            for name, _ in runners:
                sel = [gaps[name][i] for i in idx]
                label = f"{bucket_key}={bucket}" if bucket != "all" else "all"
                writer.writerow(
                    [f"delta_avg[{label}]", name, "", "", f"{float(np.mean(sel)):.6f}", ""]
                )
                writer.writerow(
                    [f"delta_max[{label}]", name, "", "", f"{float(np.max(sel)):.6f}", ""]
                )
    _write_json(
        out / "timings.json",
        {name: [round(t, 6) for t in walls[name]] for name, _ in runners},
    )
    print(f"wrote gap table -> {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# bounds


def _cmd_bounds(config: dict, out: Path | None, as_json: bool) -> int:
    grid = config.get("n", [config.get("n_single", 1)])
    if isinstance(grid, int):
        grid = [grid]
    records = []
    for n in grid:
        params = learning.BoundParams(
            M=float(config["M"]),
            d=int(config["d"]),
            sigma=float(config.get("sigma", 1.0)),
            n=int(n),
            delta=float(config.get("delta", 0.05)),
            a=float(config.get("a", 0.0)),
            b=float(config.get("b", 1.0)),
            beta=int(config.get("beta", 1)),
            kappa_phi=float(config.get("kappa_phi", 1.0)),
            expectation_term=float(config.get("expectation_term", 1.0)),
        )
        records.append(
            {
                "n": int(n),
                "sigma_n": learning.sigma_n(params),
                "excess_risk_bound": learning.excess_risk_bound(params),
            }
        )
    payload = {"C": learning.constant_C(), "rows": records}
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"C = {payload['C']!r}")
        for rec in records:
            print(
                f"n={rec['n']}: sigma_n={rec['sigma_n']!r} "
                f"excess_risk_bound={rec['excess_risk_bound']!r}"
            )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bounds.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "sigma_n", "excess_risk_bound", "C"])
            for rec in records:
                writer.writerow(
                    [rec["n"], repr(rec["sigma_n"]), repr(rec["excess_risk_bound"]),
                     repr(payload["C"])]
                )
    return 0


# ---------------------------------------------------------------------------
# parser / entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="co-pipeline",
        description="Learn optimization-pipeline weights from instances alone.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "sample a dataset of instances and its manifest"),
        ("train", "fit pipeline weights on a generated dataset"),
        ("eval", "evaluate algorithms on a dataset and write the gap table"),
        ("bounds", "report the theory constants and excess-risk bounds"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="master seed override")
        cmd.add_argument(
            "--threads",
            type=int,
            default=None,
            help=f"worker threads (default: ${ENV_THREADS} or 1)",
        )
        if name == "eval":
            cmd.add_argument(
                "--timings",
                action="store_true",
                help="write measured wall times into the CSV (breaks byte-identity)",
            )
        if name == "bounds":
            cmd.add_argument("--json", action="store_true", help="print JSON to stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get(ENV_THREADS, "1"))
    try:
        config = _load_config(args.config)
        if args.command in ("generate", "train", "eval") and args.out is None:
            raise ValueError(f"{args.command} requires --out")
        out = None if args.out is None else Path(args.out)
        if args.command == "generate":
            return _cmd_generate(config, out, args.seed, threads)
        if args.command == "train":
            return _cmd_train(config, out, args.seed, threads)
        if args.command == "eval":
            return _cmd_eval(config, out, threads, args.timings)
        return _cmd_bounds(config, out, args.json)
    except KeyError as exc:
        print(f"error: missing config key {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
