"""Experiment orchestration CLI.

One JSON config describes the benchmark problem, the gamma reference
hypermodel and a matrix of sampling runs; the subcommands materialize an
artifact tree

    <output>/problem/             manifest + whitened system
    <output>/map/<r>/             MAP estimate per hypermodel exponent
    <output>/chains/<run_id>/     thinned draws + metadata
    <output>/reports/<run_id>/    diagnostics CSV/JSON + figures

`generate`, `map`, `sample` and `diagnose` run the individual stages;
`all` chains them.  Exit codes: 0 success, 2 validation error, 3
non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts, plots
from .diagnostics import build_report, threshold_delta
from .forward import DeconvolutionConfig, build_problem
from .hypermodel import Hypermodel, match_hyperparameters
from .ias import HybridResult, HybridSchedule, hybrid_run
from .sampler import ChainConfig, run_chain, samples_to_physical, to_reparam

__all__ = ["ExperimentConfig", "RunConfig", "load_config", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    r: float
    kernel: str
    h: float
    total_steps: int
    thin: int
    seed: int
    k: float | None = None

    def chain_config(self) -> ChainConfig:
        return ChainConfig(
            kernel=self.kernel,
            h=self.h,
            k=self.k,
            total_steps=self.total_steps,
            thin=self.thin,
            seed=self.seed,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    problem: DeconvolutionConfig
    beta1: float
    vartheta1: float
    runs: tuple[RunConfig, ...]
    output_dir: str | None
    lags: int = 100
    probe_indices: tuple[int, ...] = (30, 50)
    ias_tol: float = 0.005
    ias_max_iter: int = 500

    def run(self, run_id: str) -> RunConfig:
        for run in self.runs:
            if run.run_id == run_id:
                return run
        raise ValueError(f"unknown run id {run_id!r}; configured: "
                         f"{[r.run_id for r in self.runs]}")

    def distinct_r(self) -> list[float]:
        seen: list[float] = []
        for run in self.runs:
            if run.r not in seen:
                seen.append(run.r)
        return seen


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ValueError(f"config field {where}.{key} is missing")
    return mapping[key]


def load_config(path: Path, seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config JSON document."""
    try:
        raw = artifacts.read_json(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc

    prob_raw = dict(raw.get("problem", {}))
    if "signal_jumps" in prob_raw:
        prob_raw["signal_jumps"] = tuple(
            (loc, inc) for loc, inc in prob_raw["signal_jumps"]
        )
    try:
        problem = DeconvolutionConfig(**prob_raw)
    except TypeError as exc:
        raise ValueError(f"config field problem has an unknown entry: {exc}") from exc
    if seed_override is not None:
        problem = DeconvolutionConfig(
            **{**prob_raw, "rng_seed": int(seed_override)}
        )
    problem.validate()

    ref = _require(raw, "reference", "")
    beta1 = float(_require(ref, "beta1", "reference"))
    vartheta1 = float(_require(ref, "vartheta1", "reference"))

    runs = []
    for i, run_raw in enumerate(_require(raw, "runs", "")):
        where = f"runs[{i}]"
        seed = int(_require(run_raw, "seed", where))
        if seed_override is not None:
            seed = int(seed_override) + 1 + i
        runs.append(
            RunConfig(
                run_id=str(run_raw.get("id", f"run{i}")),
                r=float(_require(run_raw, "r", where)),
                kernel=str(_require(run_raw, "kernel", where)),
                h=float(_require(run_raw, "h", where)),
                k=(float(run_raw["k"]) if run_raw.get("k") is not None else None),
                total_steps=int(_require(run_raw, "total_steps", where)),
                thin=int(run_raw.get("thin", 1)),
                seed=seed,
            )
        )
    if not runs:
        raise ValueError("config must define at least one run")
    ids = [r.run_id for r in runs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"run ids must be unique, got {ids}")
    seeds = [r.seed for r in runs]
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"run seeds must be distinct, got {seeds}")

    cfg = ExperimentConfig(
        problem=problem,
        beta1=beta1,
        vartheta1=vartheta1,
        runs=tuple(runs),
        output_dir=raw.get("output_dir"),
        lags=int(raw.get("lags", 100)),
        probe_indices=tuple(int(j) for j in raw.get("probe_indices", (30, 50))),
        ias_tol=float(raw.get("ias_tol", 0.005)),
        ias_max_iter=int(raw.get("ias_max_iter", 500)),
    )
    for j in cfg.probe_indices:
        if not 1 <= j <= problem.n:
            raise ValueError(f"probe index {j} outside 1..{problem.n}")
    for run in cfg.runs:
        run.chain_config()  # validates kernel/h/k/thinning
        # every run's hypermodel must be derivable from the reference
        match_hyperparameters(run.r, beta1, vartheta1)
    return cfg


def r_label(r: float) -> str:
    return format(r, "g")


def _schedule(cfg: ExperimentConfig, r: float) -> HybridSchedule:
    phase1 = Hypermodel(1.0, cfg.beta1, cfg.vartheta1)
    phase2 = None if r == 1.0 else match_hyperparameters(r, cfg.beta1, cfg.vartheta1)
    return HybridSchedule(
        phase1=phase1, phase2=phase2, tol=cfg.ias_tol, max_iter=cfg.ias_max_iter
    )


# -- stages ------------------------------------------------------------------


def cmd_generate(cfg: ExperimentConfig, out_root: Path) -> int:
    prob, truth = build_problem(cfg.problem)
    artifacts.save_problem(out_root / "problem", cfg.problem, prob, truth)
    print(f"problem written to {out_root / 'problem'}")
    return EXIT_OK


def cmd_map(cfg: ExperimentConfig, out_root: Path, r: float) -> int:
    problem_dir = out_root / "problem"
    if not (problem_dir / "problem.json").exists():
        raise ValueError(
            f"no problem manifest in {problem_dir}; run `hbsparse generate` first"
        )
    _, prob, _ = artifacts.load_problem(problem_dir)
    schedule = _schedule(cfg, r)
    result: HybridResult = hybrid_run(prob, schedule)
    map_dir = out_root / "map" / r_label(r)
    artifacts.save_map(map_dir, result, schedule.phase1, schedule.phase2, prob)
    status = "converged" if result.converged else "NOT converged"
    print(f"MAP r={r_label(r)}: {status}, "
          f"phase1 {len(result.phase1.states)} sweeps"
          + (f", phase2 {len(result.phase2.states)} sweeps" if result.phase2 else "")
          + f" -> {map_dir}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_sample(cfg: ExperimentConfig, out_root: Path, run_id: str) -> int:
    run = cfg.run(run_id)
    map_dir = out_root / "map" / r_label(run.r)
    if not (map_dir / "map.json").exists():
        raise ValueError(
            f"no MAP artifact at {map_dir}; run `hbsparse map` for r={r_label(run.r)}"
        )
    _, prob, _ = artifacts.load_problem(out_root / "problem")
    map_payload = artifacts.load_map(map_dir)
    hm = map_payload["final_hypermodel"]
    init = to_reparam(
        map_payload["columns"]["xi"], map_payload["columns"]["lambda"], hm.r
    )
    samples = run_chain(init, run.chain_config(), prob, hm)
    chain_dir = out_root / "chains" / run_id
    artifacts.save_samples(
        chain_dir, samples, init_provenance=str(map_dir.relative_to(out_root))
    )
    physical = samples_to_physical(samples, hm.vartheta_vec(prob.n), hm.r, prob.diff_mat)
    artifacts.save_physical(chain_dir, physical)
    print(f"chain {run_id}: acceptance {samples.acceptance_rate:.4%} "
          f"({samples.accept_count}/{samples.total_proposals}) -> {chain_dir}")
    return EXIT_OK


def cmd_diagnose(cfg: ExperimentConfig, out_root: Path, run_id: str) -> int:
    run = cfg.run(run_id)
    chain_dir = out_root / "chains" / run_id
    if not (chain_dir / "draws.csv").exists():
        raise ValueError(
            f"no chain at {chain_dir}; run `hbsparse sample --run {run_id}` first"
        )
    _, prob, truth = artifacts.load_problem(out_root / "problem")
    map_payload = artifacts.load_map(out_root / "map" / r_label(run.r))
    hm = map_payload["final_hypermodel"]
    samples, _ = artifacts.load_samples(chain_dir)
    physical = samples_to_physical(samples, hm.vartheta_vec(prob.n), hm.r, prob.diff_mat)
    report = build_report(
        samples,
        physical,
        delta=threshold_delta(cfg.beta1, cfg.vartheta1),
        lags=cfg.lags,
        probe_indices=cfg.probe_indices,
    )
    report_dir = out_root / "reports" / run_id
    artifacts.save_report(report_dir, report, samples, prob.n)
    plots.render_report_figures(report_dir, report, samples, z_true=truth.z_true)
    print(f"report {run_id}: compressibility mode {report.compress_mode}, "
          f"delta {report.delta:.6g} -> {report_dir}")
    return EXIT_OK


def cmd_all(cfg: ExperimentConfig, out_root: Path) -> int:
    code = cmd_generate(cfg, out_root)
    for r in cfg.distinct_r():
        code = max(code, cmd_map(cfg, out_root, r))
        if code == EXIT_NOT_CONVERGED:
            return code
    for run in cfg.runs:
        code = max(code, cmd_sample(cfg, out_root, run.run_id))
        code = max(code, cmd_diagnose(cfg, out_root, run.run_id))
    return code


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbsparse",
        description="Hierarchical Bayesian sparse inversion experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("generate", "build the benchmark problem and write its manifest"),
        ("map", "compute MAP estimates with the hybrid solver"),
        ("sample", "run the configured chains from the MAP estimates"),
        ("diagnose", "summarize chains into reports and figures"),
        ("all", "generate, map, sample and diagnose in one go"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--run", default=None, help="restrict to one run id")
        p.add_argument("--output", default=None, help="output directory root")
        p.add_argument(
            "--seed-override",
            type=int,
            default=None,
            help="replace the problem seed (run i gets seed+1+i)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(Path(args.config), seed_override=args.seed_override)
        out_raw = args.output or cfg.output_dir
        if out_raw is None:
            raise ValueError("no output directory: set --output or config output_dir")
        out_root = Path(out_raw)

        if args.command == "generate":
            return cmd_generate(cfg, out_root)
        if args.command == "map":
            r_values = [cfg.run(args.run).r] if args.run else cfg.distinct_r()
            return max(cmd_map(cfg, out_root, r) for r in r_values)
        if args.command == "sample":
            run_ids = [args.run] if args.run else [r.run_id for r in cfg.runs]
            return max(cmd_sample(cfg, out_root, rid) for rid in run_ids)
        if args.command == "diagnose":
            run_ids = [args.run] if args.run else [r.run_id for r in cfg.runs]
            return max(cmd_diagnose(cfg, out_root, rid) for rid in run_ids)
        return cmd_all(cfg, out_root)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error ({getattr(exc, 'filename', '?')}): {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
