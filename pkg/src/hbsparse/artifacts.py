"""Deterministic on-disk artifact formats.

Numeric CSV files carry 17 significant digits, enough to round-trip a
double exactly, and JSON documents are written with sorted keys, so an
identical pipeline run reproduces every artifact byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsReport
from .forward import DeconvolutionConfig, GroundTruth, InverseProblem, difference_matrix
from .hypermodel import Hypermodel
from .ias import HybridResult
from .sampler import ChainConfig, PhysicalDraws, ReparamPoint, SampleSet

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "save_problem",
    "load_problem",
    "save_map",
    "load_map",
    "save_samples",
    "load_samples",
    "save_physical",
    "save_report",
]


def fmt(x: float) -> str:
    """Render a float with 17 significant digits (lossless round trip)."""
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows: np.ndarray) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(header):
        raise ValueError(f"{len(header)} columns in header, rows have {rows.shape[1]}")
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    text = path.read_text().strip().splitlines()
    header = text[0].split(",")
    data = np.array(
        [[float(v) for v in line.split(",")] for line in text[1:]], dtype=float
    )
    return header, data


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> dict:
    return json.loads(path.read_text())


def _hypermodel_payload(hm: Hypermodel) -> dict:
    vt = np.asarray(hm.vartheta, dtype=float)
    return {
        "r": hm.r,
        "beta": hm.beta,
        "vartheta": float(vt) if vt.ndim == 0 else vt.tolist(),
    }


# -- problem ---------------------------------------------------------------


def save_problem(
    out_dir: Path,
    cfg: DeconvolutionConfig,
    prob: InverseProblem,
    truth: GroundTruth,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": {
            "kernel_width": cfg.kernel_width,
            "kernel_amplitude": cfg.kernel_amplitude,
            "n": cfg.n,
            "obs_stride": cfg.obs_stride,
            "m": cfg.m,
            "fine_n": cfg.fine_n,
            "sigma": cfg.sigma,
            "signal_jumps": [[loc, inc] for loc, inc in cfg.signal_jumps],
            "rng_seed": cfg.rng_seed,
        },
        "ground_truth": {
            "z_true": truth.z_true.tolist(),
            "x_true": truth.x_true.tolist(),
            "b_noiseless": truth.b_noiseless.tolist(),
        },
    }
    write_json(out_dir / "problem.json", manifest)
    write_csv(
        out_dir / "a_hat.csv",
        [f"col_{j + 1}" for j in range(prob.n)],
        prob.a_hat,
    )
    write_csv(out_dir / "b_hat.csv", ["b_hat"], prob.b_hat[:, None])


def load_problem(
    in_dir: Path,
) -> tuple[DeconvolutionConfig, InverseProblem, GroundTruth]:
    manifest = read_json(in_dir / "problem.json")
    try:
        raw = manifest["config"]
        cfg = DeconvolutionConfig(
            kernel_width=raw["kernel_width"],
            kernel_amplitude=raw["kernel_amplitude"],
            n=raw["n"],
            obs_stride=raw["obs_stride"],
            m=raw["m"],
            fine_n=raw["fine_n"],
            sigma=raw["sigma"],
            signal_jumps=tuple((loc, inc) for loc, inc in raw["signal_jumps"]),
            rng_seed=raw["rng_seed"],
        )
        gt = manifest["ground_truth"]
        truth = GroundTruth(
            z_true=np.asarray(gt["z_true"], dtype=float),
            x_true=np.asarray(gt["x_true"], dtype=float),
            b_noiseless=np.asarray(gt["b_noiseless"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"problem manifest is missing field {exc}") from exc
    _, a_hat = read_csv(in_dir / "a_hat.csv")
    _, b_col = read_csv(in_dir / "b_hat.csv")
    if a_hat.shape != (cfg.m, cfg.n):
        raise ValueError(
            f"a_hat.csv has shape {a_hat.shape}, manifest says ({cfg.m}, {cfg.n})"
        )
    prob = InverseProblem(
        a_hat=a_hat,
        b_hat=b_col[:, 0],
        sigma=cfg.sigma,
        n=cfg.n,
        m=cfg.m,
        diff_mat=difference_matrix(cfg.n),
    )
    return cfg, prob, truth


# -- MAP estimate ----------------------------------------------------------


def _phase_payload(hm: Hypermodel, result) -> dict:
    return {
        "hypermodel": _hypermodel_payload(hm),
        "iterations": len(result.states),
        "converged": result.converged,
        "energy_trace": [s.energy for s in result.states],
    }


def save_map(
    out_dir: Path,
    result: HybridResult,
    phase1_hm: Hypermodel,
    phase2_hm: Hypermodel | None,
    prob: InverseProblem,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "phase1": _phase_payload(phase1_hm, result.phase1),
        "phase2": (
            None
            if result.phase2 is None
            else _phase_payload(phase2_hm, result.phase2)
        ),
        "converged": result.converged,
    }
    write_json(out_dir / "map.json", payload)
    final = result.final
    hm = phase2_hm if result.phase2 is not None else phase1_hm
    vt = hm.vartheta_vec(prob.n)
    x = np.sqrt(vt) * final.xi
    theta = vt * final.lam
    z = np.linalg.solve(prob.diff_mat, x)
    write_csv(
        out_dir / "map.csv",
        ["xi", "lambda", "x", "theta", "z"],
        np.column_stack([final.xi, final.lam, x, theta, z]),
    )


def load_map(in_dir: Path) -> dict:
    payload = read_json(in_dir / "map.json")
    header, data = read_csv(in_dir / "map.csv")
    cols = {name: data[:, i] for i, name in enumerate(header)}
    try:
        final_phase = payload["phase2"] or payload["phase1"]
        hm_raw = final_phase["hypermodel"]
        payload["final_hypermodel"] = Hypermodel(
            r=hm_raw["r"],
            beta=hm_raw["beta"],
            vartheta=(
                np.asarray(hm_raw["vartheta"], dtype=float)
                if isinstance(hm_raw["vartheta"], list)
                else hm_raw["vartheta"]
            ),
        )
    except KeyError as exc:
        raise ValueError(f"MAP artifact is missing field {exc}") from exc
    payload["columns"] = cols
    return payload


# -- chains ----------------------------------------------------------------


def save_samples(out_dir: Path, samples: SampleSet, init_provenance: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    n = samples.n_components
    header = [f"v_{j + 1}" for j in range(n)] + [f"tau_{j + 1}" for j in range(n)]
    write_csv(out_dir / "draws.csv", header, samples.draws)
    cfg = samples.config
    write_json(
        out_dir / "meta.json",
        {
            "kernel": cfg.kernel,
            "h": cfg.h,
            "k": cfg.k,
            "total_steps": cfg.total_steps,
            "thin": cfg.thin,
            "seed": cfg.seed,
            "accept_count": samples.accept_count,
            "total_proposals": samples.total_proposals,
            "acceptance_rate": samples.acceptance_rate,
            "init_provenance": init_provenance,
            "init_v": samples.init.v.tolist(),
            "init_tau": samples.init.tau.tolist(),
        },
    )


def load_samples(in_dir: Path) -> tuple[SampleSet, dict]:
    meta = read_json(in_dir / "meta.json")
    _, draws = read_csv(in_dir / "draws.csv")
    try:
        cfg = ChainConfig(
            kernel=meta["kernel"],
            h=meta["h"],
            k=meta["k"],
            total_steps=meta["total_steps"],
            thin=meta["thin"],
            seed=meta["seed"],
        )
        init = ReparamPoint(
            v=np.asarray(meta["init_v"], dtype=float),
            tau=np.asarray(meta["init_tau"], dtype=float),
        )
        samples = SampleSet(
            draws=draws,
            phi=np.full(draws.shape[0], np.nan),
            accept_count=meta["accept_count"],
            total_proposals=meta["total_proposals"],
            config=cfg,
            init=init,
        )
    except KeyError as exc:
        raise ValueError(f"chain metadata is missing field {exc}") from exc
    return samples, meta


def save_physical(out_dir: Path, physical: PhysicalDraws) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    n = physical.x.shape[1]
    header = (
        [f"x_{j + 1}" for j in range(n)]
        + [f"theta_{j + 1}" for j in range(n)]
        + [f"z_{j + 1}" for j in range(n)]
    )
    write_csv(
        out_dir / "physical.csv",
        header,
        np.hstack([physical.x, physical.theta, physical.z]),
    )


# -- diagnostics report ----------------------------------------------------


def save_report(
    out_dir: Path,
    report: DiagnosticsReport,
    samples: SampleSet,
    n_grid: int,
) -> None:
    """Write the report JSON plus one CSV per figure type."""
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(
        out_dir / "report.json",
        {
            "delta": report.delta,
            "acceptance_rate": report.acceptance_rate,
            "probe_indices": list(report.probe_indices),
            "lags": report.lags,
            "level": report.level,
            "compress_mode": report.compress_mode,
            "compress_counts": report.compress_counts.tolist(),
            "excluded_draws": report.extra.get("excluded_draws", 0),
            "autocorr_x": {
                str(j): acf.tolist() for j, acf in report.autocorr_x.items()
            },
            "autocorr_theta": {
                str(j): acf.tolist() for j, acf in report.autocorr_theta.items()
            },
        },
    )

    env_header = ["index"]
    env_cols = [np.arange(1, n_grid + 1, dtype=float)]
    for name in ("z", "x", "theta"):
        env_header += [f"{name}_lo", f"{name}_mean", f"{name}_hi"]
        env_cols += [report.envelope_lo[name], report.mean[name], report.envelope_hi[name]]
    write_csv(out_dir / "envelopes.csv", env_header, np.column_stack(env_cols))

    acf_header = ["lag"]
    acf_cols = [np.arange(report.lags + 1, dtype=float)]
    for j in report.probe_indices:
        acf_header += [f"x_{j}", f"theta_{j}"]
        acf_cols += [report.autocorr_x[j], report.autocorr_theta[j]]
    write_csv(out_dir / "autocorr.csv", acf_header, np.column_stack(acf_cols))

    pair_header = []
    pair_cols = []
    for j in report.probe_indices:
        pair_header += [f"tau_{j}", f"v_{j}"]
        pair_cols += [samples.tau_draws()[:, j - 1], samples.v_draws()[:, j - 1]]
    write_csv(out_dir / "scatter_pairs.csv", pair_header, np.column_stack(pair_cols))

    counts = report.compress_counts
    values = np.arange(counts.min(), counts.max() + 1)
    freq = np.array([np.count_nonzero(counts == v) for v in values])
    write_csv(
        out_dir / "compressibility.csv",
        ["bin_left", "bin_right", "count"],
        np.column_stack([values - 0.5, values + 0.5, freq.astype(float)]),
    )
