"""Pipeline orchestration, dataset-level aggregation and report export."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import context as ctx
from . import overall_stats, predictability, preprocess, regularity
from .core import ConfigError, build_frames
from .ingestion import load_dataset

log = logging.getLogger(__name__)

ALL_INDICATORS = ("overall", "predictability", "regularity", "context")

# Scalar per-trajlet indicator columns, in export order.
INDICATOR_FIELDS = (
    "H_cond",
    "S_avg", "S_rg", "A_avg", "A_max", "F", "D_avg_rad", "D_absavg_deg",
    "C", "T", "E", "L",
)

FLOAT_DIGITS = 9  # significant digits in exported JSON/CSV

PERCENTILE_CONVENTION = "linear interpolation between closest ranks"


@dataclass
class IndicatorRecord:
    """Per-trajlet scalar indicator values; unavailable ones stay None."""

    trajlet_id: str
    agent_id: str
    H_cond: float | None = None
    S_avg: float | None = None
    S_rg: float | None = None
    A_avg: float | None = None
    A_max: float | None = None
    F: float | None = None
    D_avg_rad: float | None = None
    D_absavg_deg: float | None = None
    C: float | None = None
    T: float | None = None
    E: float | None = None
    L: float | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AssessmentReport:
    metadata: dict
    config: dict
    records: list[IndicatorRecord]
    frame_indicators: list[dict]
    overall: dict | None = None
    tau_lower_bound: float | None = None
    summaries: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "config": self.config,
            "trajlets": [r.to_dict() for r in self.records],
            "frames": self.frame_indicators,
            "overall": self.overall,
            "tau_lower_bound": self.tau_lower_bound,
            "summaries": self.summaries,
            "histograms": self.histograms,
        }


def summarize(values: Sequence[float | None], bins: int = 20) -> tuple[dict | None, dict]:
    """Order statistics and an equal-width histogram of the present values.

    Returns (summary, histogram); the summary is None when every value is
    absent.  Percentiles use linear interpolation between closest ranks.
    """
    present = np.array([v for v in values if v is not None and np.isfinite(v)])
    absent = len(values) - len(present)
    if len(present) == 0:
        return None, {"bin_edges": [], "counts": [], "absent_count": absent}
    p5, p25, p50, p75, p95 = np.percentile(present, [5, 25, 50, 75, 95])
    summary = {
        "count": int(len(present)),
        "absent_count": int(absent),
        "min": float(present.min()),
        "max": float(present.max()),
        "mean": float(present.mean()),
        "median": float(p50),
        "p5": float(p5),
        "p25": float(p25),
        "p75": float(p75),
        "p95": float(p95),
    }
    lo, hi = float(present.min()), float(present.max())
    if hi - lo <= 1e-9 * max(1.0, abs(lo)):  # (near-)degenerate range
        hi = lo + 1.0
    counts, edges = np.histogram(present, bins=bins, range=(lo, hi))
    histogram = {
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
        "absent_count": int(absent),
    }
    return summary, histogram


def _trajlet_configs(config: Mapping) -> tuple[preprocess.SmootherConfig, preprocess.TrajletConfig]:
    pp = dict(config.get("preprocess", {}))
    smoother = preprocess.SmootherConfig(
        process_noise=pp.pop("q", 0.5),
        measurement_std=pp.pop("sigma_z", 0.1),
    )
    trajlet_cfg = preprocess.TrajletConfig(
        delta=pp.pop("delta", 4.8),
        stride=pp.pop("stride", 4.8),
        obs_duration=pp.pop("obs_duration", 3.2),
        min_path_len=pp.pop("min_path_len", 1.0),
        target_fps=pp.pop("target_fps", 2.5),
    )
    if pp:
        raise ConfigError(f"unknown preprocess keys: {sorted(pp)}")
    return smoother, trajlet_cfg


def _selected_indicators(config: Mapping, override: Sequence[str] | None) -> set[str]:
    sel = override if override is not None else config.get("indicators", ["all"])
    if isinstance(sel, str):
        sel = [s for s in sel.split(",") if s]
    chosen = set(sel)
    if "all" in chosen:
        return set(ALL_INDICATORS)
    unknown = chosen - set(ALL_INDICATORS)
    if unknown:
        raise ConfigError(f"unknown indicators: {sorted(unknown)}")
    return chosen


def run_pipeline(
    config: Mapping,
    base_dir: str | Path | None = None,
    indicators: Sequence[str] | None = None,
    seed: int | None = None,
    stride: float | None = None,
    exact: bool = False,
) -> AssessmentReport:
    """Ingestion, preprocessing, all selected indicators, aggregation.

    Deterministic for a fixed config and seed.  ``exact`` disables the
    pruning/neighborhood shortcuts (for oracle comparisons).
    """
    config = dict(config)
    if seed is not None:
        config["seed"] = seed
    if stride is not None:
        config.setdefault("preprocess", {})
        config["preprocess"] = {**config["preprocess"], "stride": stride}
    global_seed = int(config.get("seed", 0))
    selected = _selected_indicators(config, indicators)

    dataset = load_dataset(config, base_dir)
    for flag in dataset.flags:
        log.info("dataset %s: %s", dataset.name, flag)

    smoother, trajlet_cfg = _trajlet_configs(config)
    processed, trajlets = preprocess.preprocess_dataset(dataset, smoother, trajlet_cfg)
    frames = build_frames(processed)
    nonstatic = [t for t in trajlets if not t.is_static]

    records = {t.trajlet_id: IndicatorRecord(t.trajlet_id, t.agent_id) for t in nonstatic}

    if "regularity" in selected:
        for t in nonstatic:
            rec = regularity.compute_regularity(t)
            r = records[t.trajlet_id]
            r.S_avg, r.S_rg = rec.speed_avg, rec.speed_range
            r.A_avg, r.A_max = rec.accel_avg, rec.accel_max
            r.F = rec.efficiency
            r.D_avg_rad = rec.deviation_avg
            r.D_absavg_deg = rec.deviation_abs_avg_deg

    if "predictability" in selected and len(nonstatic) >= 3:
        pcfg = dict(config.get("predictability", {}))
        kernel_cfg = predictability.KernelConfig(
            bandwidth=pcfg.get("h", 0.5),
            n_samples=pcfg.get("M", 30),
            seed=pcfg.get("seed", global_seed),
            prune=not exact and pcfg.get("prune", True),
        )
        for t in nonstatic:
            records[t.trajlet_id].H_cond = predictability.conditional_entropy(
                t, nonstatic, kernel_cfg
            )

    params = None
    if "context" in selected:
        ccfg = dict(config.get("context", {}))
        params = ctx.InteractionParams(
            agent_radius=ccfg.get("R", 0.3),
            energy_scale=ccfg.get("k", 1.0),
            ttc_upper=ccfg.get("tau_upper", 3.0),
            density_smoothing=ccfg.get("lambda", 1.0),
            bin_width=ccfg.get("bin_width", 0.2),
            significance=ccfg.get("p", 0.05),
            neighbor_radius=np.inf if exact else ccfg.get("neighbor_radius", 20.0),
            n_scrambles=ccfg.get("n_scrambles", 20),
            seed=global_seed,
        )
        frame_index = ctx.index_frames(frames)
        for t in nonstatic:
            rec = ctx.compute_context(t, frame_index, params)
            r = records[t.trajlet_id]
            r.C, r.T, r.E, r.L = (rec.min_dca, rec.min_ttc, rec.energy,
                                  rec.max_local_density)

    overall = None
    if "overall" in selected and len(nonstatic) >= 2:
        ocfg = dict(config.get("overall", {}))
        overall = overall_stats.overall_curves(
            nonstatic,
            n_times=ocfg.get("n_times", 50),
            k_max=ocfg.get("k_max", 21),
            bandwidth=ocfg.get("h", 0.5),
            seed=global_seed,
        )

    frame_indicators = []
    tau_lower = None
    if "context" in selected:
        if dataset.area > 0:
            frame_indicators = [
                {"timestamp": f.timestamp, "count": f.count,
                 "global_density": ctx.global_density(f, dataset.area)}
                for f in frames
            ]
        else:
            log.warning("degenerate extent: global density unavailable")
        tau_lower = ctx.estimate_tau_lower_bound(frames, params)

    n_trajlets = len(trajlets)
    metadata = {
        "name": dataset.name,
        "n_agents": dataset.n_agents,
        "n_frames": len(dataset.frames),
        "duration_s": dataset.duration,
        "total_trajectory_duration_s": dataset.total_trajectory_duration(),
        "n_trajlets": n_trajlets,
        "n_nonstatic": len(nonstatic),
        "non_static_fraction": len(nonstatic) / n_trajlets if n_trajlets else 0.0,
        "area_m2": dataset.area,
        "flags": list(dataset.flags),
        "percentile_convention": PERCENTILE_CONVENTION,
    }

    report = AssessmentReport(
        metadata=metadata,
        config=config,
        records=list(records.values()),
        frame_indicators=frame_indicators,
        overall=overall,
        tau_lower_bound=tau_lower,
    )

    values_by_field = {
        name: [getattr(r, name) for r in report.records] for name in INDICATOR_FIELDS
    }
    for name, values in values_by_field.items():
        summary, histogram = summarize(values)
        report.summaries[name] = summary
        report.histograms[name] = histogram
    return report


def _round_floats(obj):
    """Canonical float formatting: 9 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.{FLOAT_DIGITS}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.{FLOAT_DIGITS}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{FLOAT_DIGITS}g}"
    return str(v)


def export(report: AssessmentReport, out_dir: str | Path) -> list[Path]:
    """Write report.json, trajlets.csv, frames.csv and per-indicator
    histogram CSVs; all files are staged to temporaries and renamed, so a
    failure leaves no partial output."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    staged: list[tuple[str, str]] = []

    def stage(name: str, text: str):
        fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}.")
        with os.fdopen(fd, "w") as f:
            f.write(text)
        staged.append((tmp, str(out / name)))

    try:
        payload = _round_floats(report.to_dict())
        stage("report.json", json.dumps(payload, sort_keys=True, indent=1) + "\n")

        header = ["trajlet_id", "agent_id", *INDICATOR_FIELDS]
        lines = [",".join(header)]
        for r in report.records:
            d = r.to_dict()
            lines.append(",".join(_fmt(d[k]) for k in header))
        stage("trajlets.csv", "\n".join(lines) + "\n")

        lines = ["timestamp,count,global_density"]
        for f in report.frame_indicators:
            lines.append(",".join(_fmt(f[k]) for k in ("timestamp", "count", "global_density")))
        stage("frames.csv", "\n".join(lines) + "\n")

        for name, hist in report.histograms.items():
            lines = ["bin_left,bin_right,count"]
            edges, counts = hist["bin_edges"], hist["counts"]
            for i, c in enumerate(counts):
                lines.append(f"{_fmt(edges[i])},{_fmt(edges[i + 1])},{c}")
            stage(f"hist_{name}.csv", "\n".join(lines) + "\n")
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise

    written = []
    for tmp, final in staged:
        os.replace(tmp, final)
        written.append(Path(final))
    return written
