"""Parsing of annotation files, pixel-to-world projection and dataset assembly."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    ConfigError,
    DataError,
    Dataset,
    Trajectory,
    bounding_area,
    build_frames,
)

log = logging.getLogger(__name__)

# Published obsmat layout: frame, id, pos_x, pos_z, pos_y, v_x, v_z, v_y.
# Stored velocities are ignored; they are re-estimated by the smoother.
OBSMAT_COLUMNS = {"frame": 0, "agent_id": 1, "x": 2, "y": 4}

PEDESTRIAN_LABELS = {"pedestrian", "ped", "person", "walker"}

MIN_TRAJECTORIES = 100


@dataclass(frozen=True)
class SourceSchema:
    """How to read one annotation source.

    ``columns`` maps the logical fields (frame, agent_id, x, y and optionally
    label) to column indices (eth-obsmat) or header names (generic-csv).
    """

    format: str
    fps: float
    coordinate_space: str = "world-meters"
    columns: Mapping[str, int | str] | None = None

    def __post_init__(self):
        if self.format not in ("eth-obsmat", "generic-csv"):
            raise ConfigError(f"unknown source format {self.format!r}")
        if self.coordinate_space not in ("world-meters", "image-pixels"):
            raise ConfigError(f"unknown coordinate space {self.coordinate_space!r}")
        if not self.fps > 0:
            raise ConfigError("frame rate must be > 0")
        cols = self.resolved_columns()
        core = [cols[k] for k in ("frame", "agent_id", "x", "y")]
        if len(set(core)) != len(core):
            raise ConfigError("mapped columns must be distinct")

    def resolved_columns(self) -> Mapping[str, int | str]:
        if self.columns is not None:
            missing = {"frame", "agent_id", "x", "y"} - set(self.columns)
            if missing:
                raise ConfigError(f"schema missing column mappings: {sorted(missing)}")
            return self.columns
        if self.format == "eth-obsmat":
            return OBSMAT_COLUMNS
        return {"frame": "frame", "agent_id": "id", "x": "x", "y": "y"}


@dataclass(frozen=True)
class Homography:
    """3x3 projective map from image pixels to world meters."""

    matrix: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", h)
        if h.shape != (3, 3):
            raise ConfigError("homography must be a 3x3 matrix")
        if abs(np.linalg.det(h)) <= 1e-12:
            raise ConfigError("homography matrix is singular")

    @classmethod
    def from_file(cls, path: str | Path) -> "Homography":
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split()])
        return cls(np.array(rows))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class RawRow:
    frame: float
    agent_id: str
    x: float
    y: float
    label: str | None = None


def parse_annotations(path: str | Path, schema: SourceSchema) -> list[RawRow]:
    """Read one annotation file into raw rows, in file order.

    Malformed rows raise DataError carrying the 1-based line number.
    """
    path = Path(path)
    cols = schema.resolved_columns()
    rows: list[RawRow] = []

    if schema.format == "eth-obsmat":
        with path.open() as f:
            for lineno, line in enumerate(f, start=1):
                fields = line.split()
                if not fields:
                    continue
                try:
                    rows.append(
                        RawRow(
                            frame=float(fields[cols["frame"]]),
                            agent_id=_format_id(fields[cols["agent_id"]]),
                            x=float(fields[cols["x"]]),
                            y=float(fields[cols["y"]]),
                            label=str(fields[cols["label"]]) if "label" in cols else None,
                        )
                    )
                except (ValueError, IndexError) as exc:
                    raise DataError(f"{path.name}:{lineno}: malformed row ({exc})") from exc
    else:
        with path.open(newline="") as f:
            reader = csv.DictReader(f)
            for lineno, rec in enumerate(reader, start=2):
                try:
                    rows.append(
                        RawRow(
                            frame=float(rec[cols["frame"]]),
                            agent_id=_format_id(rec[cols["agent_id"]]),
                            x=float(rec[cols["x"]]),
                            y=float(rec[cols["y"]]),
                            label=rec.get(cols["label"]) if "label" in cols else None,
                        )
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise DataError(f"{path.name}:{lineno}: malformed row ({exc})") from exc
    return rows


def _format_id(raw) -> str:
    # "1.0" and "1" refer to the same agent in float-formatted sources
    try:
        v = float(raw)
        return str(int(v)) if v == int(v) else str(v)
    except (TypeError, ValueError):
        return str(raw)


def apply_homography(points: np.ndarray, h: Homography) -> tuple[np.ndarray, np.ndarray]:
    """Project pixel points (n, 2) to meters.

    Returns (projected points, validity mask); points whose homogeneous
    denominator nearly vanishes are flagged invalid and must be excluded.
    """
    pts = np.asarray(points, dtype=float)
    hom = np.column_stack([pts, np.ones(len(pts))])
    mapped = hom @ h.matrix.T
    den = mapped[:, 2]
    valid = np.abs(den) >= 1e-9
    if not np.all(valid):
        log.warning("apply_homography: %d point(s) with degenerate denominator excluded",
                    int(np.sum(~valid)))
    out = np.full_like(pts, np.nan)
    out[valid] = mapped[valid, :2] / den[valid, None]
    return out, valid


@dataclass(frozen=True)
class DatasetConfig:
    """Ingestion section of the pipeline configuration."""

    name: str
    files: Sequence[str]
    schema: SourceSchema
    homography: str | None = None

    @classmethod
    def from_dict(cls, cfg: Mapping, base_dir: str | Path | None = None) -> "DatasetConfig":
        try:
            name = cfg["name"]
            files = list(cfg["files"])
            raw_schema = dict(cfg["schema"])
        except KeyError as exc:
            raise ConfigError(f"config missing required key: {exc}") from exc
        fps = raw_schema.pop("fps", cfg.get("fps"))
        if fps is None:
            raise ConfigError("config must give fps (top-level or under schema)")
        schema = SourceSchema(
            format=raw_schema.pop("format"),
            fps=float(fps),
            coordinate_space=raw_schema.pop("coordinate_space", "world-meters"),
            columns=raw_schema.pop("columns", None),
        )
        if raw_schema:
            raise ConfigError(f"unknown schema keys: {sorted(raw_schema)}")
        homography = cfg.get("homography")
        if base_dir is not None:
            base = Path(base_dir)
            files = [str(base / f) for f in files]
            if homography:
                homography = str(base / homography)
        return cls(name=name, files=files, schema=schema, homography=homography)


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        with path.open() as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def load_dataset(config: DatasetConfig | Mapping, base_dir: str | Path | None = None) -> Dataset:
    """Parse, project and assemble a Dataset with frames and extent."""
    if not isinstance(config, DatasetConfig):
        config = DatasetConfig.from_dict(config, base_dir)
    schema = config.schema

    rows: list[RawRow] = []
    for f in config.files:
        rows.extend(parse_annotations(f, schema))
    if not rows:
        raise DataError(f"dataset {config.name!r}: no rows in input files")

    labelled = [r for r in rows if r.label is not None]
    if labelled:
        kept = [r for r in rows if r.label is None or r.label.lower() in PEDESTRIAN_LABELS]
        if len(kept) < len(rows):
            log.info("dropped %d non-pedestrian rows", len(rows) - len(kept))
        rows = kept
        if not rows:
            raise DataError(f"dataset {config.name!r}: no pedestrian rows")

    points = np.array([[r.x, r.y] for r in rows])
    if schema.coordinate_space == "image-pixels":
        if config.homography is None:
            raise ConfigError("pixel coordinates require a homography file")
        hmat = Homography.from_file(config.homography)
        points, valid = apply_homography(points, hmat)
        rows = [r for r, ok in zip(rows, valid) if ok]
        points = points[valid]

    flags: list[str] = []
    by_agent: dict[str, list[tuple[float, float, float]]] = {}
    for r, p in zip(rows, points):
        t = r.frame / schema.fps
        by_agent.setdefault(r.agent_id, []).append((t, p[0], p[1]))

    trajectories = []
    for agent_id in sorted(by_agent):
        samples = sorted(by_agent[agent_id])
        ts = np.array([s[0] for s in samples])
        if np.any(np.diff(ts) <= 0):
            dup = int(np.argmin(np.diff(ts)))
            raise DataError(
                f"agent {agent_id!r}: duplicate observation at t={ts[dup + 1]:.3f}"
            )
        pos = np.array([[s[1], s[2]] for s in samples])
        if len(samples) == 1:
            flags.append(f"single-observation agent {agent_id!r}")
        trajectories.append(Trajectory(agent_id, ts, pos))

    if len(trajectories) < MIN_TRAJECTORIES:
        flags.append(f"fewer than {MIN_TRAJECTORIES} trajectories ({len(trajectories)})")

    extent = bounding_area(trajectories)
    if extent.degenerate:
        flags.append("degenerate extent (zero area)")
    frames = build_frames(trajectories)
    return Dataset(
        name=config.name,
        trajectories=tuple(trajectories),
        frames=tuple(frames),
        extent=extent,
        source_fps=schema.fps,
        flags=tuple(flags),
    )
