"""Plot-ready CSV exports, metadata sidecars, and run manifests.

Every file is written atomically (temp file + rename) and is byte-for-byte
deterministic for a given (config, seed): no timestamps, no environment
fingerprints. Numbers are stored at 12 significant digits, which round-trips
through float parsing, and each CSV gets a small self-describing
``<name>.meta.json`` sidecar. Manifests list every produced artifact with its
SHA-256 plus a combined content hash so reruns can be compared hash-to-hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .env import ControlSchedule, ExperimentConfig, TrainingRecord, TrajectoryRecord
from .metrics import to_decibels

XI_CLAMP = 5.0   # divergence display ceiling for clamped export columns

TRAJECTORY_COLUMNS = (
    ("t", "sample time at a segment boundary"),
    ("xi_z_sq", "squeezing parameter N var(Jz) / |<J>|^2, linear"),
    ("xi_z_db", "10 log10 of xi_z_sq"),
    ("xi_perp_sq", "minimal transverse-direction squeezing parameter, linear"),
    ("varphi", "optimal transverse angle in radians"),
    ("avg_qfi", "quantum Fisher information averaged over Jx, Jy, Jz, over N^2"),
    ("purity", "Tr[rho^2]"),
)

EPOCH_COLUMNS = (
    ("t", "sample time at a segment boundary"),
    ("xi_z_sq", "squeezing parameter, linear; nan after a divergent segment"),
    ("xi_z_db", "10 log10 of xi_z_sq; nan when undefined"),
    ("xi_z_sq_clamped", "xi_z_sq capped at 5; divergent samples shown as 5"),
    ("avg_qfi", "averaged quantum Fisher information over N^2"),
    ("purity", "Tr[rho^2]"),
)

SCHEDULE_COLUMNS = (
    ("segment_index", "0-based segment number"),
    ("t_start", "segment start time"),
    ("t_end", "segment end time"),
    ("amplitude", "control amplitude held over the segment"),
)

HUSIMI_COLUMNS = (
    ("theta", "polar angle of the sample cell center"),
    ("phi", "azimuthal angle of the sample cell center"),
    ("q", "raw coherent-state overlap <theta,phi|rho|theta,phi> in [0, 1]"),
)

SUMMARY_COLUMNS = (
    ("epoch", "training epoch index"),
    ("final_xi_z_sq", "xi_z_sq at the last segment boundary; nan if divergent"),
    ("final_xi_z_db", "10 log10 of final_xi_z_sq"),
    ("final_xi_z_sq_clamped", "final value capped at 5; divergent shown as 5"),
    ("total_reward", "cumulative reward collected in the epoch"),
    ("epsilon", "exploration rate used for the epoch"),
    ("divergent", "1 if propagation failed during the epoch"),
    ("failed_segment", "segment index of the failure, empty otherwise"),
)

SWEEP_CURVE_COLUMNS = (
    ("t", "sample time at a segment boundary"),
    ("xi_z_sq_mean", "mean over samples of the best-of xi_z_sq trajectory"),
    ("xi_z_sq_stderr", "standard error of the mean across samples"),
    ("xi_z_db_mean", "10 log10 of xi_z_sq_mean"),
    ("n_samples", "number of samples aggregated"),
)

SWEEP_FINAL_COLUMNS = (
    ("axis", "swept parameter name"),
    ("axis_value", "swept parameter value"),
    ("sample_index", "0-based sample number within the value"),
    ("seed", "master seed of the training run"),
    ("best_epoch", "epoch whose schedule won best_of"),
    ("final_xi_z_sq", "best-of xi_z_sq at t_final, linear"),
    ("final_xi_z_db", "10 log10 of final_xi_z_sq"),
    ("min_xi_z_sq", "minimum xi_z_sq along the best-of trajectory"),
    ("n_divergent_epochs", "divergent epochs in the run"),
)


class CsvFormatError(ValueError):
    """Malformed CSV input; message carries the file and 1-based line number."""


def fmt_sig(value) -> str:
    """Render one number at 12 significant digits (nan and inf spelled out)."""
    return format(float(value), ".12g")


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write a file so readers never observe a partial state."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-export-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path: str, header, rows) -> None:
    """Write rows of preformatted string cells under a header line."""
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def parse_csv(path: str, expected_header) -> list[list[str]]:
    """Read a CSV back, enforcing the header and a fixed column count.

    Raises CsvFormatError naming the offending 1-based line number.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(f"{path}: line 1: empty file")
    header = lines[0].split(",")
    expected = list(expected_header)
    if header != expected:
        raise CsvFormatError(
            f"{path}: line 1: header {header!r} does not match {expected!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(expected):
            raise CsvFormatError(
                f"{path}: line {lineno}: expected {len(expected)} fields, "
                f"got {len(cells)}")
        rows.append([c.strip() for c in cells])
    return rows


def _parse_float(cell: str, path: str, lineno: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise CsvFormatError(
            f"{path}: line {lineno}: column {column}: "
            f"{cell!r} is not a number") from exc


def _clamped(xi: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(xi), XI_CLAMP, np.minimum(xi, XI_CLAMP))


def write_trajectory_csv(path: str, traj: TrajectoryRecord) -> None:
    """Replay/baseline trajectory: squeezing, frame angle, QFI, purity vs t."""
    header = [name for name, _ in TRAJECTORY_COLUMNS]
    db = to_decibels(traj.xi_z_sq)
    rows = (
        [fmt_sig(traj.times[i]), fmt_sig(traj.xi_z_sq[i]), fmt_sig(db[i]),
         fmt_sig(traj.xi_perp_sq[i]), fmt_sig(traj.varphi[i]),
         fmt_sig(traj.avg_qfi[i]), fmt_sig(traj.purity[i])]
        for i in range(len(traj.times)))
    write_csv(path, header, rows)


def read_trajectory_csv(path: str) -> dict[str, np.ndarray]:
    header = [name for name, _ in TRAJECTORY_COLUMNS]
    rows = parse_csv(path, header)
    values = np.empty((len(rows), len(header)))
    for r, cells in enumerate(rows):
        for c, cell in enumerate(cells):
            values[r, c] = _parse_float(cell, path, r + 2, header[c])
    return {name: values[:, c].copy() for c, name in enumerate(header)}


def write_epoch_csv(path: str, record: TrainingRecord) -> None:
    """One training epoch's trajectory with the display-clamped column."""
    cfg = record.config
    n = cfg.n_segments
    t = np.arange(n + 1) * cfg.segment_duration
    db = to_decibels(record.xi_z_sq)
    clamped = _clamped(record.xi_z_sq)
    header = [name for name, _ in EPOCH_COLUMNS]
    rows = (
        [fmt_sig(t[i]), fmt_sig(record.xi_z_sq[i]), fmt_sig(db[i]),
         fmt_sig(clamped[i]), fmt_sig(record.avg_qfi[i]),
         fmt_sig(record.purity[i])]
        for i in range(n + 1))
    write_csv(path, header, rows)


def write_epoch_summary_csv(path: str, records: list[TrainingRecord]) -> None:
    """Per-epoch endpoint summary across a whole training run."""
    header = [name for name, _ in SUMMARY_COLUMNS]
    rows = []
    for r in records:
        final = float(r.xi_z_sq[-1])
        rows.append([
            str(r.epoch), fmt_sig(final), fmt_sig(to_decibels(final)),
            fmt_sig(XI_CLAMP if math.isnan(final) else min(final, XI_CLAMP)),
            fmt_sig(r.total_reward), fmt_sig(r.epsilon),
            str(int(r.divergent)),
            "" if r.failed_segment is None else str(r.failed_segment)])
    write_csv(path, header, rows)


def write_schedule_csv(path: str, schedule: ControlSchedule) -> None:
    header = [name for name, _ in SCHEDULE_COLUMNS]
    dt = schedule.segment_duration
    rows = (
        [str(i), fmt_sig(i * dt), fmt_sig((i + 1) * dt), fmt_sig(amp)]
        for i, amp in enumerate(schedule.amplitudes))
    write_csv(path, header, rows)


def read_schedule_csv(path: str, config: ExperimentConfig) -> ControlSchedule:
    """Parse and validate a schedule file against an experiment config.

    Checks segment count, boundary times, and that every amplitude matches a
    configured action to within 1e-9 (values are snapped to the exact action).
    """
    header = [name for name, _ in SCHEDULE_COLUMNS]
    rows = parse_csv(path, header)
    if len(rows) != config.n_segments:
        raise CsvFormatError(
            f"{path}: schedule has {len(rows)} segments, config expects "
            f"{config.n_segments}")
    dt = config.segment_duration
    actions = np.asarray(config.action_set)
    amplitudes = []
    for r, cells in enumerate(rows):
        lineno = r + 2
        idx = _parse_float(cells[0], path, lineno, "segment_index")
        if idx != r:
            raise CsvFormatError(
                f"{path}: line {lineno}: segment_index {cells[0]} out of "
                f"order, expected {r}")
        t0 = _parse_float(cells[1], path, lineno, "t_start")
        t1 = _parse_float(cells[2], path, lineno, "t_end")
        if abs(t0 - r * dt) > 1e-9 or abs(t1 - (r + 1) * dt) > 1e-9:
            raise CsvFormatError(
                f"{path}: line {lineno}: segment times ({cells[1]}, "
                f"{cells[2]}) do not match the config grid step {fmt_sig(dt)}")
        amp = _parse_float(cells[3], path, lineno, "amplitude")
        dist = np.abs(actions - amp)
        k = int(np.argmin(dist))
        if dist[k] > 1e-9:
            raise CsvFormatError(
                f"{path}: line {lineno}: amplitude {cells[3]} is not in the "
                f"configured action set {tuple(config.action_set)}")
        amplitudes.append(float(actions[k]))
    return ControlSchedule(amplitudes=tuple(amplitudes), segment_duration=dt)


def write_husimi_csv(path: str, theta: np.ndarray, phi: np.ndarray,
                     q: np.ndarray) -> None:
    """Flattened phase-space grid, theta-major, cell-centered angles."""
    if q.shape != (theta.size, phi.size):
        raise ValueError(f"grid shape {q.shape} does not match axes "
                         f"({theta.size}, {phi.size})")
    header = [name for name, _ in HUSIMI_COLUMNS]
    rows = (
        [fmt_sig(theta[i]), fmt_sig(phi[j]), fmt_sig(q[i, j])]
        for i in range(theta.size) for j in range(phi.size))
    write_csv(path, header, rows)


def canonical_json(obj) -> str:
    """Stable JSON rendering: sorted keys, compact separators, one newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      allow_nan=False) + "\n"


def write_sidecar(csv_path: str, kind: str, columns, config_echo: dict,
                  notes: tuple[str, ...] = ()) -> str:
    """Emit the self-describing metadata JSON next to a CSV artifact."""
    meta = {
        "file": os.path.basename(csv_path),
        "kind": kind,
        "columns": [{"name": n, "description": d} for n, d in columns],
        "config": config_echo,
        "notes": list(notes),
        "precision": "12 significant digits",
    }
    path = csv_path + ".meta.json"
    atomic_write_text(path, canonical_json(meta))
    return path


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """What a command produced: inputs, artifacts, hashes, timings, seeds."""

    command: str
    config: dict
    inputs: dict
    seeds: tuple[int, ...]
    artifacts: tuple[dict, ...]     # {"path", "sha256", "bytes"}, path-sorted
    content_hash: str               # over the sorted (path, sha256) pairs
    timings_s: dict
    warnings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seeds": list(self.seeds),
            "artifacts": [dict(a) for a in self.artifacts],
            "content_hash": self.content_hash,
            "timings_s": self.timings_s,
            "warnings": self.warnings,
        }


def build_manifest(command: str, config_echo: dict, inputs: dict,
                   seeds, out_dir: str, artifact_paths, timings_s: dict,
                   warnings: dict | None = None) -> RunManifest:
    """Hash every artifact and derive the combined content hash.

    Timings stay out of the hash so two identical runs produce the same
    content_hash even though their wall clocks differ.
    """
    records = []
    for path in artifact_paths:
        rel = os.path.relpath(path, out_dir)
        records.append({"path": rel, "sha256": sha256_file(path),
                        "bytes": os.path.getsize(path)})
    records.sort(key=lambda a: a["path"])
    combined = "\n".join(f"{a['path']} {a['sha256']}" for a in records)
    return RunManifest(
        command=command, config=config_echo, inputs=inputs,
        seeds=tuple(int(s) for s in seeds), artifacts=tuple(records),
        content_hash=sha256_text(combined), timings_s=timings_s,
        warnings=dict(warnings or {}))


def write_manifest(out_dir: str, manifest: RunManifest) -> str:
    path = os.path.join(out_dir, "manifest.json")
    atomic_write_text(path, json.dumps(manifest.to_dict(), sort_keys=True,
                                       indent=1) + "\n")
    return path


def read_manifest(out_dir: str) -> dict:
    with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)
