"""Command-line driver for the squeezing-control experiments.

Subcommands mirror the experiment set: ``train`` (one full learning run with
per-epoch exports), ``baseline`` (constant-amplitude reference trajectory),
``sweep`` (many seeded runs along one config axis), ``replay`` (open-loop
schedule playback with optional phase-space snapshots), and ``checkpoint``
(agent file roundtrip verification). Configuration is JSON with the default
experiment as the all-defaults document, so an empty config file runs the
headline setup. Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import multiprocessing
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .dqn import AgentConfig, checkpoint_from_bytes, checkpoint_to_bytes, qnet_forward
from .dynamics import SCHEME_EXACT, SCHEME_RK4, IntegratorConfig, NoiseParams
from .env import (
    ExperimentConfig,
    TrainingRecord,
    best_of,
    constant_schedule,
    evaluate_schedule,
    train_agent,
)
from .exports import (
    EPOCH_COLUMNS,
    HUSIMI_COLUMNS,
    SCHEDULE_COLUMNS,
    SUMMARY_COLUMNS,
    SWEEP_CURVE_COLUMNS,
    SWEEP_FINAL_COLUMNS,
    TRAJECTORY_COLUMNS,
    RunManifest,
    atomic_write_bytes,
    build_manifest,
    canonical_json,
    fmt_sig,
    read_schedule_csv,
    sha256_file,
    sha256_text,
    write_csv,
    write_epoch_csv,
    write_epoch_summary_csv,
    write_husimi_csv,
    write_manifest,
    write_schedule_csv,
    write_sidecar,
    write_trajectory_csv,
)
from .metrics import husimi_grid, husimi_grid_axes, to_decibels
from .spin_core import build_spin_operators

EPOCH_EXPORT_STRIDE = 30
HUSIMI_N_THETA = 60
HUSIMI_N_PHI = 120
WORKERS_ENV_VAR = "SQUEEZERL_WORKERS"

SWEEP_AXES = ("segments", "actions", "size", "thermal")

# control granularities for the actions axis, keyed by action count
ACTION_SETS = {
    3: (2.0, 0.0, -2.0),
    5: (2.0, 1.0, 0.0, -1.0, -2.0),
    7: (2.0, 1.34, 0.66, 0.0, -0.66, -1.34, -2.0),
    9: (2.0, 1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.5, -2.0),
}


class ConfigError(ValueError):
    """Invalid configuration or command input; message names the field path."""


# --- config schema ------------------------------------------------------------

def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite, got {value!r}")
    return float(value)


def _as_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {value!r}")
    return value


def _reject_unknown(raw: dict, known, path: str) -> None:
    for key in raw:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"{where}: unknown field")


_NOISE_FIELDS = ("gamma", "gamma_z", "n_th")
_INTEGRATOR_FIELDS = ("substeps_per_segment", "scheme")
_AGENT_REAL_FIELDS = (
    "gamma_q", "learning_rate", "beta1", "beta2", "eps_opt", "weight_decay",
    "huber_delta", "grad_clip_norm", "epsilon_start", "epsilon_min",
    "epsilon_decay",
)
_AGENT_INT_FIELDS = (
    "replay_capacity", "batch_size", "warmup_transitions", "target_sync_every",
)
_TOP_FIELDS = (
    "n_atoms", "t_final", "n_segments", "action_set", "noise", "n_epochs",
    "master_seed", "integrator", "agent",
)


def _noise_from(raw: dict) -> NoiseParams:
    _reject_unknown(raw, _NOISE_FIELDS, "noise")
    kwargs = {k: _as_real(raw[k], f"noise.{k}") for k in raw}
    try:
        return NoiseParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from exc


def _integrator_from(raw: dict) -> IntegratorConfig:
    _reject_unknown(raw, _INTEGRATOR_FIELDS, "integrator")
    kwargs = {}
    if "substeps_per_segment" in raw:
        v = raw["substeps_per_segment"]
        kwargs["substeps_per_segment"] = (
            None if v is None else _as_int(v, "integrator.substeps_per_segment"))
    if "scheme" in raw:
        v = raw["scheme"]
        if not isinstance(v, str):
            raise ConfigError(f"integrator.scheme: expected a string, got {v!r}")
        if v not in (SCHEME_RK4, SCHEME_EXACT):
            raise ConfigError(
                f"integrator.scheme: {v!r} is not one of "
                f"('{SCHEME_RK4}', '{SCHEME_EXACT}')")
        kwargs["scheme"] = v
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc


def _agent_from(raw: dict) -> AgentConfig:
    known = _AGENT_REAL_FIELDS + _AGENT_INT_FIELDS + ("hidden_sizes",)
    _reject_unknown(raw, known, "agent")
    kwargs = {}
    for k in _AGENT_REAL_FIELDS:
        if k in raw:
            kwargs[k] = _as_real(raw[k], f"agent.{k}")
    for k in _AGENT_INT_FIELDS:
        if k in raw:
            kwargs[k] = _as_int(raw[k], f"agent.{k}")
    if "hidden_sizes" in raw:
        v = raw["hidden_sizes"]
        if not isinstance(v, list) or not v:
            raise ConfigError("agent.hidden_sizes: expected a nonempty list")
        kwargs["hidden_sizes"] = tuple(
            _as_int(h, f"agent.hidden_sizes[{i}]") for i, h in enumerate(v))
    try:
        return AgentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"agent: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from plain JSON data, defaults for the rest."""
    raw = _as_object(raw, "config")
    _reject_unknown(raw, _TOP_FIELDS, "")
    kwargs = {}
    for k in ("n_atoms", "n_segments", "n_epochs", "master_seed"):
        if k in raw:
            kwargs[k] = _as_int(raw[k], k)
    if "t_final" in raw:
        kwargs["t_final"] = _as_real(raw["t_final"], "t_final")
    if "action_set" in raw:
        v = raw["action_set"]
        if not isinstance(v, list) or not v:
            raise ConfigError("action_set: expected a nonempty list of numbers")
        kwargs["action_set"] = tuple(
            _as_real(a, f"action_set[{i}]") for i, a in enumerate(v))
    if "noise" in raw:
        kwargs["noise"] = _noise_from(_as_object(raw["noise"], "noise"))
    if "integrator" in raw:
        kwargs["integrator"] = _integrator_from(
            _as_object(raw["integrator"], "integrator"))
    if "agent" in raw:
        kwargs["agent"] = _agent_from(_as_object(raw["agent"], "agent"))
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None, seed: int | None = None) -> ExperimentConfig:
    """Read a JSON config file; None means all defaults. seed overrides."""
    if path is None:
        raw = {}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    config = config_from_dict(raw)
    if seed is not None:
        config = replace(config, master_seed=int(seed))
    return config


def config_to_dict(config: ExperimentConfig) -> dict:
    """Full config echo, defaults included, as plain JSON data."""
    agent = config.agent
    return {
        "n_atoms": config.n_atoms,
        "t_final": config.t_final,
        "n_segments": config.n_segments,
        "action_set": list(config.action_set),
        "n_epochs": config.n_epochs,
        "master_seed": config.master_seed,
        "noise": {
            "gamma": config.noise.gamma,
            "gamma_z": config.noise.gamma_z,
            "n_th": config.noise.n_th,
        },
        "integrator": {
            "substeps_per_segment": config.integrator.substeps_per_segment,
            "scheme": config.integrator.scheme,
        },
        "agent": {
            **{k: getattr(agent, k) for k in _AGENT_REAL_FIELDS},
            **{k: getattr(agent, k) for k in _AGENT_INT_FIELDS},
            "hidden_sizes": list(agent.hidden_sizes),
        },
    }


# --- shared command plumbing ---------------------------------------------------

class _OutputSet:
    """Tracks files written by one command so failures leave no partial runs."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.paths: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def add(self, *paths: str) -> None:
        self.paths.extend(paths)

    def discard_all(self) -> None:
        for p in self.paths:
            try:
                os.unlink(p)
            except OSError:
                pass


def _prepare_out_dir(out_dir: str) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc


def _config_inputs(config: ExperimentConfig, config_path: str | None) -> dict:
    inputs = {"config": sha256_text(canonical_json(config_to_dict(config)))}
    if config_path is not None:
        inputs["config_file"] = sha256_file(config_path)
    return inputs


def export_epochs(n_epochs: int, stride: int = EPOCH_EXPORT_STRIDE) -> list[int]:
    """Epoch indices written out by cmd_train: every `stride`, plus the last."""
    return sorted(set(range(0, n_epochs, stride)) | {n_epochs - 1})


def _echo(message: str) -> None:
    print(message, flush=True)


# --- subcommands ----------------------------------------------------------------

def cmd_train(config_path: str | None, out_dir: str,
              seed: int | None = None) -> RunManifest:
    """One full training run: epoch exports, best schedule, checkpoint."""
    t0 = time.perf_counter()
    config = load_config(config_path, seed)
    _prepare_out_dir(out_dir)
    echo = config_to_dict(config)
    out = _OutputSet(out_dir)
    try:
        stride = max(1, config.n_epochs // 10)

        def progress(epoch: int, record: TrainingRecord) -> None:
            if epoch % stride == 0 or epoch == config.n_epochs - 1:
                final = record.xi_z_sq[-1]
                shown = "divergent" if math.isnan(final) else fmt_sig(final)
                _echo(f"[train] epoch {epoch + 1}/{config.n_epochs} "
                      f"final xi_z_sq {shown}")

        records, agent = train_agent(config, progress=progress)
        t_train = time.perf_counter()

        for e in export_epochs(config.n_epochs):
            path = out.path(f"epoch_{e:04d}.csv")
            write_epoch_csv(path, records[e])
            out.add(path, write_sidecar(
                path, "training-epoch-trajectory", EPOCH_COLUMNS, echo,
                notes=(f"epoch {e} of {config.n_epochs}",
                       f"exploration epsilon {fmt_sig(records[e].epsilon)}")))

        try:
            schedule, summary = best_of(records)
        except ValueError as exc:
            raise RuntimeError(str(exc)) from exc
        path = out.path("best_schedule.csv")
        write_schedule_csv(path, schedule)
        out.add(path, write_sidecar(
            path, "control-schedule", SCHEDULE_COLUMNS, echo,
            notes=(f"best epoch {summary.epoch}",
                   f"final xi_z_sq {fmt_sig(summary.final_xi_z_sq)}")))

        best_traj = evaluate_schedule(config, schedule)
        path = out.path("best_trajectory.csv")
        write_trajectory_csv(path, best_traj)
        out.add(path, write_sidecar(
            path, "trajectory", TRAJECTORY_COLUMNS, echo,
            notes=(f"open-loop replay of the best epoch {summary.epoch}",)))

        path = out.path("epoch_summary.csv")
        write_epoch_summary_csv(path, records)
        out.add(path, write_sidecar(
            path, "epoch-summary", SUMMARY_COLUMNS, echo))

        path = out.path("checkpoint.json")
        atomic_write_bytes(path, checkpoint_to_bytes(agent))
        out.add(path)

        t_export = time.perf_counter()
        manifest = build_manifest(
            "train", echo, _config_inputs(config, config_path),
            [config.master_seed], out_dir, out.paths,
            {"train": round(t_train - t0, 3),
             "export": round(t_export - t_train, 3),
             "total": round(t_export - t0, 3)})
        write_manifest(out_dir, manifest)
        _echo(f"[train] best epoch {summary.epoch}: xi_z_sq "
              f"{fmt_sig(summary.final_xi_z_sq)} "
              f"({fmt_sig(summary.final_xi_z_db)} dB), "
              f"{summary.n_divergent_epochs} divergent epochs, "
              f"artifacts in {out_dir}")
        return manifest
    except BaseException:
        out.discard_all()
        raise


def cmd_baseline(config_path: str | None, amplitude: float, out_dir: str,
                 seed: int | None = None) -> RunManifest:
    """Constant-amplitude reference trajectory (no agent)."""
    t0 = time.perf_counter()
    config = load_config(config_path, seed)
    amplitude = _as_real(amplitude, "amplitude")
    _prepare_out_dir(out_dir)
    echo = config_to_dict(config)
    out = _OutputSet(out_dir)
    try:
        schedule = constant_schedule(config, amplitude)
        traj = evaluate_schedule(config, schedule)

        path = out.path("baseline_trajectory.csv")
        write_trajectory_csv(path, traj)
        out.add(path, write_sidecar(
            path, "trajectory", TRAJECTORY_COLUMNS, echo,
            notes=(f"constant control amplitude {fmt_sig(amplitude)}",)))

        path = out.path("baseline_schedule.csv")
        write_schedule_csv(path, schedule)
        out.add(path, write_sidecar(path, "control-schedule",
                                    SCHEDULE_COLUMNS, echo))

        inputs = _config_inputs(config, config_path)
        inputs["amplitude"] = fmt_sig(amplitude)
        manifest = build_manifest(
            "baseline", echo, inputs, [], out_dir, out.paths,
            {"total": round(time.perf_counter() - t0, 3)})
        write_manifest(out_dir, manifest)
        _echo(f"[baseline] amplitude {fmt_sig(amplitude)}: final xi_z_sq "
              f"{fmt_sig(traj.xi_z_sq[-1])} "
              f"({fmt_sig(to_decibels(traj.xi_z_sq[-1]))} dB)")
        return manifest
    except BaseException:
        out.discard_all()
        raise


def _config_for_axis(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "segments":
        return replace(base, n_segments=int(value))
    if axis == "actions":
        return replace(base, action_set=ACTION_SETS[int(value)])
    if axis == "size":
        return replace(base, n_atoms=int(value))
    if axis == "thermal":
        noise = replace(base.noise, n_th=float(value))
        return replace(base, noise=noise)
    raise ConfigError(f"axis: unknown axis {axis!r}")


def _validate_sweep_values(axis: str, values) -> list:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis: {axis!r} is not one of {SWEEP_AXES}")
    if not values:
        raise ConfigError("values: at least one value is required")
    checked = []
    for i, v in enumerate(values):
        path = f"values[{i}]"
        if axis == "segments":
            v = _as_int(v, path)
            if v < 1:
                raise ConfigError(f"{path}: segment count must be >= 1")
        elif axis == "actions":
            v = _as_int(v, path)
            if v not in ACTION_SETS:
                raise ConfigError(
                    f"{path}: action count {v} is not one of "
                    f"{sorted(ACTION_SETS)}")
        elif axis == "size":
            v = _as_int(v, path)
            if v < 2 or v % 2:
                raise ConfigError(
                    f"{path}: system size must be an even positive integer")
        else:
            v = _as_real(v, path)
            if v < 0:
                raise ConfigError(f"{path}: thermal occupation must be >= 0")
        checked.append(v)
    if len(set(checked)) != len(checked):
        raise ConfigError("values: duplicate entries")
    return checked


def _sweep_sample(job: tuple) -> dict:
    """Worker body: one seeded training run reduced to its best-of summary."""
    axis, value, sample_index, config = job
    try:
        records, _ = train_agent(config)
        schedule, summary = best_of(records)
        best = next(r for r in records if r.epoch == summary.epoch)
        return {
            "axis_value": value, "sample_index": sample_index,
            "seed": config.master_seed, "ok": True, "error": "",
            "best_epoch": summary.epoch,
            "final": summary.final_xi_z_sq,
            "min_xi": float(np.nanmin(best.xi_z_sq)),
            "n_divergent": summary.n_divergent_epochs,
            "trajectory": [float(x) for x in best.xi_z_sq],
            "amplitudes": list(schedule.amplitudes),
            "epoch_finals": [float(r.xi_z_sq[-1]) for r in records],
        }
    except Exception as exc:
        return {"axis_value": value, "sample_index": sample_index,
                "seed": config.master_seed, "ok": False,
                "error": f"{type(exc).__name__}: {exc}"}


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV_VAR}: {raw!r} is not an integer") from exc
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR}: must be >= 1, got {workers}")
    return workers


def run_sample_jobs(jobs: list[tuple]) -> list[dict]:
    """Execute training jobs on the configured worker pool, order preserved."""
    workers = _worker_count()
    if workers == 1 or len(jobs) == 1:
        return [_sweep_sample(job) for job in jobs]
    with multiprocessing.Pool(min(workers, len(jobs))) as pool:
        return pool.map(_sweep_sample, jobs)


def cmd_sweep(config_path: str | None, axis: str, values, n_samples: int,
              out_dir: str, seed: int | None = None) -> RunManifest:
    """Sweep one config axis with n_samples independent seeded runs per value."""
    t0 = time.perf_counter()
    base = load_config(config_path, seed)
    values = _validate_sweep_values(axis, values)
    n_samples = _as_int(n_samples, "samples")
    if n_samples < 1:
        raise ConfigError("samples: must be >= 1")
    _prepare_out_dir(out_dir)
    echo = config_to_dict(base)
    out = _OutputSet(out_dir)
    try:
        jobs = []
        for value in values:
            cfg_v = _config_for_axis(base, axis, value)
            for i in range(n_samples):
                jobs.append((axis, value, i,
                             replace(cfg_v, master_seed=base.master_seed + i)))
        _echo(f"[sweep] axis {axis}, values {values}: "
              f"{len(jobs)} training runs on {_worker_count()} worker(s)")
        results = run_sample_jobs(jobs)
        t_runs = time.perf_counter()

        finals_rows = []
        failed_by_value: dict[str, int] = {}
        for value in values:
            got = [r for r in results if r["axis_value"] == value]
            ok = [r for r in got if r["ok"]]
            for r in got:
                if not r["ok"]:
                    _echo(f"[sweep] warning: {axis}={value} sample "
                          f"{r['sample_index']} (seed {r['seed']}) failed: "
                          f"{r['error']}")
            if len(ok) < len(got):
                failed_by_value[fmt_sig(value)] = len(got) - len(ok)

            label = fmt_sig(value)
            curve_path = out.path(f"sweep_{axis}_{label}_curve.csv")
            if ok:
                cfg_v = _config_for_axis(base, axis, value)
                t = np.arange(cfg_v.n_segments + 1) * cfg_v.segment_duration
                traj = np.array([r["trajectory"] for r in ok])
                mean = traj.mean(axis=0)
                if len(ok) > 1:
                    stderr = traj.std(axis=0, ddof=1) / math.sqrt(len(ok))
                else:
                    stderr = np.zeros_like(mean)
                db = to_decibels(mean)
                rows = ([fmt_sig(t[i]), fmt_sig(mean[i]), fmt_sig(stderr[i]),
                         fmt_sig(db[i]), str(len(ok))]
                        for i in range(t.size))
            else:
                rows = ()
            write_csv(curve_path, [n for n, _ in SWEEP_CURVE_COLUMNS], rows)
            out.add(curve_path, write_sidecar(
                curve_path, "sweep-curve", SWEEP_CURVE_COLUMNS, echo,
                notes=(f"axis {axis} = {label}",
                       f"{len(ok)} of {len(got)} samples usable")))

            for r in ok:
                finals_rows.append([
                    axis, label, str(r["sample_index"]), str(r["seed"]),
                    str(r["best_epoch"]), fmt_sig(r["final"]),
                    fmt_sig(to_decibels(r["final"])), fmt_sig(r["min_xi"]),
                    str(r["n_divergent"])])

        finals_path = out.path(f"sweep_{axis}_finals.csv")
        write_csv(finals_path, [n for n, _ in SWEEP_FINAL_COLUMNS], finals_rows)
        out.add(finals_path, write_sidecar(
            finals_path, "sweep-finals", SWEEP_FINAL_COLUMNS, echo,
            notes=(f"axis {axis}, values {', '.join(map(fmt_sig, values))}",
                   f"{n_samples} samples per value, seeds "
                   f"{base.master_seed}..{base.master_seed + n_samples - 1}")))

        inputs = _config_inputs(base, config_path)
        inputs["axis"] = axis
        inputs["values"] = [fmt_sig(v) for v in values]
        inputs["samples"] = n_samples
        n_failed = sum(failed_by_value.values())
        warnings = {}
        if n_failed:
            warnings = {"failed_samples": n_failed,
                        "failed_by_value": failed_by_value}
        manifest = build_manifest(
            "sweep", echo, inputs,
            [base.master_seed + i for i in range(n_samples)], out_dir,
            out.paths,
            {"runs": round(t_runs - t0, 3),
             "total": round(time.perf_counter() - t0, 3)},
            warnings=warnings)
        write_manifest(out_dir, manifest)
        _echo(f"[sweep] done: {len(finals_rows)} usable samples, "
              f"{n_failed} failed, artifacts in {out_dir}")
        return manifest
    except BaseException:
        out.discard_all()
        raise


def cmd_replay(schedule_path: str, config_path: str | None, out_dir: str,
               husimi_times=(), seed: int | None = None) -> RunManifest:
    """Open-loop playback of a schedule file, with optional Husimi snapshots."""
    t0 = time.perf_counter()
    config = load_config(config_path, seed)
    try:
        schedule = read_schedule_csv(schedule_path, config)
    except OSError as exc:
        raise ConfigError(f"cannot read schedule {schedule_path}: {exc}") from exc
    times = schedule.times()
    snap_indices = []
    for i, t_req in enumerate(husimi_times):
        t_req = _as_real(t_req, f"husimi-times[{i}]")
        hits = np.nonzero(np.abs(times - t_req) <= 1e-9)[0]
        if hits.size == 0:
            raise ConfigError(
                f"husimi-times[{i}]: {fmt_sig(t_req)} is not a segment "
                f"boundary of the configured grid")
        snap_indices.append(int(hits[0]))

    _prepare_out_dir(out_dir)
    echo = config_to_dict(config)
    out = _OutputSet(out_dir)
    try:
        traj = evaluate_schedule(config, schedule,
                                 keep_states=bool(snap_indices))
        path = out.path("replay_trajectory.csv")
        write_trajectory_csv(path, traj)
        out.add(path, write_sidecar(
            path, "trajectory", TRAJECTORY_COLUMNS, echo,
            notes=(f"open-loop replay of {os.path.basename(schedule_path)}",)))

        if snap_indices:
            ops = build_spin_operators(config.n_atoms)
            theta, phi = husimi_grid_axes(HUSIMI_N_THETA, HUSIMI_N_PHI)
            for i in snap_indices:
                grid = husimi_grid(traj.states[i], ops, HUSIMI_N_THETA,
                                   HUSIMI_N_PHI)
                t_label = fmt_sig(times[i])
                path = out.path(f"husimi_t{t_label}.csv")
                write_husimi_csv(path, theta, phi, grid)
                out.add(path, write_sidecar(
                    path, "husimi-grid", HUSIMI_COLUMNS, echo,
                    notes=(f"snapshot at t = {t_label}",
                           "raw coherent-state overlap, no density factor",
                           "cell-centered midpoint grid")))

        inputs = _config_inputs(config, config_path)
        inputs["schedule_file"] = sha256_file(schedule_path)
        manifest = build_manifest(
            "replay", echo, inputs, [], out_dir, out.paths,
            {"total": round(time.perf_counter() - t0, 3)})
        write_manifest(out_dir, manifest)
        _echo(f"[replay] final xi_z_sq {fmt_sig(traj.xi_z_sq[-1])} "
              f"({fmt_sig(traj.xi_z_db[-1])} dB), artifacts in {out_dir}")
        return manifest
    except BaseException:
        out.discard_all()
        raise


def cmd_checkpoint_roundtrip(path: str) -> dict:
    """Verify a checkpoint survives load -> save and reproduces its Q-values."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from exc
    agent = checkpoint_from_bytes(data)
    canon = checkpoint_to_bytes(agent)
    again = checkpoint_to_bytes(checkpoint_from_bytes(canon))
    if canon != again:
        raise RuntimeError("canonical form is not stable under load/save")

    doc = json.loads(data.decode())
    probe = np.asarray(doc["probe"]["obs"])
    stored = np.asarray(doc["probe"]["q_values"])
    recomputed = qnet_forward(agent.params, probe)
    diff = float(np.max(np.abs(recomputed - stored)))
    if diff > 1e-12:
        raise RuntimeError(
            f"loaded network fails to reproduce stored probe Q-values "
            f"(max abs diff {diff:.3e})")

    status = {
        "path": path,
        "bytes": len(canon),
        "canonical": data == canon,
        "probe_max_abs_diff": diff,
        "ok": True,
    }
    _echo(f"[checkpoint] roundtrip OK: {len(canon)} canonical bytes, "
          f"probe diff {diff:.1e}, "
          f"file {'is' if status['canonical'] else 'is not'} canonical")
    return status


# --- argument parsing -----------------------------------------------------------

def _parse_values(text: str, axis: str) -> list:
    items = [s.strip() for s in text.split(",") if s.strip()]
    values = []
    for s in items:
        try:
            values.append(float(s) if axis == "thermal" else int(s))
        except ValueError as exc:
            raise ConfigError(
                f"values: {s!r} is not a valid {axis} value") from exc
    return values


def _parse_times(text: str) -> list[float]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    times = []
    for s in items:
        try:
            times.append(float(s))
        except ValueError as exc:
            raise ConfigError(f"husimi-times: {s!r} is not a number") from exc
    return times


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezerl",
        description="Reinforcement-learned control pulses for spin squeezing")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", metavar="PATH", default=None,
                       help="JSON config file (defaults reproduce the "
                            "headline experiment)")
        p.add_argument("--out", metavar="DIR", required=True,
                       help="output directory for artifacts")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override master_seed")

    p = sub.add_parser("train", help="one full training run")
    common(p)

    p = sub.add_parser("baseline", help="constant-amplitude reference")
    common(p)
    p.add_argument("--amplitude", type=float, default=-2.0,
                   help="constant control amplitude (default -2)")

    p = sub.add_parser("sweep", help="seeded training sweep over one axis")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, metavar="LIST",
                   help="comma-separated axis values, e.g. 20,40,100")
    p.add_argument("--samples", type=int, default=30,
                   help="independent runs per value (default 30)")

    p = sub.add_parser("replay", help="open-loop playback of a schedule file")
    p.add_argument("schedule", metavar="SCHEDULE_CSV")
    common(p)
    p.add_argument("--husimi-times", metavar="LIST", default=None,
                   help="comma-separated boundary times for phase-space "
                        "snapshots, e.g. 0,2")

    p = sub.add_parser("checkpoint", help="verify an agent checkpoint file")
    p.add_argument("path", metavar="CHECKPOINT_JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "train":
            cmd_train(args.config, args.out, seed=args.seed)
        elif args.command == "baseline":
            cmd_baseline(args.config, args.amplitude, args.out, seed=args.seed)
        elif args.command == "sweep":
            values = _parse_values(args.values, args.axis)
            cmd_sweep(args.config, args.axis, values, args.samples, args.out,
                      seed=args.seed)
        elif args.command == "replay":
            times = () if args.husimi_times is None else _parse_times(
                args.husimi_times)
            cmd_replay(args.schedule, args.config, args.out,
                       husimi_times=times, seed=args.seed)
        else:
            cmd_checkpoint_roundtrip(args.path)
        return 0
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
