"""Acceptance suite: one test per shipped claim, each printing a PASS/FAIL line.

The statistical criteria (5 through 9) train full agents and take hours at the
default 30 samples per configuration. SQUEEZERL_ACCEPT_SAMPLES reduces the
sample count for quick passes (the statistical gates were calibrated at 30;
small subsamples can fall outside the bands by ordinary sampling noise).
Run sets are built lazily and shared across criteria within one session.
"""

import json
import math
import os
import time
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest

from conftest import random_density_matrix, scan_xi_perp
from squeezerl import dqn
from squeezerl.cli import cmd_train, run_sample_jobs
from squeezerl.dynamics import (
    IntegratorConfig,
    NoiseParams,
    evolve_segment,
    propagate_exact,
)
from squeezerl.env import (
    ControlSchedule,
    ExperimentConfig,
    constant_schedule,
    evaluate_schedule,
)
from squeezerl.metrics import qfi, xi_perp_squared, xi_z_squared
from squeezerl.spin_core import (
    build_spin_operators,
    coherent_spin_state,
    css_state_vector,
    expectation,
)

SAMPLES = int(os.environ.get("SQUEEZERL_ACCEPT_SAMPLES", "30"))


@pytest.fixture
def record(pytestconfig):
    def _record(line: str) -> None:
        lines = getattr(pytestconfig, "_acceptance_lines", None)
        if lines is not None:
            lines.append(line)
        print(line)
    return _record


def verdict(record, criterion, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
    record(line)
    assert ok, line


# --- run sets shared by the statistical criteria --------------------------------


def _set_config(tag: str) -> ExperimentConfig:
    base = ExperimentConfig()
    if tag == "default":
        return base
    if tag == "seg20":
        return replace(base, n_segments=20)
    if tag == "n10":
        return replace(base, n_atoms=10)
    if tag == "n40":
        return replace(base, n_atoms=40)
    if tag.startswith("nth"):
        return replace(base, noise=NoiseParams(gamma=1e-3, gamma_z=1e-3,
                                               n_th=float(tag[3:])))
    raise KeyError(tag)


@lru_cache(maxsize=None)
def training_set(tag: str) -> tuple:
    """SAMPLES independent seeded runs of one configuration, summarized."""
    cfg = _set_config(tag)
    jobs = [(tag, 0, i, replace(cfg, master_seed=cfg.master_seed + i))
            for i in range(SAMPLES)]
    results = run_sample_jobs(jobs)
    failed = [r for r in results if not r["ok"]]
    assert not failed, f"{tag}: {len(failed)} runs failed: {failed[0]['error']}"
    return tuple(results)


def finals_of(results) -> np.ndarray:
    return np.array([r["final"] for r in results])


# --- criterion 1: integrator against the exact-exponential oracle ---------------


def test_criterion_1_integrator_oracle(record):
    ops = build_spin_operators(20)
    rho0 = coherent_spin_state(20, math.pi / 2.0, 0.0)
    integ = IntegratorConfig()
    worst_seg = 0.0
    worst_traj = 0.0
    for n_th in (0.0, 1.0):
        noise = NoiseParams(gamma=1e-3, gamma_z=1e-3, n_th=n_th)
        for omega in (-2.0, 0.0, 2.0):
            seg = evolve_segment(rho0, omega, 0.02, ops, noise, integ)
            seg_exact = propagate_exact(rho0, omega, 0.02, ops, noise)
            worst_seg = max(worst_seg, float(np.max(np.abs(seg - seg_exact))))

            rho = rho0
            for _ in range(100):
                rho = evolve_segment(rho, omega, 0.02, ops, noise, integ)
            full_exact = propagate_exact(rho0, omega, 2.0, ops, noise)
            worst_traj = max(worst_traj, float(np.max(np.abs(rho - full_exact))))
    ok = worst_seg <= 1e-8 and worst_traj <= 1e-6
    verdict(record, 1, ok,
            f"RK4 vs exact propagator, N=20, 6 (omega, n_th) combos: "
            f"segment max|diff| {worst_seg:.2e} (tol 1e-8), "
            f"t=2 trajectory {worst_traj:.2e} (tol 1e-6)")


# --- criterion 2: operator algebra, coherent-state moments, QFI identities ------


def test_criterion_2_algebra_suite(record):
    worst = 0.0

    def track(err: float) -> None:
        nonlocal worst
        worst = max(worst, float(err))

    rng = np.random.default_rng(22)
    for n in (4, 10, 20):
        ops = build_spin_operators(n)
        j = n / 2.0
        scale = float(np.max(np.abs(ops.jz)))

        # su(2) commutators, cyclic
        for a, b, c in ((ops.jx, ops.jy, ops.jz), (ops.jy, ops.jz, ops.jx),
                        (ops.jz, ops.jx, ops.jy)):
            track(np.max(np.abs(a @ b - b @ a - 1j * c)) / scale)

        casimir = ops.jx @ ops.jx + ops.jy @ ops.jy + ops.jz @ ops.jz
        track(np.max(np.abs(casimir - j * (j + 1) * np.eye(ops.dim))) / (j * (j + 1)))

        css = coherent_spin_state(n, math.pi / 2.0, 0.0)
        track(abs(expectation(css, ops.jx) - j) / j)
        track(abs(xi_z_squared(css, ops) - 1.0))
        xi_perp, _ = xi_perp_squared(css, ops)
        track(abs(xi_perp - 1.0))

        # pure-state identity F = 4 var(G)
        for _ in range(5):
            psi = rng.normal(size=ops.dim) + 1j * rng.normal(size=ops.dim)
            psi /= np.linalg.norm(psi)
            rho = np.outer(psi, psi.conj())
            for gen in (ops.jz, ops.jx):
                var = (expectation(rho, gen @ gen) - expectation(rho, gen) ** 2)
                f = qfi(rho, gen)
                track(abs(f - 4.0 * var) / max(1.0, abs(f)))

        track(abs(qfi(css, ops.jz) - n) / n)

        ghz = css_state_vector(n, 0.0, 0.0) + css_state_vector(n, math.pi, 0.0)
        ghz /= np.linalg.norm(ghz)
        rho_ghz = np.outer(ghz, ghz.conj())
        track(abs(qfi(rho_ghz, ops.jz) - n * n) / (n * n))

    ok = worst <= 1e-6
    verdict(record, 2, ok,
            f"commutators, Casimir, CSS moments, QFI identities at "
            f"N in (4, 10, 20): max relative error {worst:.2e} (tol 1e-6)")


# --- criterion 3: transverse-squeezing angle scan oracle -------------------------


def test_criterion_3_angle_scan_oracle(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(33)
    worst = 0.0
    for n in (4, 10, 20):
        ops = build_spin_operators(n)
        checked = 0
        while checked < 50:
            rho = random_density_matrix(ops.dim, rng)
            try:
                xi, _ = xi_perp_squared(rho, ops)
            except ValueError:
                continue  # mean spin happened to be degenerate; draw again
            ref, _ = scan_xi_perp(rho, ops, n_angles=3600)
            worst = max(worst, abs(xi - ref) / abs(ref))
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 60.0
    verdict(record, 3, ok,
            f"closed-form xi_perp vs 3600-point scan, 50 states x "
            f"N in (4, 10, 20): max relative error {worst:.2e} (tol 1e-6), "
            f"{elapsed:.1f} s (limit 60 s)")


# --- criterion 4: backpropagation against central finite differences -------------


def test_criterion_4_gradient_check(record):
    cfg = dqn.AgentConfig(hidden_sizes=(12,), replay_capacity=64, batch_size=16,
                          warmup_transitions=16)
    rng = np.random.default_rng(44)
    agent = dqn.DqnAgent.fresh(cfg, 10, 3, rng)
    batch_size = 16
    obs = rng.normal(size=(batch_size, 10))
    actions = rng.integers(0, 3, size=batch_size)
    rewards = rng.normal(size=batch_size)
    next_obs = rng.normal(size=(batch_size, 10))
    terminal = (rng.random(batch_size) < 0.25).astype(float)
    targets = dqn.bellman_targets(rewards, next_obs, terminal,
                                  agent.target_params, cfg.gamma_q)

    q, pre, post = dqn._forward_trace(agent.params, obs)
    residual = q[np.arange(batch_size), actions] - targets
    dq = np.zeros_like(q)
    dq[np.arange(batch_size), actions] = (
        dqn._huber_grad(residual, cfg.huber_delta) / batch_size)
    grads = agent._backward(dq, pre, post)

    def loss() -> float:
        qq = dqn.qnet_forward(agent.params, obs)
        taken = qq[np.arange(batch_size), actions]
        return float(np.mean(dqn.huber_loss(taken - targets, cfg.huber_delta)))

    h = 1e-5
    worst = 0.0
    n_checked = 0
    for arrays, grad_arrays in ((agent.params.weights, grads.weights),
                                (agent.params.biases, grads.biases)):
        for arr, g in zip(arrays, grad_arrays):
            flat, gflat = arr.ravel(), g.ravel()
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + h
                up = loss()
                flat[i] = keep - h
                down = loss()
                flat[i] = keep
                fd = (up - down) / (2.0 * h)
                denom = max(abs(fd), abs(gflat[i]))
                if denom > 1e-6:
                    worst = max(worst, abs(fd - gflat[i]) / denom)
                    n_checked += 1
    ok = worst <= 1e-4 and n_checked > 50
    verdict(record, 4, ok,
            f"backprop vs central differences on {n_checked} coordinates: "
            f"max relative error {worst:.2e} (tol 1e-4)")


# --- criterion 5: headline squeezing band over seeded runs ----------------------


def test_criterion_5_headline_band(record):
    results = training_set("default")
    cfg = ExperimentConfig()
    baseline = float(
        evaluate_schedule(cfg, constant_schedule(cfg, -2.0)).xi_z_sq[-1])
    finals = finals_of(results)
    dbs = 10.0 * np.log10(finals)
    frac = float(np.mean(dbs <= -4.0))
    med = float(np.median(dbs))
    beats = bool(np.all(finals < baseline))
    ok = frac >= 0.80 and -7.0 <= med <= -4.0 and beats
    verdict(record, 5, ok,
            f"{len(results)} seeded runs: {100 * frac:.0f}% reach <= -4 dB "
            f"(need >= 80%), median {med:.2f} dB (need within [-7, -4]), "
            f"all beat constant-pulse baseline {baseline:.4f}: {beats}")


def test_learning_progress_over_epochs(record):
    """Typical epoch endpoint improves from the first 100 to the last 100 epochs."""
    results = training_set("default")

    def window_median(r, lo, hi):
        xs = np.array(r["epoch_finals"][lo:hi])
        xs = np.where(np.isnan(xs), 5.0, np.minimum(xs, 5.0))
        return float(np.median(xs))

    early = np.median([window_median(r, 0, 100) for r in results])
    late = np.median([window_median(r, 500, 600) for r in results])
    early_best = np.median([np.nanmin(r["epoch_finals"][0:100]) for r in results])
    late_best = np.median([np.nanmin(r["epoch_finals"][500:600]) for r in results])
    ok = late < early and late_best < early_best
    line = (f"learning check: PASS - " if ok else f"learning check: FAIL - ") + (
        f"median clamped epoch final {early:.2f} -> {late:.2f}, "
        f"median window-best {early_best:.3f} -> {late_best:.3f} "
        f"(first vs last 100 epochs)")
    record(line)
    assert ok, line


# --- criterion 6: finer control grids do not hurt --------------------------------


def test_criterion_6_segment_granularity(record):
    m100 = float(np.mean(finals_of(training_set("default"))))
    m20 = float(np.mean(finals_of(training_set("seg20"))))
    ok = m100 <= m20
    verdict(record, 6, ok,
            f"mean best-of final xi_z_sq: 100 segments {m100:.4f} <= "
            f"20 segments {m20:.4f} ({SAMPLES} samples each)")


# --- criterion 7: more atoms squeeze deeper --------------------------------------


def test_criterion_7_size_scaling(record):
    med = {}
    for tag, n in (("n10", 10), ("default", 20), ("n40", 40)):
        med[n] = float(np.median([r["min_xi"] for r in training_set(tag)]))
    ok = med[10] > med[20] > med[40]
    verdict(record, 7, ok,
            f"median minimum xi_z_sq along the best-of trajectory: "
            f"N=10 {med[10]:.4f} > N=20 {med[20]:.4f} > N=40 {med[40]:.4f} "
            f"({SAMPLES} samples each)")


# --- criterion 8: thermal occupation degrades the reachable squeezing ------------


def test_criterion_8_thermal_ordering(record):
    values = (0.0, 0.1, 0.5, 1.0)
    med = []
    for v in values:
        tag = "default" if v == 0.0 else f"nth{v}"
        med.append(float(np.median(finals_of(training_set(tag)))))
    ok = all(a <= b + 1e-12 for a, b in zip(med, med[1:]))
    shown = ", ".join(f"n_th={v}: {m:.4f}" for v, m in zip(values, med))
    verdict(record, 8, ok,
            f"median best-of final xi_z_sq nondecreasing in n_th ({shown}; "
            f"{SAMPLES} samples each)")


# --- criterion 9: the winning schedule parks the squeezing angle at pi/2 ---------


def test_criterion_9_final_squeezing_angle(record):
    results = training_set("default")
    best = min(results, key=lambda r: r["final"])
    cfg = replace(ExperimentConfig(), master_seed=best["seed"])
    schedule = ControlSchedule(amplitudes=tuple(best["amplitudes"]),
                               segment_duration=cfg.segment_duration)
    traj = evaluate_schedule(cfg, schedule)
    diff = abs(float(traj.varphi[-1]) - math.pi / 2.0)
    ok = diff <= 0.1
    verdict(record, 9, ok,
            f"best run (seed {best['seed']}, final {best['final']:.4f}): "
            f"varphi(t=2) = {traj.varphi[-1]:.4f} rad, "
            f"|varphi - pi/2| = {diff:.4f} (tol 0.1)")


# --- criterion 10: training exports are bit-reproducible -------------------------


def test_criterion_10_export_determinism(record, tmp_path):
    raw = {
        "n_atoms": 10,
        "n_segments": 20,
        "n_epochs": 40,
        "master_seed": 7,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(raw))
    m1 = cmd_train(str(cfg_path), str(tmp_path / "r1"))
    m2 = cmd_train(str(cfg_path), str(tmp_path / "r2"))
    same_artifacts = m1.artifacts == m2.artifacts
    ok = m1.content_hash == m2.content_hash and same_artifacts
    verdict(record, 10, ok,
            f"two cmd_train executions, fixed seed: content hashes "
            f"{'match' if ok else 'differ'} "
            f"({m1.content_hash[:12]}.. vs {m2.content_hash[:12]}..), "
            f"{len(m1.artifacts)} artifacts compared")
