#!/usr/bin/env python3
"""Train the pulse-designing agent on a small instance and race it against
every constant schedule.

N = 10 atoms, 20 segments, a few hundred epochs: seconds of wall time, yet
the learned schedule already beats the best constant drive and parks the
squeezed quadrature on the measurement axis at the end.
"""
import time

import numpy as np

from squeezerl import (
    ExperimentConfig,
    best_of,
    constant_schedule,
    evaluate_schedule,
    run_training,
    to_decibels,
)


def main():
    config = ExperimentConfig(n_atoms=10, t_final=2.0, n_segments=20,
                              n_epochs=300, master_seed=0)

    print(f"N = {config.n_atoms}, {config.n_segments} segments of "
          f"{config.segment_duration} each, actions {config.action_set}")
    print("\nconstant-drive baselines:")
    best_const = np.inf
    for amp in config.action_set:
        traj = evaluate_schedule(config, constant_schedule(config, amp))
        final = traj.xi_z_sq[-1]
        best_const = min(best_const, final)
        print(f"  omega = {amp:+.1f}: final xi_z^2 = {final:.4f} "
              f"({to_decibels(final):+.2f} dB)")

    print(f"\ntraining {config.n_epochs} epochs (seed {config.master_seed})...")
    t0 = time.perf_counter()
    records = run_training(config)
    elapsed = time.perf_counter() - t0

    finals = np.array([r.xi_z_sq[-1] if not r.divergent else np.nan for r in records])
    print(f"done in {elapsed:.1f} s "
          f"({int(np.isnan(finals).sum())} divergent epochs)")
    print("best final so far, sampled along training:")
    for k in range(49, config.n_epochs, 50):
        print(f"  epoch {k + 1:3d}: {np.nanmin(finals[:k + 1]):.4f}")

    schedule, summary = best_of(records)
    print(f"\nwinner: epoch {summary.epoch}, final xi_z^2 = "
          f"{summary.final_xi_z_sq:.4f} ({summary.final_xi_z_db:+.2f} dB)")
    print(f"constant baseline at {best_const:.4f}, learned schedule is "
          f"{best_const / summary.final_xi_z_sq:.2f}x better")
    print("amplitudes:", " ".join(f"{a:+.0f}" for a in schedule.amplitudes))

    traj = evaluate_schedule(config, schedule)
    print(f"\nquadrature angle at t = {config.t_final}: "
          f"varphi = {traj.varphi[-1]:.3f} rad (pi/2 = {np.pi / 2:.3f})")
    print("the squeezed direction ends up aligned with z, where xi_z is measured")
    print(f"{'t':>5} {'xi_z^2':>9} {'dB':>7}")
    for k in range(0, len(traj.times), 2):
        print(f"{traj.times[k]:5.1f} {traj.xi_z_sq[k]:9.4f} {traj.xi_z_db[k]:7.2f}")


if __name__ == "__main__":
    main()
