"""Timing batch runs and measuring thread speedup.

The benchmark harness times run_batch end to end (one untimed warm-up, then
repeated timed runs whose store hashes must agree), sweeps a grid of system
sizes and orbit counts, and reports speedups relative to the single-thread
baseline.  Desk-scale settings here; the CLI exposes the full sweep as
`sdebatch bench`.
"""

import os

from sdebatch import EngineConfig, kuramoto_model, time_run
from sdebatch.bench import scaling_grid, speedup_table, write_bench_csv
from sdebatch.model import speed_protocol_batch

# one cell, by hand
model = kuramoto_model(10)
batch = speed_protocol_batch(10, orbits=2048, seed=0)
config = EngineConfig(dt=0.05, tspan=2.0, ksteps=40, orbits=2048,
                      solver="em", seed=0, threads=1, chunk_group=256)
point = time_run(model, config, batch, repeats=4)
print("N=10, 2048 orbits, 2 s of dynamics, threads=1:")
print("  runtimes:", " ".join("%.3f" % r for r in point.runtimes), "s")
print("  mean %.3f s, std %.3f s" % (point.mean, point.std))

# a small grid plus the speedup table
points, failures = scaling_grid(
    system_sizes=(5, 10), orbit_counts=(256, 1024), thread_counts=(1, "all"),
    dt=0.05, tspan=1.0, ksteps=20, chunk_group=128, seed=0, repeats=3)
assert not failures
print("\ngrid (N x orbits x threads):")
for p in points:
    print("  N=%-3d orbits=%-5d threads=%-4s mean %.4f s"
          % (p.N, p.orbits, p.threads, p.mean))

baseline = [p for p in points if p.threads == 1]
others = [p for p in points if p.threads != 1]
print("\nspeedup over threads=1 (host has %d logical cpus):" % os.cpu_count())
for row in speedup_table(baseline, others):
    print("  N=%-3d orbits=%-5d  %.2fx" % (row.N, row.orbits, row.speedup))

write_bench_csv(points, "bench_demo.csv")
print("\nwrote bench_demo.csv")
