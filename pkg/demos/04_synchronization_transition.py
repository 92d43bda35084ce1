"""The Kuramoto synchronisation transition, desk scale.

A population of noisy phase oscillators synchronises when the mean-field
coupling K exceeds the critical value 2/(5 pi) of this frequency
distribution.  The phase coherence r(t) (modulus of the complex order
parameter) separates the two regimes: below the transition it fluctuates
near 0, above it climbs towards 1.  Uses a reduced population and ensemble
so it finishes in seconds; the acceptance suite runs the full-size protocol.
"""

from sdebatch import (EngineConfig, coherence_series, ensemble_stats,
                      kuramoto_model, run_batch)
from sdebatch.analysis import first_crossing_time, kymograph_export
from sdebatch.model import (KURAMOTO_CRITICAL_COUPLING, accuracy_protocol_batch)
from sdebatch.storage import write_matrix_csv

N = 50
REALIZATIONS = 16
model = kuramoto_model(N)
print("critical coupling for this frequency distribution: %.4f"
      % KURAMOTO_CRITICAL_COUPLING)

for coupling in (0.02, 0.2):
    batch = accuracy_protocol_batch(N, REALIZATIONS, coupling, seed=3)
    config = EngineConfig(dt=0.05, tspan=200.0, ksteps=40,
                          orbits=REALIZATIONS, solver="em", seed=3)
    store = run_batch(model, config, batch)
    stats = ensemble_stats(coherence_series(store))
    crossing = first_crossing_time(stats.times, stats.mean_r, 0.8)
    side = "below" if coupling < KURAMOTO_CRITICAL_COUPLING else "above"
    print("K=%.2f (%s transition): mean r(end) = %.3f +/- %.3f, first "
          "crossing of 0.8 at t = %s"
          % (coupling, side, stats.mean_r[-1], stats.std_r[-1], crossing))

    # ensemble curve and one kymograph, ready for any plotting tool
    rows = [[stats.times[k], stats.mean_r[k], stats.std_r[k]]
            for k in range(stats.times.size)]
    write_matrix_csv("ensemble_K%.2f.csv" % coupling,
                     ["time", "mean_r", "std_r"], rows)
    grid = kymograph_export(store, orbit=0)
    rows = [[store.times[k]] + list(grid[k]) for k in range(store.samples)]
    write_matrix_csv("kymograph_K%.2f.csv" % coupling,
                     ["time"] + ["osc%d" % j for j in range(N)], rows)
    print("  wrote ensemble_K%.2f.csv and kymograph_K%.2f.csv"
          % (coupling, coupling))
