"""A miniature robustness sweep with curves.

Two outlier rates, one seed, two heats per cell. The full grid lives in the
bundled ``sweep`` scenario and runs through ``gatedrive sweep``. MPC heats
that never pass run to the 60 s timeout, so this takes a few minutes.
"""

import sys
from pathlib import Path

from gatedrive.config import load_scenario
from gatedrive.harness import SweepGrid, run_sweep

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo_sweep")
sc = load_scenario("sweep")
grid = SweepGrid(methods=("arbiter", "mpc"), p_out=(0.0, 0.4), seeds=(0,), heats=2)

records, summaries = run_sweep(sc, grid, "reference", out)
print(f"{'method':<10}{'p_out':>6}{'SR_safe':>9}{'T/O':>6}{'Coll':>6}{'mean ms':>9}")
for s in summaries:
    print(f"{s.method:<10}{s.p_out:>6.1f}{s.sr_safe:>9.2f}{s.timeout:>6.2f}{s.coll:>6.2f}{s.runtime_mean_ms:>9.2f}")
print(f"\ncurves and figures written to {out}/")
