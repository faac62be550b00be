"""A single Pure Pursuit lap on the bundled oval, no opponent.

Shows how tightly the geometric tracker follows the raceline and how long a
30 Hz control step takes.
"""

import numpy as np

from gatedrive.config import load_scenario
from gatedrive.harness import make_controller
from gatedrive.sim import run_heat

sc = load_scenario("lap")
rec = run_heat(sc, make_controller("pure_pursuit", sc), seed=0, heat=0, method="pure_pursuit")

print(f"outcome           {rec.outcome}")
print(f"simulated time    {rec.sim_time:.1f} s over {rec.steps} control steps")
print(f"max cross-track   {rec.max_cross_track * 100:.1f} cm")
print(f"step runtime      mean {np.mean(rec.runtime_ms):.3f} ms, max {np.max(rec.runtime_ms):.3f} ms")
