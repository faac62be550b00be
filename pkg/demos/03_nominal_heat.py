"""One overtaking heat per method on the evaluation track.

The arbiter runs the bundled reference gate policy. The event log shows when
interaction mode switched on and off and when the pass registered.
"""

from gatedrive.config import load_scenario
from gatedrive.harness import make_controller, resolve_policy
from gatedrive.sim import run_heat

sc = load_scenario("eval")
policy = resolve_policy("reference")

for method in ("pure_pursuit", "arbiter", "mpc"):
    ctrl = make_controller(method, sc, policy if method == "arbiter" else None)
    rec = run_heat(sc, ctrl, seed=0, heat=0, method=method)
    print(f"{method:<13} {rec.outcome:<9} passed={rec.pass_completed!s:<5} "
          f"t={rec.sim_time:5.1f} s  min clearance {rec.min_clearance:.2f} m  unsafe={rec.unsafe_flag}")
    for t, kind in rec.events[:8]:
        print(f"    {t:6.2f} s  {kind}")
    if len(rec.events) > 8:
        print(f"    ... {len(rec.events) - 8} more events")
