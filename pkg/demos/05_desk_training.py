"""A short PPO run on the shortened training scenario.

Uses the desk hyperparameters from the bundled config with a reduced step
budget so it finishes in about a minute. The full desk run is
``gatedrive --desk train``.
"""

import dataclasses
import sys
from pathlib import Path

from gatedrive.cli import ppo_from_config, reward_from_config
from gatedrive.config import load_scenario
from gatedrive.ppo import train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 12_000
out = Path(sys.argv[2] if len(sys.argv) > 2 else "runs/demo_train")

sc = load_scenario("train_short")
hp = dataclasses.replace(ppo_from_config(sc.extra["ppo"], desk=True), total_steps=steps, eval_every=3000)
reward = reward_from_config(sc.extra["reward"])

print(f"{'step':>7} {'eval reward':>12} {'success':>8} {'kl':>7} {'entropy':>8}")
res = train(sc, hp, reward, seed=0, out_dir=out,
            progress=lambda r: print(f"{r['step']:7d} {r['eval_reward']:12.3f} {r['eval_success']:8.2f} {r['approx_kl']:7.4f} {r['entropy']:8.3f}", flush=True))
print(f"\nbest checkpoint {res.best_path} (eval reward {res.best_reward:.3f})")
