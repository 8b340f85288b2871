# A simulator built from logged data
#
# The replay simulator answers "what happens if I apply action a in state s"
# by finding the nearest logged state (for the same action) and returning its
# recorded successor.  This script collects a log from the physics model,
# builds the replay simulator from it and starts both from identical states.

import tempfile
from pathlib import Path

from nfq_steer.config import build_config
from nfq_steer.harness import cmd_collect, cmd_compare

out = Path(tempfile.mkdtemp(prefix="nfq-demo-"))
config = build_config(seed=1, out=str(out))

# 10,000 random-action transitions from the physics model.
log = cmd_collect(config, n_steps=10_000)
print("transition log:", log)

# 100 random-policy rollouts in each simulator from the same initial states.
report = cmd_compare(config, n=100, dataset=log)
for name in ("physics", "replay"):
    print(name, report[name])

# Under random actions both simulators drift into the forbidden region after
# roughly 80 steps.  The replay simulator can only ever land on logged
# successor states, so its trajectories are piecewise copies of the log.
for name, dumps in report["dumps"].items():
    steps = [d.steps for d in dumps]
    print(f"{name}: mean episode length {sum(steps) / len(steps):.1f}")
print("trajectory files in", out)
