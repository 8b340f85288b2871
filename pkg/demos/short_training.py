# A short NFQ run end to end
#
# Full runs take several minutes per seed.  This one shrinks the schedule to
# 40 episodes with 100 epochs per iteration so it finishes in well under a
# minute, then exports plot-ready series for the learning curve.

import tempfile
from pathlib import Path

from nfq_steer.config import build_config
from nfq_steer.harness import cmd_eval, cmd_export_plots, cmd_train

out = Path(tempfile.mkdtemp(prefix="nfq-train-"))
config = build_config(seed=0, out=str(out), overrides=[
    "nfq.episodes=40", "nfq.reset_period=20", "nfq.epochs=100"])

outcome = cmd_train(config)
for q in outcome.summary["quarters"]:
    print(q)

# Checkpoints are written before every reset and at the end.
print([p.name for p in outcome.checkpoints])

# Greedy evaluation of the final network.
report = cmd_eval(outcome.checkpoints[-1], config, n_episodes=20)
print(report)

series, quarters = cmd_export_plots(outcome.metrics_path)
print("plot data:", series, quarters)
