# How Rprop adapts its step sizes
#
# Rprop ignores gradient magnitude: each weight keeps its own step size that
# grows by 1.2 while the gradient sign is stable and halves when it flips.
# Here we fit a one-weight "network" and watch the step size evolve.

import numpy as np

from nfq_steer.net import LayerSpec, PatternSet, RpropState, init_network, rprop_epoch

spec = LayerSpec((1, 1))
net = init_network(spec, seed=0)
opt = RpropState.fresh(spec.n_params)

# Learn sigmoid(w*x + b) ~= 0.8 for x = 1.
patterns = PatternSet(np.array([[1.0]]), np.array([0.8]))

print("epoch   w          b          step(w)   step(b)")
for epoch in range(15):
    net, opt = rprop_epoch(net, opt, patterns)
    w, b = net.flat
    print(f"{epoch:5d}  {w:+.6f}  {b:+.6f}  {opt.delta[0]:.5f}  {opt.delta[1]:.5f}")

# Once the target is overshot the signs start flipping and the step sizes
# collapse geometrically -- the optimizer homes in without any learning rate.
