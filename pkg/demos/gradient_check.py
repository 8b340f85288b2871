# Checking the hand-written backpropagation against finite differences
#
# The Q-network is a tiny [4, 5, 5, 1] sigmoid MLP whose gradient is written
# out by hand.  Before trusting any learning curve it is worth confirming that
# the analytic gradient agrees with a numerical one.

import numpy as np

from nfq_steer.net import (NetworkParams, PatternSet, Q_SPEC, batch_gradient, batch_loss,
                           init_network)

rng = np.random.default_rng(7)

# A random network and a random batch of ten patterns.
net = init_network(Q_SPEC, seed=3)
patterns = PatternSet(rng.uniform(-1, 1, (10, 4)), rng.uniform(0, 1, 10))
print("parameters:", Q_SPEC.n_params)
print("loss:", batch_loss(net, patterns))

# Central differences, one parameter at a time.
h = 1e-5
numeric = np.empty(Q_SPEC.n_params)
for i in range(Q_SPEC.n_params):
    up, down = net.flat.copy(), net.flat.copy()
    up[i] += h
    down[i] -= h
    numeric[i] = (batch_loss(NetworkParams(Q_SPEC, up), patterns)
                  - batch_loss(NetworkParams(Q_SPEC, down), patterns)) / (2 * h)

analytic = batch_gradient(net, patterns).flat
rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-12)
print("worst relative error:", rel.max())

# The layout of the flat vector: per layer, a row-major weight block followed
# by the bias vector.
for (w, shape, b), weights in zip(Q_SPEC.layer_slices(), net.weights):
    print(f"layer {shape}: weights [{w.start}:{w.stop}], bias [{b.start}:{b.stop}]")
