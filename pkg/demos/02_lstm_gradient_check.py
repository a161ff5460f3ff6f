"""The LSTM forecaster and its backpropagation-through-time gradient.

Runs a tiny network on random sequences and compares the analytic gradient
with central finite differences.
"""

#%% A small model
import numpy as np

from dlstm.lstm import SequenceSample, backward_bptt, empirical_loss, init_params, predict
from dlstm.lstm import LstmParams
from dlstm.numerics import finite_difference_gradient, relative_error

D, H, E, T = 3, 4, 2, 6
p = init_params(D, H, E, seed=0)
print("parameters:", p.flat().size)

rng = np.random.default_rng(1)
batch = [SequenceSample(rng.uniform(size=(T, D)), rng.uniform(size=E), rng.uniform())
         for _ in range(4)]
print("forecasts:", [round(predict(p, s), 4) for s in batch])
print("loss:", empirical_loss(p, batch))

#%% Gradient check
grad = backward_bptt(p, batch)
fd = finite_difference_gradient(
    lambda th: empirical_loss(LstmParams.from_flat(th, D, H, E), batch), p.flat())
err = relative_error(grad, fd)
print(f"max relative error {err.max():.2e} over {err.size} coordinates")

#%% A few steps of gradient descent
theta = p.flat()
for step in range(5):
    g = backward_bptt(LstmParams.from_flat(theta, D, H, E), batch)
    theta = theta - 0.5 * g
    print(step, empirical_loss(LstmParams.from_flat(theta, D, H, E), batch))
