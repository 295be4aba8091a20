"""
Inverse prediction through an autoencoder latent space
======================================================

The baseline pipeline: train an autoencoder on solved fields, regress d on
the latent codes, then project a starting code onto the hyperplane
z . phi = d and decode it. The same projection can be done on raw fields.
"""

import numpy as np

from capnet import CapacitorSpec, GridSpec, ScaleTransform, TrainConfig, generate_dataset, solve_sor, split_supervised, sse
from capnet.dataset import default_training_d
from capnet.inverse import fit_latent_regression, fit_raw_regression, inverse_latent, inverse_raw_space
from capnet.models import train_encdec

grid = GridSpec(21, 21)
spec = CapacitorSpec()
ds = generate_dataset(spec, grid, default_training_d(n=41))
ds = split_supervised(ds, 10, seed=1)
print("corpus:", ds.m, "fields,", len(ds.supervised_indices), "with labels")

cfg = TrainConfig(epochs=1500, lr=3e-3, hidden=32, latent_dim=4)
encdec, history = train_encdec(ds, cfg)
print(f"reconstruction SSE {history[0]:.2f} -> {history[-1]:.4f}")

# Both regressions are fitted on the labelled rows only
latent = fit_latent_regression(ds, encdec)
raw = fit_raw_regression(ds)

# The starting point is the training field 0.2 away from the target d
for d in (0.3, 0.6):
    truth = solve_sor(spec.with_d(d), grid)[0].values
    v_lat, res = inverse_latent(ds, encdec, latent, d)
    v_raw, _ = inverse_raw_space(ds, raw, d)
    print(f"d={d}: start at {res.init_d:.2f}, SSE latent {sse(v_lat, truth):.3f}, raw {sse(v_raw, truth):.3f}")
