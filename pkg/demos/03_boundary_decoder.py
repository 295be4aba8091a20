"""
Boundary-decoder and joint training
===================================

A small net maps d straight into the latent space, so the decoder returns a
field for any plate length without regression or an initial guess.  Joint
training lets the unlabelled fields shape the same decoder.
"""

import numpy as np

from capnet import CapacitorSpec, GridSpec, ScaleTransform, TrainConfig, boundary_forward, generate_dataset, solve_sor, split_supervised, sse
from capnet.dataset import default_training_d
from capnet.models import train_boundary_decoder, train_joint

grid = GridSpec(21, 21)
spec = CapacitorSpec()
ds = split_supervised(generate_dataset(spec, grid, default_training_d(n=41)), 5, seed=2)

cfg = TrainConfig(epochs=3000, lr=3e-3, hidden=32, latent_dim=4, seed=2)
bou_model, bou_net, _ = train_boundary_decoder(ds, cfg)
joint_model, joint_net, _ = train_joint(ds, cfg)

unscale = ScaleTransform(cfg.scale).invert
print("   d   bou-dec   joint")
for d in (0.3, 0.4, 0.5, 0.6, 0.7, 0.8):
    truth = solve_sor(spec.with_d(d), grid)[0].values
    e_bou = sse(unscale(boundary_forward(bou_net, bou_model.decoder, d)), truth)
    e_joint = sse(unscale(boundary_forward(joint_net, joint_model.decoder, d)), truth)
    print(f"{d:4.1f}  {e_bou:8.4f}  {e_joint:6.4f}")

# A whole sweep of d in one batched call
fields = unscale(boundary_forward(joint_net, joint_model.decoder, np.linspace(0.1, 0.9, 9)))
print("batched output:", fields.shape)
