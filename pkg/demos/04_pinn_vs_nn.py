"""
Fixed-boundary coordinate nets: NN and PINN
===========================================

Both nets map (x, y) to V for one plate length.  The NN sees the solved
field at every node; the PINN sees only the Dirichlet nodes and is held to
the five-point Laplace stencil in the interior and zero slope on the axes.
"""

from capnet import CapacitorSpec, GridSpec, TrainConfig, solve_sor, sse
from capnet.models import _init_coord, CoordNet, interior_residual_ms, train_nn_fixed, train_pinn

grid = GridSpec(21, 21)
spec = CapacitorSpec()
cfg = TrainConfig(coord_epochs=3000, coord_lr=3e-3, coord_hidden=24)

nn, _ = train_nn_fixed(spec, grid, 0.55, cfg)
pinn, _ = train_pinn(spec, grid, 0.55, cfg)
untrained = CoordNet(_init_coord(cfg), 0.55)

for name, model in (("untrained", untrained), ("NN", nn), ("PINN", pinn)):
    print(f"{name:>9}: mean-square Laplace residual {interior_residual_ms(model, spec, grid):.2e}")

# Neither net knows about other plate lengths, so error grows as d moves away
for d in (0.55, 0.6, 0.65, 0.7):
    truth = solve_sor(spec.with_d(d), grid)[0].values
    print(f"d={d}: SSE NN {sse(nn.predict(grid), truth):.3f}, PINN {sse(pinn.predict(grid), truth):.3f}")
