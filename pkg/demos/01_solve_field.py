"""
Solving the capacitor quadrant
==============================

The quadrant is the unit square. The plate sits on y=0 for x <= d/2 at v0,
the far walls are grounded and the two axes are mirror planes.
"""

import numpy as np

from capnet import CapacitorSpec, GridSpec, field_volume, solve_direct, solve_sor
from capnet.experiments import export_heatmap

# SOR is the workhorse; the dense direct solve is only feasible on small grids
spec = CapacitorSpec(d=0.5)
small = GridSpec(17, 17)
sor, report = solve_sor(spec, small)
direct = solve_direct(spec, small)
print("sweeps:", report.iterations, " max |sor - direct|:", np.abs(sor.values - direct.values).max())

# A longer plate raises the potential everywhere (the "volume" grows with d)
grid = GridSpec(43, 43)
for d in (0.2, 0.5, 0.8):
    field, _ = solve_sor(spec.with_d(d), grid)
    print(f"d={d}: volume {field_volume(field):.4f}, V at the centre {field.as_grid()[21, 21]:.4f}")

# Heatmap of the last field: PGM for a quick look, CSV for full precision
export_heatmap(field, "field_d08.pgm")
export_heatmap(field, "field_d08.csv", fmt="csv")
