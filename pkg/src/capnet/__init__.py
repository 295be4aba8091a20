"""Parametric capacitor electrostatics: SOR ground truth, boundary-decoder networks and baselines."""
from .geometry import CapacitorSpec, GridSpec, NodeClass, classify_nodes
from .solver import Field, SolveReport, SolverConfig, field_volume, laplacian_residual, solve_direct, solve_sor
from .dataset import Dataset, Sample, ScaleTransform, generate_dataset, split_supervised
from .models import TrainConfig, boundary_forward, train_boundary_decoder, train_encdec, train_joint, train_nn_fixed, train_pinn
from .experiments import ExperimentConfig, export_heatmap, run_table1, run_table2, sse

__version__ = "0.1.0"
