"""Processing stages: alignment, meshing, rasterization, encoding, trajectories, metrics, synthesis."""
