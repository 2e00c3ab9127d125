"""Domain types: cameras, frames, meshes, trajectories, scenes and configs."""
