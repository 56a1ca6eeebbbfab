"""Register parameter search for full-revolution spectator rotations and error scaling laws."""
