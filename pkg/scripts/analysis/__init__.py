"""Fidelity estimation, decay fits and cross-talk matrices."""
