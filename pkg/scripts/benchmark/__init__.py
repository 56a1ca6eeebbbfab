"""Randomized-phase benchmarking of spectator cross-talk."""
