"""Package marker for scripts."""
