"""Synthetic event-camera data from frames."""
