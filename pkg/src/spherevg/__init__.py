"""Semiclassical hard-sphere propagator."""
