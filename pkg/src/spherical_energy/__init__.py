"""Riesz and kernel energies, design certificates and jittered sampling on spheres."""

__version__ = "0.1.0"
