"""Circuit-level simulation of lattice-surgery teleportation between two
surface-code patches with a noisier linking region."""

__version__ = "0.1.0"
