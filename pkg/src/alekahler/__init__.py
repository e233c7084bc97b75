"""alekahler - Radial numerics for Ricci-flat ALE Kahler metrics."""

__version__ = "1.0.0"
