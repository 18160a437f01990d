"""Linear control systems on solvable Lie groups: structure, group arithmetic, seeds and control sets."""

__version__ = "0.1.0"
