"""Language-model-in-the-loop adaptation stack for a simulated multirotor."""

__version__ = "0.1.0"
