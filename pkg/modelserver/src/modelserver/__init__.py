"""HTTP adapter serving generative QA checkpoints over the probe protocol."""

__version__ = "0.1.0"
