"""Table explicitation evaluation: table models, metrics, repair pipelines, reports."""

__version__ = "0.1.0"
