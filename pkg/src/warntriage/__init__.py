"""warntriage: track, label, contextualize, and classify static-analyzer
warnings across a commit series."""

__version__ = "0.1.0"
