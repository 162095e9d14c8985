"""ptm-bridge: fine-tune a pre-trained code model on an exported warning
corpus and write score files for the triage pipeline to import."""

__version__ = "0.1.0"
