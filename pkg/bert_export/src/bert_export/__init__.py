"""Per-fold transformer fine-tuning and FMX1 embedding export."""

__version__ = "0.1.0"
