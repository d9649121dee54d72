"""Cross-modality imitation: a text-world expert teaching a feature-based student with DAgger-DPO."""

__version__ = "0.1.0"
