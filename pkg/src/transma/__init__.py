"""Two-encoder molecular property regression with fingerprint, cliff and split tooling."""

__version__ = "0.1.0"
