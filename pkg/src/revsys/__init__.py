"""Revenue collection with fraud detection: tiered assessment, single-use
payment reference codes, an append-only audit pool, and a watching agent."""

__version__ = "1.0.0"
