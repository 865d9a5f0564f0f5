"""Multi-view active learning with co-testing."""

__version__ = "1.0.0"
