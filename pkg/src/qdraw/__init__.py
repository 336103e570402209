"""Quality-diversity search over agent-based line drawings."""

__version__ = "0.1.0"
