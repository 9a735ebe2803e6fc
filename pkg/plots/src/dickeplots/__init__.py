"""Figure rendering for the drivendicke CSV exports."""

__version__ = "0.1.0"
