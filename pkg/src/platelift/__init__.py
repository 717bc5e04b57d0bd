"""platelift: regrasp planning and lift control for vacuum-lifter assisted plate handling."""

__version__ = "0.1.0"
