"""Statistics of central derivatives and BSD quantities over quadratic twist families."""

__version__ = "0.1.0"
