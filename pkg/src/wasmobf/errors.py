"""Exception types shared across passes."""


class PassError(Exception):
    """A pass refused to transform its input (unsupported layout, bad parameter)."""
