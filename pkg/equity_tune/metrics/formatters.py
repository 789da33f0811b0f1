"""This file contains custom filters for formatting report values in Jinja templates."""

import numpy as np


def format_score(value, digits=2):
    """Format a score with a fixed number of decimals, or a dash if missing."""
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def format_interval(triple, digits=2):
    """Format a (lower, median, upper) triple as `median [lower, upper]`."""
    if not triple:
        return "-"
    lower, median, upper = triple
    return f"{median:.{digits}f} [{lower:.{digits}f}, {upper:.{digits}f}]"


def format_group(name, flagged):
    """Mark groups excluded from the gap."""
    return f"{name}*" if flagged else name


def format_slice(labels):
    """Format a slice of control attributes as `a=x, b=y`."""
    if not labels:
        return "all"
    return ", ".join(f"{k}={v}" for k, v in labels.items())


def format_pass(ok):
    """Render a boolean check."""
    return "pass" if ok else "FAIL"


def format_number(value):
    """Fixed point for ordinary magnitudes, scientific for tiny ones."""
    if value == 0 or abs(value) >= 1e-3:
        return f"{value:.4f}"
    return f"{value:.3e}"


def format_cell(value):
    """Render one cell of a check table."""
    if isinstance(value, (bool, np.bool_)):
        return format_pass(value)
    if isinstance(value, float):
        return format_number(value)
    return value
