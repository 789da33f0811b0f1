"""PyTest configuration."""

import pytest


def pytest_collection_modifyitems(config, items):
    """Skip the multi-seed benchmark runs unless selected with -m or -k."""
    if config.option.keyword or config.option.markexpr:
        return

    skip_benchmark = pytest.mark.skip(reason="benchmark runs need -m integration")
    for item in items:
        if "integration" in item.keywords:
            item.add_marker(skip_benchmark)
