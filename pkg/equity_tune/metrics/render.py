"""Render JSON reports as markdown tables."""

from jinja2 import Environment, PackageLoader

from . import formatters

REPORT_TEMPLATE = "report.md.j2"
COUNTERFACTUAL_TEMPLATE = "counterfactual.md.j2"
CHECKS_TEMPLATE = "checks.md.j2"


def jinja_env() -> Environment:
    """Prepare and load custom formatters into the jinja environment."""
    env = Environment(
        loader=PackageLoader("equity_tune", "templates"),
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )

    # load custom formatters into Jinja env
    for name in dir(formatters):
        func = getattr(formatters, name)
        if not callable(func):
            continue

        env.filters[name] = func

    return env


def render(template: str, **kwargs) -> str:
    """Render one of the packaged templates."""
    return jinja_env().get_template(template).render(**kwargs)
