from setuptools import setup, find_namespace_packages

def get_version():
    version = {}
    with open('equity_tune/_version.py') as fp:
        exec(fp.read(), version)

    return version['__version__']


setup(
    name="equity-tune",
    version=get_version(),
    description="Fairness-aware adapter finetuning and equity-scaled evaluation "
    "for feature-conditioned report generation",
    packages=find_namespace_packages(include=["equity_tune.*", "equity_tune"]),
    package_data={'equity_tune': ['templates/*.j2']},
    include_package_data=True,
    install_requires=[
        "Jinja2",
        "pytest",
        "PyYAML",
        "cattrs",
        "attrs",
        "click",
        "numpy",
        "pandas",
        "ujson",
    ],
    long_description="Fairness-aware adapter finetuning and equity-scaled evaluation",
    long_description_content_type="text/markdown",
    python_requires=">=3.8",
    entry_points="""
        [console_scripts]
        eqtune=equity_tune.cli:cli
    """,
)
