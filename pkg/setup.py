"""
Setup script for laneshare.
This file is maintained for compatibility with older tools.
For modern Python packaging, see pyproject.toml.
"""

from setuptools import find_packages, setup

setup(
    name="laneshare",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"laneshare.scenarios": ["*.json"]},
    python_requires=">=3.10",
    install_requires=[
        "pydantic>=2.0.0,<3.0.0",
        "networkx>=3.0,<4.0",
        "numpy>=1.24.0,<3.0.0",
        "pandas>=2.0.0,<3.0.0",
    ],
    extras_require={
        "plot": ["matplotlib>=3.7.0,<4.0.0"],
        "dev": [
            "pytest>=7.0.0,<9.0.0",
            "pytest-cov>=4.0.0,<7.0.0",
            "black>=23.0.0,<26.0.0",
            "mypy>=1.0.0,<2.0.0",
            "ruff>=0.1.0,<0.13.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "laneshare=laneshare.cli:main",
        ],
    },
    description="Mesoscopic simulation of coordinated CAV routing on shared bus lanes",
    long_description=open("docs/README.md").read(),
    long_description_content_type="text/markdown",
    license="MIT",
)
