# setup.py
from setuptools import setup, find_packages

setup(
    name="distnorm",
    version="0.1.0",
    packages=find_packages(include=["distnorm", "distnorm.*"]),
    install_requires=[
        "attrs>=23.1",
        "click>=8.1,<8.2",
        "jsonschema>=4.18",
        "numpy>=1.26",
        "scipy>=1.11",
        "structlog>=23.1",
        "sympy>=1.12",
    ],
    extras_require={
        "test": ["hypothesis>=6.80", "pytest>=7.4"],
    },
    entry_points={
        'console_scripts': [
            'distnorm=distnorm.cli:main',
        ],
    },
    description="Distinguishability norms of restricted families of quantum measurements",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
)
