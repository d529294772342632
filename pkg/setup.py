"""The setup script."""

from setuptools import find_packages, setup

with open("README.md") as readme_file:
    readme = readme_file.read()

setup(
    name="aiodeconv",
    version="26.10.0",
    description="Cell-type deconvolution of expression mixtures running on Python 3.",
    long_description=readme,
    long_description_content_type="text/markdown",
    package_data={"aiodeconv": ["py.typed"]},
    packages=find_packages(include=["aiodeconv", "aiodeconv*"]),
    install_requires=[
        "aiofiles>=0.3.0",
        "numpy>=1.24",
        "scipy>=1.11",
        "pandas>=2.0",
        "cvxpy>=1.4",
    ],
    entry_points={"console_scripts": ["aiodeconv=aiodeconv.cli:main"]},
    keywords=["aiodeconv", "deconvolution", "gene expression", "cell-type"],
    license="MIT license",
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
    ],
    python_requires=">=3.10",
)
