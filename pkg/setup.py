#!/usr/bin/env python
import os
import sys

if sys.version_info < (3, 9):
    print("Error: ddnx-density does not support this version of Python.")
    print("Please upgrade to Python 3.9 or higher.")
    sys.exit(1)


from setuptools import setup

try:
    from setuptools import find_packages
except ImportError:
    # the user has a downlevel version of setuptools.
    print("Error: ddnx-density requires setuptools v40.1.0 or higher.")
    print('Please upgrade setuptools with "pip install --upgrade setuptools" ' "and try again")
    sys.exit(1)


package_name = "ddnx-density"
# When updating the package_version here, you must update the version in ddn.__version__ as well
package_version = "0.3.1"
description = """Deconvolutional density networks for free-form conditional density estimation"""

this_directory = os.path.abspath(os.path.dirname(__file__))
with open(os.path.join(this_directory, "README.md")) as f:
    long_description = f.read()

setup(
    name=package_name,
    version=package_version,
    description=description,
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["ddn", "ddn.*"]),
    include_package_data=True,
    package_data={"ddn.include": ["*.yml"]},
    install_requires=[
        "dbt-core~=1.7.0",
        "numpy>=1.22",
        "scipy>=1.8",
        "scikit-learn>=1.2",
        # installed via dbt-core, but referenced directly, don't pin to avoid version conflicts with dbt-core
        "agate",
        "mashumaro",
        "typing-extensions",
        "PyYAML>=6.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": ["ddn=ddn.cli.main:main"],
    },
    zip_safe=False,
    classifiers=[
        "Development Status :: 4 - Beta",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: Microsoft :: Windows",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: POSIX :: Linux",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
)
