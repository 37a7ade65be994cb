from codecs import open
from os import path

from setuptools import setup

pwd = path.abspath(path.dirname(__file__))

with open(path.join(pwd, "README.md"), encoding="utf-8") as f:
    long_description = f.read()

# This call to setup() does all the work
setup(
    name="gnorm",
    version="0.1.0",
    description="Certified bounds on group C*-norms",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="GPL 3.0",
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Operating System :: OS Independent",
    ],
    packages=["gnorm"],
    package_data={"gnorm": ["schema/*.xsd"]},
    include_package_data=True,
    python_requires=">=3.10",
    install_requires=[
        "astropy",
        "click",
        "lxml",
        "numpy",
        "requests",
        "scipy",
        "sympy",
        "xmlschema",
    ],
    entry_points={"console_scripts": ["gnorm=gnorm.cli:main"]},
)
