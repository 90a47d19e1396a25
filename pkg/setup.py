import setuptools

from pydiapir import __version__

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="pydiapir",
    version=__version__,
    description="Successive linear approximation simulator for salt diapirs in two-layer viscoelastic solids",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    python_requires=">=3.9",
    install_requires=[
        'numpy',
        'scipy>=1.12',
        'tomli; python_version < "3.11"',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': ['pydiapir=pydiapir.__main__:main'],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
