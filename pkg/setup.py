from setuptools import setup
from re import findall

with open("debian/changelog", "r") as clog:
    _, version, _ = findall(
        r"(?P<src>.*) \((?P<version>.*)\) (?P<suite>.*); .*",
        clog.readline().strip(),
    )[0]

setup(
    name="pivatlas",
    version=version,
    description="Optimal Gaussian elimination pivots on small sparsity"
    " patterns, by exhaustive search",
    install_requires=["pyzmq", "numpy"],
    extras_require={"test": ["hypothesis"]},
    license="MIT",
    packages=[
        "pivatlas",
    ],
    scripts=["scripts/pivatlas"],
    long_description=open("README.md").read(),
)
