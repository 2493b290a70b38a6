from setuptools import setup, find_packages

exec(open('hhjax/version.py').read())

setup(
    name="hhjax",
    description="Jensen and (tight) Hermite-Hadamard bounds, Karamata functions and residuals with JAX",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    license="Apache 2",
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.8",
    install_requires=["jax", "jaxlib"],
    extras_require={"test": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["hhjax = hhjax.cli:main"]},
    classifiers=[
        "Programming Language :: Python",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    include_package_data=True,
    platforms="any",
    version=__version__
)
