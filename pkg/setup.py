import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="decoherent-histories-cli",
    version="0.1.0",
    author="",
    author_email="",
    description="Decoherent histories of small quantum systems, from your terminal",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.7",
        "PyYAML>=5.1.2",
        "joblib>=1.1",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "decoherent-histories-cli = decoherent_histories_cli.__init__:main",
        ],
    },
    python_requires='>=3.8',
)
