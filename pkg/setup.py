#!/usr/bin/env python3
"""
Setup script for comprestore.
This file is kept for backward compatibility with older tools.

file: setup.py
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="comprestore",
    description="Perception-conditioned restoration of images with compositional degradations",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="Your Name",
    author_email="you@example.com",
    license="MIT",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"comprestore": ["data/*.json"]},
    install_requires=[
        "torch>=2.1",
        "numpy>=1.24",
        "scipy>=1.10",
        "Pillow>=9.5",
        "einops>=0.7",
        "tqdm>=4.65",
        "matplotlib>=3.7",
    ],
    extras_require={
        "vlm": ["transformers>=4.35"],
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "comprestore=comprestore.__main__:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Image Processing",
    ],
    python_requires=">=3.10",
    include_package_data=True,
)
