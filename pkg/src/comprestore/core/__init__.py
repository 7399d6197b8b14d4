"""
file: src/comprestore/core/__init__.py
Config, logging, errors and the CLI parser.
"""
