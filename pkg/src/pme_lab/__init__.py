"""Porous-medium equation lab: alpha-concavity breaking experiments."""
__version__ = "0.1.0"
