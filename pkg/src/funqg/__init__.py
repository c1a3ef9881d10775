"""Functional-group quotient graphs and message-passing property models."""

__version__ = "0.1.0"
