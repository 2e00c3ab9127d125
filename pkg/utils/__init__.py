"""Utility package for shared constants, errors and helpers."""
