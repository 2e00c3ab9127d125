"""Colormap tables for depth encoding."""
