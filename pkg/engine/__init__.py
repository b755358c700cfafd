"""Minimal reverse-mode autodiff engine."""
