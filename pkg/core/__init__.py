"""Shared constants, errors, logging and key=value files."""
