"""Soft variable discretization, information measures, loss and model."""
