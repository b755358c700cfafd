"""Downstream metrics, verifier and exports."""
