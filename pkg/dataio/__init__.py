"""Datasets, augmentation and multiview batching."""
