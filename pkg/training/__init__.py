"""Training configuration, schedule, optimizers and the epoch loop."""
