"""Hidden-rule benchmark: game generators, reasoning-error simulator and evaluation harness."""
