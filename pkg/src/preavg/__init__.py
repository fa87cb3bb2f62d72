"""Pre-averaging estimators for noisy high-frequency observations."""
