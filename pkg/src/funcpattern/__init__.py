"""Group-level mean pattern detection in noisy longitudinal curves."""
