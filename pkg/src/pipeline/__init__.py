"""Evaluation, cross-lingual transfer, dictionary sweeps and experiment orchestration."""
