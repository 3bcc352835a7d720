"""Passive-BCI decoding of workload and agreement from EEG during spoken dialogue."""
__version__ = "0.1.0"
