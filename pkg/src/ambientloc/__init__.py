"""Ambient-radio fingerprint localization: calibration, engines, selection, simulation, evaluation."""

__version__ = "0.1.0"
