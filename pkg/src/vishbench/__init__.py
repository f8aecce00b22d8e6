"""Adversarial robustness harness for vishing-transcript classifiers."""

__version__ = "0.1.0"
