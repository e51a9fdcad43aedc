"""Vis-NIR soil spectroscopy toolkit: preprocessing, regression, cost-sensitive
classification and band ranking."""

__version__ = "0.1.0"
