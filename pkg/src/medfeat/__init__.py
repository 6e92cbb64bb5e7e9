"""Explainability-driven, model-aware feature engineering for tabular prediction."""

__version__ = "0.1.0"
