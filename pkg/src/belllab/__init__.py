"""Executable causal models of a multi-mechanism Bell scenario, with fine-tuning
and entropy-drop measures of superdeterministic conspiracy."""

__version__ = "0.1.0"
