"""Minute-level, road-level traffic accident risk prediction.

Builds road-graph datasets from a road network plus per-minute dynamic
streams, trains a GCN+LSTM risk model on them with a self-contained
reverse-mode autodiff engine, and reproduces the hyper-parameter and
adjacency-filter experiments at desk scale on synthetic data.
"""

__version__ = "0.1.0"
