"""Reconstruction-based anomaly detection and per-dimension diagnosis.

Dense and multimodal autoencoders score records by reconstruction error,
and a sparse optimisation over the anomalous record estimates how much
each input dimension contributed to the anomaly.
"""

__version__ = "0.1.0"
