"""Non-blind image restoration with degradation-attribute conditioning.

A residual convolutional network takes a degraded image plus three
per-pixel attribute channels (noise level, scale factor, JPEG quality) and
predicts the restoration residual.  The package bundles the synthetic
degradation operators, attribute encoders, dataset generation, training,
metrics, benchmark suites, a CLI, and an HTTP inference service.
"""

__version__ = "0.1.0"
