"""fusionkit: skin segmentation, classifier-ensemble fusion, and evaluation
tooling for driver-distraction prediction streams.

Subpackages are importable individually; the compiled kernel core is optional
(see :mod:`fusionkit.backend`).
"""

__version__ = "0.1.0"
