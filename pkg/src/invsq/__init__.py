"""Numerical verification toolkit for the inverse-square Schroedinger operator.

``L_a = -Delta + a/|x|^2`` on ``R^d`` (``d >= 3``, ``a >= -((d-2)/2)^2``),
studied through its radial Hankel-type transform, heat kernels, weighted
inequalities and Morawetz-type smoothing estimates.
"""

__version__ = "0.1.0"
