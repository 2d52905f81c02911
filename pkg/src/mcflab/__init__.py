"""Numerical laboratory for axisymmetric mean curvature flow with surgery.

Modules cover discrete closed plane curves (curve2d), height-indexed
cross-section families and generating curves (neckmodel), the explicit
neck-rounding surgery construction (surgery), weighted Gaussian surface
integrals (gaussfunc), an axisymmetric flow-with-surgery driver (flow),
the inequality verification harness (verify), and a batch CLI (cli).
"""

__version__ = "0.1.0"
