"""Position-dependent snap feedforward for flexible motion systems.

ILC with basis functions learns acceleration and snap feedforward parameters
at a few sensor positions of a flexible beam; a Gaussian process then models
the snap parameter as a continuous function of position.
"""
from .modal import analytic_snap, build_free_free_beam, compliance, freeze
from .trajectory import MotionBounds, plan_fourth_order

__version__ = "0.1.0"
