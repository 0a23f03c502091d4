"""
Fuel Cell LRG

Safe adaptive PI temperature control of a PEM fuel cell stack: an adaptive
controller tracking a nominal reference model that a Lyapunov-based
reference governor keeps inside the temperature constraint.
"""

__version__ = "0.1.0"
