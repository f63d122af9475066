"""TERT: privileged teacher training and Transformer distillation for
multi-terrain locomotion on a planar quadruped surrogate."""

__version__ = "0.1.0"
