"""Benchmark instance generators and reference oracles."""
from .generators import FAMILIES, PRESETS, Instance, generate
from .reference import Reference, reference_solution

__all__ = ["FAMILIES", "PRESETS", "Instance", "generate", "Reference", "reference_solution"]
