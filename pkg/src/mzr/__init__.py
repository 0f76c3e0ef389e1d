"""Multi-element gPC with reduced-model (t-model) driven refinement."""

__version__ = "0.1.0"
