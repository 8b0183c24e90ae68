"""educe: a demand-driven intensional evaluator, a simulated multi-tier
runtime that distributes it, and a four-stage recognition pipeline on top."""

__version__ = "0.1.0"
