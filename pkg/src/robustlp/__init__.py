"""Robust-LP benchmark toolkit.

Generates verified robust-LP benchmark instances, reformulates robust models
into deterministic robust counterparts via LP duality, solves them with an
in-repo simplex solver, and runs an experience-memory adaptation loop against
pluggable LLM agents.
"""

__version__ = "0.1.0"
