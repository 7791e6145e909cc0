"""Text-to-SQL orchestration engine.

Mines schema features out of relational databases, links questions to
schema items, generates SQL through a pluggable model gateway with
automatic repair and execution feedback, and ranks candidates with a
retrieval-augmented critic.
"""

__version__ = "0.1.0"
