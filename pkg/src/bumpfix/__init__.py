"""Single-shot LLM repair of Java builds broken by a dependency update."""

__version__ = "0.1.0"
