"""LLM-driven anti-money-laundering reasoning over transaction subgraphs."""

__version__ = "0.1.0"
