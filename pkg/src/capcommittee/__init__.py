"""Committee-of-captions pipeline: sample candidate captions, summarize with an
LLM, and evaluate with retrieval, coverage, n-gram, and human-rating tooling."""

__version__ = "0.1.0"
