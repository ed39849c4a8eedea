"""Hybrid field extraction for unstructured documents.

Subpackages cover document imaging and OCR preprocessing, text extraction
with spell correction, a chat-completion gateway with offline replay, the
fuzzy-regex / NER / LLM retrieval cascade, an evaluation harness, and a
seeded synthetic-document generator.
"""

__version__ = "0.1.0"
