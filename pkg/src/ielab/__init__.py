"""ielab: a desk-scale laboratory for layout-aware token tagging.

Compares token-representation strategies on visually rich documents: a small
layout-position transformer encoder whose output is enriched by style
embeddings (sum or concatenation) or by image embeddings (conv backbone +
RoIAlign), with a full train / evaluate / ablate protocol on synthetic corpora.
"""

__version__ = "0.1.0"
