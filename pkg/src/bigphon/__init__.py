"""bigphon: phoneme-recognition workbench.

Pipeline pieces: rule-driven German grapheme-to-phoneme conversion,
corpus ingestion and splitting, bigram-extended phoneme vocabularies,
a compact encoder-decoder sequence model, corpus BLEU, and token-level
error diagnostics.
"""

__version__ = "0.1.0"
