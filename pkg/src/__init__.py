"""Cross-lingual relation extraction transfer via bilingual word embedding mapping."""

__version__ = "0.1.0"
