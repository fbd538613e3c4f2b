"""Joint UD tagging, lemmatization and dependency parsing on a from-scratch numpy encoder."""

__version__ = "0.1.0"
