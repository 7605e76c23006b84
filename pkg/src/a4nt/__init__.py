"""Adversarial author-attribute obfuscation toolkit."""

__version__ = "0.1.0"
