"""Utilities package: errors, logging, decorators, formatting, config-file parsing."""
