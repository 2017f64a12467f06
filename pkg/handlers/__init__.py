"""Handlers package for lab commands."""

__all__ = []
