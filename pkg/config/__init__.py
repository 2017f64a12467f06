"""Configuration package for the lab: environment settings, constants and schemas."""

from .settings import settings, validate_settings

__all__ = ['settings', 'validate_settings']
