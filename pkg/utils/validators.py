"""Config-file parsing and input validation utilities."""

import re
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar, Union

from pydantic import BaseModel

from utils.errors import ConfigurationError

ModelT = TypeVar('ModelT', bound=BaseModel)

KEY_PATTERN = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$')

# Keys whose values are comma-separated lists
LIST_KEYS = {'data', 'langs', 'adapter_stages'}


def _set_dotted(target: Dict[str, Any], key: str, value: Any, line: int):
    parts = key.split('.')
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"line {line}: {key!r} nests under scalar key {part!r}")
        node = child
    leaf = parts[-1]
    if leaf in node:
        raise ConfigurationError(f"line {line}: duplicate key {key!r}")
    node[leaf] = value


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse `key = value` lines into a nested dict.

    Blank lines and `#` comments are ignored; dotted keys build nested
    sections (`loss.method = arpo`). Values stay strings for pydantic to
    coerce, except list keys, which split on commas.

    Args:
        text: Config file contents

    Returns:
        Nested dict ready for model_validate
    """
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split('=', 1))
        if not KEY_PATTERN.match(key):
            raise ConfigurationError(f"line {number}: bad key {key!r}")
        if key.split('.')[-1] in LIST_KEYS:
            parsed: Any = [item.strip() for item in value.split(',') if item.strip()]
        else:
            parsed = value
        _set_dotted(values, key, parsed, number)
    return values


def read_config_values(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """Parsed config file, or an empty dict when no path is given."""
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f"config file not found: {config_path}")
    return parse_config_text(config_path.read_text(encoding='utf-8'))


def apply_overrides(values: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Flag values win over file values; dotted keys nest, None means 'not given'."""
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = values
        parts = key.split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return values


def load_config_file(path: Optional[Union[str, Path]], model: Type[ModelT],
                     overrides: Optional[Dict[str, Any]] = None) -> ModelT:
    """
    Read a config file (optional) and validate it with flag overrides applied.

    Validation errors propagate as pydantic.ValidationError.
    """
    return model.model_validate(apply_overrides(read_config_values(path), overrides))

