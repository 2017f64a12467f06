"""Language-group registry and its config file grammar."""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from config.constants import ENGLISH, POSTEDIT_RESOURCE_LEVELS
from utils.errors import AmbiguousLanguageError, GroupLookupError, GroupValidationError

logger = logging.getLogger(__name__)

GROUP_HEADER = re.compile(r'^group\s+(\d+)\s*:\s*(.*)$')
META_LINE = re.compile(r'^meta\s+([a-z]{2,3})\s*:\s*(.*)$')
LANG_CODE = re.compile(r'^[a-z]{2,3}$')
META_KEYS = ('name', 'script', 'family', 'resource')


@dataclass(frozen=True)
class LanguageInfo:
    """Informational metadata; only `resource` changes behavior (post-edit eligibility)."""

    code: str
    name: str = ''
    script: str = ''
    family: str = ''
    resource: str = ''


@dataclass(frozen=True, eq=True)
class GroupMap:
    """Immutable group_id -> ordered iso codes, English in every group."""

    groups: Dict[int, Tuple[str, ...]]
    labels: Dict[int, str] = field(default_factory=dict)
    metadata: Dict[str, LanguageInfo] = field(default_factory=dict)
    english_code: str = ENGLISH

    @property
    def group_ids(self) -> List[int]:
        return list(self.groups)

    def languages(self) -> List[str]:
        """Every non-English code, in group order."""
        return [code for codes in self.groups.values() for code in codes if code != self.english_code]

    def members(self, group_id: int) -> Tuple[str, ...]:
        try:
            return self.groups[group_id]
        except KeyError:
            raise GroupLookupError(f"unknown group id {group_id}")

    def info(self, code: str) -> LanguageInfo:
        return self.metadata.get(code, LanguageInfo(code))

    def is_postedit_eligible(self, code: str) -> bool:
        return self.info(code).resource.lower() in POSTEDIT_RESOURCE_LEVELS


def _bad_line(number: int, detail: str) -> GroupValidationError:
    return GroupValidationError.from_key('bad_group_line', line=number, detail=detail)


def _parse_meta(code: str, body: str, number: int) -> LanguageInfo:
    fields = {}
    for item in filter(None, (part.strip() for part in body.split(','))):
        key, sep, value = item.partition('=')
        key = key.strip()
        if not sep or key not in META_KEYS:
            raise _bad_line(number, f"metadata item {item!r} must be one of {', '.join(META_KEYS)}=<value>")
        fields[key] = value.strip()
    return LanguageInfo(code, **fields)


def load_groups(config_text: str) -> GroupMap:
    """
    Parse and validate a group config.

    Args:
        config_text: Text in the `group <id>: <label>` / code list / `meta` grammar

    Returns:
        Validated GroupMap
    """
    groups: Dict[int, List[str]] = {}
    labels: Dict[int, str] = {}
    metadata: Dict[str, LanguageInfo] = {}
    current = None

    for number, raw in enumerate(config_text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        header = GROUP_HEADER.match(line)
        if header:
            current = int(header.group(1))
            if current in groups:
                raise _bad_line(number, f"group {current} is defined twice")
            groups[current] = []
            labels[current] = header.group(2).strip()
            continue

        meta = META_LINE.match(line)
        if meta:
            code = meta.group(1)
            metadata[code] = _parse_meta(code, meta.group(2), number)
            continue

        if current is None:
            raise _bad_line(number, "language codes before any 'group <id>:' header")
        for code in filter(None, (part.strip() for part in line.split(','))):
            if not LANG_CODE.match(code):
                raise _bad_line(number, f"{code!r} is not an iso code")
            groups[current].append(code)

    owner: Dict[str, int] = {}
    for group_id, codes in groups.items():
        if ENGLISH not in codes:
            raise GroupValidationError.from_key('missing_english', group_id=group_id)
        seen_here = set()
        for code in codes:
            if code in seen_here:
                raise GroupValidationError.from_key(
                    'duplicate_language', code=code, first=group_id, second=group_id
                )
            seen_here.add(code)
            if code == ENGLISH:
                continue
            if code in owner:
                raise GroupValidationError.from_key(
                    'duplicate_language', code=code, first=owner[code], second=group_id
                )
            owner[code] = group_id
        if len(codes) < 2:
            raise GroupValidationError.from_key('empty_group', group_id=group_id)

    for code in metadata:
        if code != ENGLISH and code not in owner:
            raise GroupValidationError(f"metadata given for unregistered language {code!r}")

    group_map = GroupMap(
        groups={group_id: tuple(codes) for group_id, codes in groups.items()},
        labels=labels,
        metadata=metadata,
    )
    logger.debug(f"Loaded {len(groups)} language groups ({len(owner)} languages besides English)")
    return group_map


def load_groups_file(path) -> GroupMap:
    return load_groups(Path(path).read_text(encoding='utf-8'))


def serialize(group_map: GroupMap) -> str:
    """Config text that load_groups() turns back into an equal GroupMap."""
    lines = []
    for group_id, codes in group_map.groups.items():
        lines.append(f"group {group_id}: {group_map.labels.get(group_id, '')}".rstrip())
        lines.append(', '.join(codes))
        lines.append('')
    for code, info in group_map.metadata.items():
        items = [f"{key}={getattr(info, key)}" for key in META_KEYS if getattr(info, key)]
        lines.append(f"meta {code}: {', '.join(items)}")
    return '\n'.join(lines) + '\n'


def group_of(group_map: GroupMap, lang: str) -> int:
    """The unique group holding a non-English language."""
    if lang == group_map.english_code:
        raise AmbiguousLanguageError.from_key('english_ambiguous')
    for group_id, codes in group_map.groups.items():
        if lang in codes:
            return group_id
    raise GroupLookupError.from_key('unknown_language', code=lang)
