"""Line-delimited record files (one JSON object per line, UTF-8)."""

import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, List, Sequence, Type, Union

from pydantic import BaseModel, ValidationError

from storage.models import MonoRecord, ParallelPair, PreferenceTriple
from utils.error_messages import get_error_message
from utils.errors import RecordParseError

logger = logging.getLogger(__name__)

Record = Union[ParallelPair, MonoRecord, PreferenceTriple]

PREFERENCE_KEYS = frozenset({'src_lang', 'tgt_lang', 'x', 'y_w', 'y_l'})


def record_kind(keys) -> Type[BaseModel]:
    """
    Pick the record class from a line's key set.

    Mono and parallel records must match their fields exactly; preference
    records may omit `origin`.
    """
    keys = frozenset(keys)
    if keys == frozenset(MonoRecord.model_fields):
        return MonoRecord
    if keys == frozenset(ParallelPair.model_fields):
        return ParallelPair
    if PREFERENCE_KEYS <= keys <= frozenset(PreferenceTriple.model_fields):
        return PreferenceTriple
    raise ValueError(f"unrecognized record keys {sorted(keys)}")


def dumps(record: Record) -> str:
    """One record as a single line (newlines inside text are escaped)."""
    return record.model_dump_json()


def parse_line(text: str, line: int) -> Record:
    """Decode one line; errors carry the 1-based line number."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise RecordParseError(get_error_message('record_parse', line=line, detail=e.msg), line=line)
    if not isinstance(payload, dict):
        raise RecordParseError(
            get_error_message('record_parse', line=line, detail="expected a key-value object"), line=line)
    try:
        return record_kind(payload.keys()).model_validate(payload)
    except ValidationError as e:
        detail = '; '.join(err['msg'] for err in e.errors())
        raise RecordParseError(get_error_message('record_parse', line=line, detail=detail), line=line)
    except ValueError as e:
        raise RecordParseError(get_error_message('record_parse', line=line, detail=str(e)), line=line)


@contextmanager
def atomic_writer(path: Union[str, Path]) -> Iterator[IO[str]]:
    """
    Write to a sibling temp file and move it into place on success.

    Usage:
        with atomic_writer(path) as handle:
            handle.write(...)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    handle = open(tmp, 'w', encoding='utf-8', newline='\n')
    try:
        yield handle
        handle.close()
        os.replace(tmp, path)
    except Exception:
        handle.close()
        tmp.unlink(missing_ok=True)
        raise


def write_records(path: Union[str, Path], records: Sequence[Record]) -> Path:
    """Write records one per line; an empty list gives an empty file."""
    with atomic_writer(path) as handle:
        for record in records:
            handle.write(dumps(record) + '\n')
    logger.debug(f"Wrote {len(records)} records to {path}")
    return Path(path)


def read_records(path: Union[str, Path]) -> List[Record]:
    """Read every record; blank lines are skipped."""
    records: List[Record] = []
    with open(path, 'r', encoding='utf-8') as handle:
        for number, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            records.append(parse_line(text, number))
    logger.debug(f"Read {len(records)} records from {path}")
    return records


def read_typed(path: Union[str, Path], kind: Type[BaseModel]) -> List[Record]:
    """Read records and require every one to be of `kind`."""
    records = read_records(path)
    for number, record in enumerate(records, start=1):
        if not isinstance(record, kind):
            raise RecordParseError(
                get_error_message('record_parse', line=number,
                                  detail=f"expected {kind.__name__}, found {type(record).__name__}"),
                line=number)
    return records


def io_roundtrip(path: Union[str, Path], records: Sequence[Record]) -> List[Record]:
    """Write records to `path` and read them back."""
    write_records(path, records)
    return read_records(path)
