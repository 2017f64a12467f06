"""Record types, line-delimited record files and checkpoint files."""

from .models import MonoRecord, ParallelPair, PreferenceDataset, PreferenceTriple
from .records import io_roundtrip, read_records, read_typed, write_records

__all__ = [
    'MonoRecord', 'ParallelPair', 'PreferenceDataset', 'PreferenceTriple',
    'io_roundtrip', 'read_records', 'read_typed', 'write_records',
]
