"""Tests for record types and line-delimited record files."""

import pytest
from pydantic import ValidationError

from config.constants import Origin
from storage import (
    MonoRecord,
    ParallelPair,
    PreferenceDataset,
    PreferenceTriple,
    io_roundtrip,
    read_records,
    read_typed,
    write_records,
)
from storage.records import atomic_writer, parse_line
from utils.errors import RecordParseError


def test_mixed_records_round_trip(tmp_path):
    records = [
        ParallelPair(src_lang='en', tgt_lang='de', src='hello\nworld', tgt='hallo welt'),
        MonoRecord(lang='de', text='guten tag'),
        PreferenceTriple(src_lang='en', tgt_lang='de', x='hi', y_w='hallo', y_l='hallu', origin=Origin.POSTEDIT),
    ]
    assert io_roundtrip(tmp_path / 'mixed.jsonl', records) == records
    assert (tmp_path / 'mixed.jsonl').read_text(encoding='utf-8').count('\n') == 3


def test_preference_origin_is_optional():
    record = parse_line('{"src_lang":"en","tgt_lang":"de","x":"a","y_w":"b","y_l":"c"}', 1)
    assert isinstance(record, PreferenceTriple)
    assert record.origin == Origin.REFERENCE


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / 'mono.jsonl'
    path.write_text('{"lang":"de","text":"eins"}\n\n   \n{"lang":"de","text":"zwei"}\n', encoding='utf-8')
    assert [r.text for r in read_records(path)] == ['eins', 'zwei']


@pytest.mark.parametrize('line', [
    '{"lang": "de", "text": ',
    '["not", "an", "object"]',
    '{"lang": "de", "text": "x", "extra": 1}',
    '{"src_lang": "en", "tgt_lang": "en", "src": "a", "tgt": "b"}',
    '{"src_lang": "en", "tgt_lang": "de", "x": "a", "y_w": "same", "y_l": "same"}',
])
def test_malformed_line_reports_line_number(tmp_path, line):
    path = tmp_path / 'bad.jsonl'
    path.write_text('{"lang":"de","text":"ok"}\n' + line + '\n', encoding='utf-8')
    with pytest.raises(RecordParseError) as info:
        read_records(path)
    assert info.value.line == 2
    assert 'line 2' in info.value.message


def test_read_typed_rejects_other_kinds(tmp_path):
    path = write_records(tmp_path / 'mono.jsonl', [MonoRecord(lang='de', text='eins')])
    with pytest.raises(RecordParseError) as info:
        read_typed(path, ParallelPair)
    assert info.value.line == 1


def test_empty_file_reads_as_no_records(tmp_path):
    path = write_records(tmp_path / 'empty.jsonl', [])
    assert path.read_text() == ''
    assert read_records(path) == []


def test_atomic_writer_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / 'out.jsonl'
    with pytest.raises(RuntimeError):
        with atomic_writer(target) as handle:
            handle.write('partial')
            raise RuntimeError('boom')
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []


def test_dataset_counts_must_match_records():
    triple = PreferenceTriple(src_lang='en', tgt_lang='de', x='a', y_w='b', y_l='c')
    assert PreferenceDataset(records=[triple], d1=1).d1 == 1
    with pytest.raises(ValidationError):
        PreferenceDataset(records=[triple], d1=0, d2=0)
