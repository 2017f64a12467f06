"""Tests for the language-group registry."""

import pytest

from model import group_of, load_groups, serialize
from utils.errors import AmbiguousLanguageError, GroupLookupError, GroupValidationError

TABLE_ROWS = {
    1: {'af', 'da', 'de', 'is', 'nl', 'no', 'sv'},
    2: {'ca', 'es', 'gl', 'it', 'pt', 'ro'},
    3: {'bg', 'mk', 'ru', 'sr', 'uk'},
    4: {'fr', 'id', 'mg', 'ms', 'th', 'vi'},
    5: {'cs', 'el', 'hu', 'lt', 'lv', 'pl'},
    6: {'et', 'fi', 'ja', 'ka', 'ko', 'zh'},
    7: {'gu', 'hi', 'mr', 'ne', 'ur'},
    8: {'ar', 'az', 'fa', 'he', 'kk', 'ky', 'tr', 'uz'},
}


def test_shipped_config_matches_table(table_groups):
    assert table_groups.group_ids == list(range(1, 9))
    for group_id, languages in TABLE_ROWS.items():
        members = set(table_groups.members(group_id))
        assert 'en' in members
        assert members - {'en'} == languages


def test_shipped_config_partitions_49_languages(table_groups):
    languages = table_groups.languages()
    assert len(languages) == 49
    assert len(set(languages)) == 49
    for code in languages:
        assert sum(code in table_groups.members(g) for g in table_groups.group_ids) == 1


def test_turkic_semitic_group(table_groups):
    assert set(table_groups.members(8)) == {'ar', 'az', 'fa', 'he', 'kk', 'ky', 'tr', 'uz', 'en'}


@pytest.mark.parametrize("code,group_id", [('gu', 7), ('fr', 4), ('ja', 6), ('de', 1)])
def test_group_of(table_groups, code, group_id):
    assert group_of(table_groups, code) == group_id


def test_group_of_english_is_ambiguous(table_groups):
    with pytest.raises(AmbiguousLanguageError):
        group_of(table_groups, 'en')


def test_group_of_unknown_code(table_groups):
    with pytest.raises(GroupLookupError):
        group_of(table_groups, 'xx')


def test_metadata_is_carried(table_groups):
    assert table_groups.info('az').script == 'Arabic/Latin'
    assert table_groups.info('de').resource == 'high'
    assert table_groups.is_postedit_eligible('de')
    assert not table_groups.is_postedit_eligible('is')


def test_duplicate_code_names_both_groups():
    text = "group 1: a\nde, en\ngroup 2: b\nde, fr, en\n"
    with pytest.raises(GroupValidationError, match=r"'de'.*1.*2"):
        load_groups(text)


def test_missing_english_rejected():
    with pytest.raises(GroupValidationError, match="en"):
        load_groups("group 1: a\nde, nl\n")


def test_english_only_group_rejected():
    with pytest.raises(GroupValidationError):
        load_groups("group 1: a\nen\n")


def test_codes_before_header_rejected():
    with pytest.raises(GroupValidationError, match="line 1"):
        load_groups("de, en\n")


def test_minimal_group():
    groups = load_groups("group 1:\nen, de\n")
    assert groups.group_ids == [1]
    assert group_of(groups, 'de') == 1


def test_round_trip(table_groups, toy_groups):
    for groups in (table_groups, toy_groups):
        assert load_groups(serialize(groups)) == groups
