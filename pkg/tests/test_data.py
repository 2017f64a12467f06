"""Tests for corpus construction, sampling, post-editors and preference data."""

from collections import Counter

import pytest

from config.constants import SEP_GLYPH, Origin
from services import preference_service
from services.corpus_service import build_pseudo_mono, language_shares, sample_monolingual
from services.editor_service import (
    EditRequest,
    IdentityEditor,
    LocalTransport,
    PostEditor,
    ReferenceGuidedEditor,
    TransportEditor,
    apply_edits,
    edit_script,
)
from services.preference_service import build_preference
from services.synthetic_service import encipher, make_parallel, toy_task
from storage.models import MonoRecord, ParallelPair
from utils.errors import ConfigurationError, ContractError, DataError


def _pairs(count, lang='de'):
    return [ParallelPair(src_lang='en', tgt_lang=lang, src=f"src {i}", tgt=f"tgt {i}") for i in range(count)]


# ==================== PSEUDO-MONOLINGUAL ====================

def test_forced_source_first():
    pair = ParallelPair(src_lang='en', tgt_lang='de', src='ab', tgt='cd')
    [record] = build_pseudo_mono([pair], seed=0, src_first=True)
    assert record.text == f"ab{SEP_GLYPH}cd"
    assert record.lang == 'de'


def test_non_english_side_names_the_record():
    pair = ParallelPair(src_lang='xc', tgt_lang='en', src='dev', tgt='abs')
    assert build_pseudo_mono([pair], seed=0)[0].lang == 'xc'


def test_order_coin_is_fair_over_ten_thousand_pairs():
    pairs = _pairs(10_000)
    records = build_pseudo_mono(pairs, seed=0)
    src_first = sum(r.text.startswith('src') for r in records) / len(records)
    assert 0.48 <= src_first <= 0.52


def test_content_is_conserved_and_seeded():
    pairs = _pairs(10)
    first = build_pseudo_mono(pairs, seed=7)
    assert first == build_pseudo_mono(pairs, seed=7)
    assert len(first) == len(pairs)
    before = Counter(''.join(p.src + p.tgt for p in pairs))
    after = Counter(''.join(r.text.replace(SEP_GLYPH, '') for r in first))
    assert before == after


def test_pseudo_mono_needs_pairs():
    with pytest.raises(ContractError):
        build_pseudo_mono([], seed=0)


# ==================== SAMPLING ====================

def test_sampling_follows_token_share():
    corpora = {
        'a': [MonoRecord(lang='a', text='x')] * 9000,
        'b': [MonoRecord(lang='b', text='y')] * 1000,
    }
    sample = sample_monolingual(corpora, budget=1000, seed=0)
    assert len(sample) == 1000
    assert 0.86 <= language_shares(sample)['a'] <= 0.94


def test_sampling_single_corpus_and_determinism():
    corpora = {'de': [MonoRecord(lang='de', text=t) for t in ('eins', 'zwei', 'drei')], 'fr': []}
    sample = sample_monolingual(corpora, budget=50, seed=3)
    assert {r.lang for r in sample} == {'de'}
    assert sample == sample_monolingual(corpora, budget=50, seed=3)
    total = sum(len(r.text) for r in sample)
    assert 50 <= total < 50 + 4


def test_sampling_errors():
    with pytest.raises(DataError):
        sample_monolingual({'de': []}, budget=10, seed=0)
    with pytest.raises(ContractError):
        sample_monolingual({'de': [MonoRecord(lang='de', text='a')]}, budget=0, seed=0)


# ==================== SYNTHETIC ====================

def test_cipher_pairs_are_consistent():
    for pair in make_parallel('xc', 20, seed=1):
        assert encipher(pair.src, 'xc') == pair.tgt
    assert encipher('abc xyz', 'xr') == 'zyx cba'
    assert encipher('abc xyz', 'xc') == 'nop klm'


@pytest.mark.parametrize('lang', ['xc', 'xr'])
def test_ciphers_are_involutions(lang):
    text = 'the quick brown fox'
    assert encipher(encipher(text, lang), lang) == text


def test_toy_task_covers_both_directions():
    train, held_out = toy_task(['xc'], 8, seed=0)
    assert {(p.src_lang, p.tgt_lang) for p in train} == {('en', 'xc'), ('xc', 'en')}
    assert len(held_out) == 4


def test_fixed_word_count_gives_one_sentence_length():
    train, held_out = toy_task(['xc'], 8, seed=0, words=2)
    assert {len(p.src) for p in train + held_out} == {9}
    with pytest.raises(ConfigurationError):
        toy_task(['xc'], 8, seed=0, words=0)


# ==================== EDITORS ====================

def test_edit_script_columns():
    ops = [op for op, _, _ in edit_script('abcd', 'abxd')]
    assert ops == ['keep', 'keep', 'sub', 'keep']
    assert apply_edits('kitten', 'sitting', max_edits=10) == 'sitting'


def test_reference_editor_moves_a_bounded_distance():
    editor = ReferenceGuidedEditor({'src': 'abcdef'}, max_edits=2)
    assert isinstance(editor, PostEditor)
    edited = editor.edit('src', 'xyzdef')
    assert edited == 'abzdef'
    assert editor.edit('unknown', 'xyz') == 'xyz'


def test_transport_editor_speaks_the_wire_shape():
    editor = TransportEditor(LocalTransport(ReferenceGuidedEditor({'x': 'good'}, max_edits=5)))
    assert editor.edit('x', 'gold') == 'good'
    request = EditRequest(x='x', y_model='gold').model_dump_json()
    assert LocalTransport(IdentityEditor())(request) == '{"y_edit":"gold"}'


def test_malformed_editor_response():
    editor = TransportEditor(lambda payload: '{"unexpected": true}', name='broken')
    with pytest.raises(DataError):
        editor.edit('x', 'y')


# ==================== PREFERENCE DATA ====================

@pytest.fixture
def frozen_model(tiny_model):
    tiny_model.freeze()
    return tiny_model


def _letter_pairs(count, lang='xc', stem='word'):
    """Pairs with distinct sources."""
    return [ParallelPair(src_lang='en', tgt_lang=lang, src=stem + chr(97 + i), tgt=encipher(stem + chr(97 + i), lang))
            for i in range(count)]


def _echo_generate(outputs):
    """generate() stand-in returning a fixed string per prompt source."""
    def fake(model, prompt, **kwargs):
        source = prompt.split('\n')[1].split(': ', 1)[1]
        return model.vocab.encode(outputs[source])
    return fake


def test_no_editor_gives_only_d1(monkeypatch, frozen_model):
    pairs = _letter_pairs(6)
    outputs = {p.src: (p.tgt if i % 2 else 'wrong') for i, p in enumerate(pairs)}
    monkeypatch.setattr(preference_service, 'generate', _echo_generate(outputs))
    dataset = build_preference(pairs, frozen_model, seed=0)
    assert (dataset.d1, dataset.d2, dataset.dropped) == (3, 0, 3)
    assert all(r.y_l == 'wrong' and r.origin == Origin.REFERENCE for r in dataset.records)


def test_memorized_outputs_give_an_empty_dataset(monkeypatch, frozen_model):
    pairs = [ParallelPair(src_lang='en', tgt_lang='xc', src=f"{a}{b}", tgt=encipher(f"{a}{b}", 'xc'))
             for a in 'abcdefghij' for b in 'abcdefghij']
    monkeypatch.setattr(preference_service, 'generate', _echo_generate({p.src: p.tgt for p in pairs}))
    dataset = build_preference(pairs, frozen_model, seed=0)
    assert dataset.records == []
    assert dataset.dropped == 100


def test_identity_editor_d2_is_all_dropped(monkeypatch, frozen_model):
    pairs = _letter_pairs(4)
    monkeypatch.setattr(preference_service, 'generate', _echo_generate({p.src: 'abc' for p in pairs}))
    dataset = build_preference(pairs, frozen_model, editor=IdentityEditor(), seed=0)
    assert (dataset.d1, dataset.d2, dataset.dropped) == (4, 0, 4)


def test_d2_only_for_high_resource_languages(monkeypatch, frozen_model, toy_groups):
    pairs = _letter_pairs(3, 'xc') + _letter_pairs(3, 'xr', stem='mirror')
    monkeypatch.setattr(preference_service, 'generate', _echo_generate({p.src: 'zzz' for p in pairs}))
    editor = ReferenceGuidedEditor({p.src: p.tgt for p in pairs}, max_edits=1)
    dataset = build_preference(pairs, frozen_model, editor=editor, seed=0, groups=toy_groups)
    assert dataset.d1 == 6
    assert dataset.d2 == 3
    d2 = dataset.records[dataset.d1:]
    assert all(r.tgt_lang == 'xc' and r.origin == Origin.POSTEDIT for r in d2)
    assert all(r.y_l == 'zzz' and r.y_w != 'zzz' for r in d2)


def test_parallel_generation_keeps_input_order(frozen_model):
    pairs = make_parallel('xc', 6, seed=8)
    serial = build_preference(pairs, frozen_model, seed=0, workers=1)
    fanned = build_preference(pairs, frozen_model, seed=0, workers=3)
    assert serial == fanned


def test_generation_failures_are_skipped(monkeypatch, frozen_model, caplog):
    pairs = make_parallel('xc', 3, seed=9)
    monkeypatch.setattr(preference_service, 'generate', lambda model, prompt, **kwargs: [])
    dataset = build_preference(pairs, frozen_model, seed=0)
    assert dataset.skipped == 3
    assert dataset.records == []
    assert 'Skipping pair' in caplog.text


class _FlakyEditor:
    """Post-edits like ReferenceGuidedEditor but fails on one source."""

    def __init__(self, references, failing):
        self.inner = ReferenceGuidedEditor(references, max_edits=1)
        self.failing = failing

    def edit(self, src, y_model):
        if src == self.failing:
            raise DataError(f"editor unavailable for {src!r}")
        return self.inner.edit(src, y_model)


def test_editor_failures_skip_only_that_record(monkeypatch, frozen_model, caplog):
    pairs = _letter_pairs(4)
    monkeypatch.setattr(preference_service, 'generate', _echo_generate({p.src: 'zzz' for p in pairs}))
    editor = _FlakyEditor({p.src: p.tgt for p in pairs}, failing=pairs[1].src)
    dataset = build_preference(pairs, frozen_model, editor=editor, seed=0)
    assert (dataset.d1, dataset.d2, dataset.skipped) == (4, 3, 1)
    assert pairs[1].src not in {r.x for r in dataset.records[dataset.d1:]}
    assert 'Skipping post-edit of pair 1' in caplog.text


def test_preference_preconditions(tiny_model):
    with pytest.raises(ContractError):
        build_preference(make_parallel('xc', 2, seed=0), tiny_model, seed=0)
    tiny_model.freeze()
    with pytest.raises(ContractError):
        build_preference([], tiny_model, seed=0)
