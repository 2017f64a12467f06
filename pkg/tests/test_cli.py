"""End-to-end tests for the command line and config-file parsing."""

import logging

import numpy as np
import pytest

from config.schemas import StageConfig
from config.settings import settings
from main import cli_main
from model import init_adapter
from services.synthetic_service import make_lexicon, make_monolingual, make_parallel
from services.training_service import restore
from storage.checkpoints import load_adapter, load_model, save_adapter, save_model
from storage.models import MonoRecord, ParallelPair
from storage.records import read_records, write_records
from utils.errors import ConfigurationError
from utils.validators import load_config_file, parse_config_text

LEXICON = make_lexicon(0)


@pytest.fixture(autouse=True)
def data_dir(tmp_path, monkeypatch):
    """Relative path flags resolve into the test's temp dir."""
    monkeypatch.setattr(settings, 'DATA_DIR', str(tmp_path))
    yield tmp_path
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_lab_handler', False):
            root.removeHandler(handler)


# ==================== EXIT CODES ====================

def test_help_exits_zero():
    assert cli_main(['--help']) == 0


def test_unknown_flag_is_a_usage_error():
    assert cli_main(['train', '--stage', '1', '--seed', '0', '--out', 'x', '--bogus']) == 2
    assert cli_main(['train', '--stage', '1', '--out', 'x']) == 2
    assert cli_main(['train', '--stage', '9', '--seed', '0', '--out', 'x']) == 2


def test_adapter_stage_without_group_is_a_config_error(capsys):
    assert cli_main(['train', '--stage', '2', '--seed', '0', '--steps', '1', '--out', 'x.xlab']) == 3
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith('error: ConfigurationError: ')
    assert 'needs a group' in err


def test_bad_log_level_is_a_config_error(monkeypatch, capsys):
    monkeypatch.setattr(settings, 'LOG_LEVEL', 'LOUD')
    assert cli_main(['build-pseudomono', '--in', 'a.jsonl', '--out', 'b.jsonl', '--seed', '0']) == 3
    assert 'LOG_LEVEL' in capsys.readouterr().err


def test_missing_input_is_a_runtime_error(capsys):
    assert cli_main(['build-pseudomono', '--in', 'missing.jsonl', '--out', 'b.jsonl', '--seed', '0']) == 1
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith('error: ')


def test_compare_losses_rejects_bad_methods_and_keys(data_dir):
    assert cli_main(['compare-losses', '--methods', 'sft', '--seed', '0']) == 3
    assert cli_main(['compare-losses', '--methods', 'arpo,nope', '--seed', '0']) == 3
    (data_dir / 'cmp.conf').write_text('pairs = 8\nunknown_knob = 1\n', encoding='utf-8')
    assert cli_main(['compare-losses', '--methods', 'arpo', '--seed', '0', '--config', 'cmp.conf']) == 3
    assert cli_main(['compare-losses', '--seed', '0']) == 2
    assert cli_main(['compare-losses', '--ablate', '--variants', 'everything', '--seed', '0']) == 3


# ==================== COMMANDS ====================

def test_build_pseudomono(data_dir, capsys):
    pairs = make_parallel('xc', 5, seed=0, lexicon=LEXICON)
    write_records(data_dir / 'pairs.jsonl', pairs)
    assert cli_main(['build-pseudomono', '--in', 'pairs.jsonl', '--out', 'mono/pseudo.jsonl', '--seed', '3']) == 0
    records = read_records(data_dir / 'mono' / 'pseudo.jsonl')
    assert len(records) == 5
    assert all(isinstance(r, MonoRecord) and r.lang == 'xc' for r in records)
    assert 'pseudo-monolingual records: 5' in capsys.readouterr().out


def test_train_base_then_adapter_stage(data_dir, capsys):
    mono = make_monolingual(['xc', 'en'], [6, 6], seed=1, lexicon=LEXICON)
    write_records(data_dir / 'mono.jsonl', mono['xc'] + mono['en'])
    write_records(data_dir / 'pairs.jsonl', make_parallel('xc', 6, seed=2, lexicon=LEXICON))
    (data_dir / 'pt1.conf').write_text(
        "# tiny base\n"
        "model.d_model = 8\n"
        "model.d_hidden = 16\n"
        "model.n_blocks = 1\n"
        "model.max_len = 96\n"
        "optimizer.batch_size = 2\n",
        encoding='utf-8')

    assert cli_main(['train', '--stage', '1', '--config', 'pt1.conf', '--seed', '0',
                     '--data', 'mono.jsonl', '--steps', '2', '--out', 'pt1.xlab']) == 0
    base = restore(data_dir / 'pt1.xlab')
    assert base.model.config.d_model == 8
    assert base.step == 2

    assert cli_main(['train', '--stage', '4', '--seed', '1', '--group', '1', '--data', 'pairs.jsonl',
                     '--steps', '2', '--resume', 'pt1.xlab', '--out', 'post1.xlab', '--allow-out-of-order',
                     '--groups', settings.TOY_GROUPS_CONFIG, '--export-model', 'base.xlab',
                     '--export-adapters', 'adapters']) == 0
    out = capsys.readouterr().out
    assert 'POST1_sft group 1: 2 steps' in out

    exported = load_model(data_dir / 'base.xlab')
    for name, tensor in base.model.params.items():
        assert exported.params[name].data.tobytes() == tensor.data.tobytes()
    assert load_adapter(data_dir / 'adapters' / 'adapter_group1.xlab').group_id == 1
    assert [run.stage.value for run in restore(data_dir / 'post1.xlab').runs] == ['PT1_mono_base', 'POST1_sft']


def test_train_stage_order_is_enforced(data_dir):
    write_records(data_dir / 'pairs.jsonl', make_parallel('xc', 4, seed=2, lexicon=LEXICON))
    (data_dir / 'mono.jsonl').write_text('{"lang":"xc","text":"abc"}\n', encoding='utf-8')
    (data_dir / 'tiny.conf').write_text("model.max_len = 96\nmodel.d_model = 8\nmodel.d_hidden = 16\n",
                                        encoding='utf-8')
    assert cli_main(['train', '--stage', '1', '--config', 'tiny.conf', '--seed', '0', '--data', 'mono.jsonl',
                     '--steps', '1', '--out', 'pt1.xlab']) == 0
    assert cli_main(['train', '--stage', '4', '--seed', '0', '--group', '1', '--data', 'pairs.jsonl',
                     '--steps', '1', '--resume', 'pt1.xlab', '--out', 'post1.xlab',
                     '--groups', settings.TOY_GROUPS_CONFIG]) == 3


def test_merge_of_fresh_adapter_keeps_weights(data_dir, tiny_model, capsys):
    save_model(tiny_model, data_dir / 'base.xlab')
    save_adapter(init_adapter(tiny_model, 2, tiny_model.linear_names(), rank=2, seed=0), data_dir / 'a2.xlab')
    assert cli_main(['merge-adapter', '--group', '2', '--in', 'base.xlab', '--adapter', 'a2.xlab',
                     '--out', 'merged.xlab']) == 0
    merged = load_model(data_dir / 'merged.xlab')
    for name, tensor in tiny_model.params.items():
        np.testing.assert_array_equal(merged.params[name].data, tensor.data)
    assert cli_main(['merge-adapter', '--group', '1', '--in', 'base.xlab', '--adapter', 'a2.xlab',
                     '--out', 'wrong.xlab']) == 1
    assert 'AdapterStateError' in capsys.readouterr().err
    assert not (data_dir / 'wrong.xlab').exists()


def test_unmerge_takes_a_trained_adapter_back_out(data_dir, tiny_model, capsys):
    save_model(tiny_model, data_dir / 'base.xlab')
    adapter = init_adapter(tiny_model, 1, tiny_model.linear_names(), rank=2, seed=0)
    for name, tensor in adapter.parameters().items():
        if name.endswith('.B'):
            tensor.data = np.full(tensor.shape, 0.25)
    save_adapter(adapter, data_dir / 'a1.xlab')

    assert cli_main(['merge-adapter', '--group', '1', '--in', 'base.xlab', '--adapter', 'a1.xlab',
                     '--out', 'merged.xlab']) == 0
    merged = load_model(data_dir / 'merged.xlab')
    target = tiny_model.linear_names()[0]
    assert not np.allclose(merged.params[target].data, tiny_model.params[target].data)

    assert cli_main(['merge-adapter', '--group', '1', '--in', 'merged.xlab', '--adapter', 'a1.xlab',
                     '--out', 'restored.xlab', '--unmerge']) == 0
    assert 'unmerged group 1' in capsys.readouterr().out
    restored = load_model(data_dir / 'restored.xlab')
    for name, tensor in tiny_model.params.items():
        np.testing.assert_allclose(restored.params[name].data, tensor.data, atol=1e-12)


def test_eval_writes_a_report(data_dir, tiny_model):
    save_model(tiny_model, data_dir / 'model.xlab')
    write_records(data_dir / 'held.jsonl', [ParallelPair(src_lang='en', tgt_lang='xc', src='ab', tgt='de'),
                                            ParallelPair(src_lang='xc', tgt_lang='en', src='de', tgt='ab')])
    assert cli_main(['eval', '--model', 'model.xlab', '--in', 'held.jsonl', '--unit', 'char',
                     '--scorer', 'model.xlab', '--examples', '1', '--out', 'report.txt']) == 0
    report = (data_dir / 'report.txt').read_text(encoding='utf-8')
    assert 'en-xc' in report and 'xc-en' in report
    assert 'proxy reward:' in report
    assert report.count('  ref: ') == 2


def test_plot_cdf_writes_both_files(data_dir, tiny_model):
    save_model(tiny_model, data_dir / 'model.xlab')
    (data_dir / 'pref.jsonl').write_text(
        '{"src_lang":"en","tgt_lang":"xc","x":"ab","y_w":"de","y_l":"df"}\n'
        '{"src_lang":"en","tgt_lang":"xc","x":"ba","y_w":"ed","y_l":"fd"}\n', encoding='utf-8')
    assert cli_main(['plot-cdf', '--in', 'pref.jsonl', '--model', 'model.xlab', '--out', 'plots']) == 0
    rows = (data_dir / 'plots' / 'reward_diff_cdf.csv').read_text(encoding='utf-8').splitlines()
    assert rows[0] == 'series,x,y'
    assert [row.split(',')[0] for row in rows[1:]] == ['pref', 'pref']
    assert (data_dir / 'plots' / 'reward_diff_cdf.svg').exists()


def test_compare_losses_ablation_reports_each_variant(data_dir):
    (data_dir / 'ablate.conf').write_text(
        "pairs = 4\n"
        "pretrain_steps = 2\n"
        "adapter_pretrain_steps = 2\n"
        "sft_steps = 2\n"
        "adapter_rank = 1\n"
        "model.d_model = 8\n"
        "model.d_hidden = 16\n"
        "model.n_blocks = 1\n"
        "optimizer.batch_size = 2\n", encoding='utf-8')
    assert cli_main(['compare-losses', '--ablate', '--variants', 'sft_only,no_pt2', '--seed', '0',
                     '--config', 'ablate.conf', '--out', 'ablate.txt']) == 0
    report = (data_dir / 'ablate.txt').read_text(encoding='utf-8')
    assert 'Stage ablation' in report
    assert 'variant: sft_only' in report and 'variant: no_pt2' in report


# ==================== CONFIG FILES ====================

def test_config_text_nests_dotted_keys():
    values = parse_config_text(
        "# stage 5\n"
        "stage = POST2_preference\n"
        "loss.method = arpo   # inline comment\n"
        "data = a.jsonl, b.jsonl\n"
        "\n"
        "steps = 5\n")
    assert values == {'stage': 'POST2_preference', 'loss': {'method': 'arpo'},
                      'data': ['a.jsonl', 'b.jsonl'], 'steps': '5'}
    assert parse_config_text("adapter_stages = pt2, pt3\n") == {'adapter_stages': ['pt2', 'pt3']}


@pytest.mark.parametrize('text', [
    "no equals sign\n",
    "steps = 1\nsteps = 2\n",
    "loss = arpo\nloss.beta = 0.1\n",
    "bad key = 1\n",
])
def test_config_text_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_flags_override_file_values(tmp_path):
    path = tmp_path / 'stage.conf'
    path.write_text("stage = POST1_sft\ngroup = 1\nsteps = 10\noptimizer.lr = 0.01\n", encoding='utf-8')
    cfg = load_config_file(path, StageConfig, {'seed': 4, 'steps': 3, 'group': None})
    assert (cfg.steps, cfg.group, cfg.seed) == (3, 1, 4)
    assert cfg.optimizer.lr == pytest.approx(0.01)
    with pytest.raises(ConfigurationError):
        load_config_file(tmp_path / 'absent.conf', StageConfig)
