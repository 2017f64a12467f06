"""Shared fixtures: tiny models, vocabularies and the shipped group configs."""

import numpy as np
import pytest

from config.schemas import ModelConfig
from config.settings import PACKAGE_ROOT
from model import PolicyModel, Vocab, load_groups_file


def randomize_head(model: PolicyModel, seed: int = 1, scale: float = 0.5) -> PolicyModel:
    """Give the zero-initialized head random weights so scores are not uniform."""
    rng = np.random.default_rng(seed)
    model.params['head'].data = rng.normal(0.0, scale, size=model.params['head'].shape)
    return model


@pytest.fixture
def vocab():
    return Vocab()


@pytest.fixture
def tiny_config():
    return ModelConfig(d_model=8, d_hidden=16, n_blocks=1, max_len=64)


@pytest.fixture
def tiny_model(tiny_config, vocab):
    return randomize_head(PolicyModel(tiny_config, vocab, seed=0))


@pytest.fixture
def two_block_model(vocab):
    config = ModelConfig(d_model=8, d_hidden=16, n_blocks=2, max_len=64)
    return randomize_head(PolicyModel(config, vocab, seed=3), seed=4)


@pytest.fixture
def table_groups():
    return load_groups_file(PACKAGE_ROOT / 'config' / 'language_groups.txt')


@pytest.fixture
def toy_groups():
    return load_groups_file(PACKAGE_ROOT / 'config' / 'toy_groups.txt')
