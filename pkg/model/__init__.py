"""Policy model, vocabulary, language groups and language-specific adapters."""

from .vocab import Vocab
from .policy import (
    DEFAULT_PROMPT,
    PolicyModel,
    PromptTemplate,
    SequenceScore,
    generate,
    param_count,
    sequence_logprob,
    sequence_logprob_tensor,
)
from .groups import GroupMap, LanguageInfo, group_of, load_groups, load_groups_file, serialize
from .adapters import (
    Adapter,
    LoadingStrategy,
    attach,
    budget_rank,
    detach,
    init_adapter,
    load_strategy,
    merge,
    route,
    route_pair,
    unmerge,
)

__all__ = [
    'Vocab', 'DEFAULT_PROMPT', 'PolicyModel', 'PromptTemplate', 'SequenceScore',
    'generate', 'param_count', 'sequence_logprob', 'sequence_logprob_tensor',
    'GroupMap', 'LanguageInfo', 'group_of', 'load_groups', 'load_groups_file', 'serialize',
    'Adapter', 'LoadingStrategy', 'attach', 'budget_rank', 'detach', 'init_adapter',
    'load_strategy', 'merge', 'route', 'route_pair', 'unmerge',
]
