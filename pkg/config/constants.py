"""Lab constants, enums and default tables."""

import math
from enum import Enum


# ==================== TRAINING STAGES ====================

class Stage(str, Enum):
    """The five stages of the training recipe, in recipe order."""
    PT1_MONO_BASE = "PT1_mono_base"
    PT2_MONO_ADAPTERS = "PT2_mono_adapters"
    PT3_PSEUDO_MONO = "PT3_pseudo_mono"
    POST1_SFT = "POST1_sft"
    POST2_PREFERENCE = "POST2_preference"

    @property
    def index(self) -> int:
        return STAGE_ORDER.index(self)

    @classmethod
    def from_number(cls, number: int) -> "Stage":
        """Map the CLI's 1-based stage number to a Stage."""
        if not 1 <= number <= len(STAGE_ORDER):
            raise ValueError(f"stage number must be in 1..{len(STAGE_ORDER)}, got {number}")
        return STAGE_ORDER[number - 1]


STAGE_ORDER = [
    Stage.PT1_MONO_BASE,
    Stage.PT2_MONO_ADAPTERS,
    Stage.PT3_PSEUDO_MONO,
    Stage.POST1_SFT,
    Stage.POST2_PREFERENCE,
]


# ==================== LOSSES ====================

class LossMethod(str, Enum):
    """Loss family members."""
    SFT = "sft"
    DPO = "dpo"
    CPO = "cpo"
    ARPO = "arpo"
    SIMPO = "simpo"
    KTO = "kto"
    ORPO = "orpo"


PREFERENCE_METHODS = {
    LossMethod.DPO,
    LossMethod.CPO,
    LossMethod.ARPO,
    LossMethod.SIMPO,
    LossMethod.KTO,
    LossMethod.ORPO,
}

REFERENCE_METHODS = {LossMethod.DPO, LossMethod.KTO}


class TauGrad(str, Enum):
    """How gradients treat the adaptive rejection weight."""
    DETACHED = "detached"
    THROUGH = "through"


LOSS_DEFAULTS = {
    'beta': 0.1,
    'eta': 1.5,
    'simpo_gamma': 0.0,
    'orpo_lambda': 1.0,
    'kto_desirable_weight': 1.0,
    'kto_undesirable_weight': 1.0,
}

# eta*z is capped before exponentiation; tau saturates long before this.
TAU_EXPONENT_CAP = 50.0

LN2 = math.log(2.0)

# Average log-likelihoods are capped here before log(1 - p) in the odds ratio.
LOG_ODDS_CEILING = -1e-12


# ==================== DATA ====================

class Origin(str, Enum):
    """Provenance of a preference triple."""
    REFERENCE = "reference"
    POSTEDIT = "postedit"


class Direction(str, Enum):
    """English-centric translation direction."""
    INTO_EN = "into_en"
    FROM_EN = "from_en"


class DecodeMode(str, Enum):
    """Decoding strategies for generate()."""
    GREEDY = "greedy"
    TEMPERATURE = "temperature"


ENGLISH = "en"

# High-resource languages receive post-edited (D2) triples by default.
POSTEDIT_RESOURCE_LEVELS = {'high'}


# ==================== MODEL ====================

PAD, BOS, EOS, SEP = "<pad>", "<bos>", "<eos>", "<sep>"
RESERVED_TOKENS = [PAD, BOS, EOS, SEP]

# In-text stand-in for SEP (pseudo-monolingual records)
SEP_GLYPH = "\u241f"

# Byte-stable across the repo.
PROMPT_TEMPLATE = "Translate this from {src_lang} to {tgt_lang}:\n{src_lang}: {source}\n{tgt_lang}:"

# Every character the prompt template and the synthetic tasks need.
DEFAULT_CHARSET = " \n:" + "abcdefghijklmnopqrstuvwxyz" + "T"

MODEL_DEFAULTS = {
    'd_model': 32,
    'd_hidden': 64,
    'n_blocks': 2,
    'max_len': 96,
    'layer_scale': 1.0,
    'embed_std': 0.1,
}

ADAPTER_DEFAULTS = {
    'init_std': 0.02,
    'budget_ratio': 0.15,
    'budget_low': 0.13,
    'budget_high': 0.17,
}


class LoadingKind(str, Enum):
    """The three ways language-specific modules are loaded."""
    SINGLE_MODULE = "single_module"
    MERGED_MODEL = "merged_model"
    ALL_MODULES = "all_modules"


# ==================== OPTIMIZER ====================

OPTIMIZER_DEFAULTS = {
    'lr': 1e-3,
    'beta1': 0.9,
    'beta2': 0.999,
    'eps': 1e-8,
    'warmup_ratio': 0.01,
    'batch_size': 16,
}


# ==================== EVALUATION ====================

BLEU_MAX_N = 4
OVER_REJECTION_BLEU_DROP = 0.20


# ==================== STORAGE ====================

CHECKPOINT_MAGIC = b"XLAB"
CHECKPOINT_FORMAT_VERSION = 1


# ==================== CLI ====================

EXIT_CODES = {
    'ok': 0,
    'runtime': 1,
    'usage': 2,
    'config': 3,
}

COMMANDS = [
    'train',
    'build-prefdata',
    'build-pseudomono',
    'eval',
    'merge-adapter',
    'plot-cdf',
    'compare-losses',
]
