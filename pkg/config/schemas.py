"""Validated configuration models (model shape, losses, optimizer, stages)."""

from typing import Any, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.constants import (
    LOSS_DEFAULTS,
    MODEL_DEFAULTS,
    OPTIMIZER_DEFAULTS,
    PREFERENCE_METHODS,
    LossMethod,
    Stage,
    TauGrad,
)


class ModelConfig(BaseModel):
    """Shape hyperparameters of the policy model (vocab size comes from the Vocab)."""

    model_config = ConfigDict(frozen=True)

    d_model: int = Field(MODEL_DEFAULTS['d_model'], ge=1, le=256)
    d_hidden: int = Field(MODEL_DEFAULTS['d_hidden'], ge=1, le=1024)
    n_blocks: int = Field(MODEL_DEFAULTS['n_blocks'], ge=1, le=8)
    max_len: int = Field(MODEL_DEFAULTS['max_len'], ge=2)
    layer_scale: float = Field(MODEL_DEFAULTS['layer_scale'], gt=0)
    embed_std: float = Field(MODEL_DEFAULTS['embed_std'], ge=0)


class LossConfig(BaseModel):
    """Loss selector and its constants."""

    model_config = ConfigDict(arbitrary_types_allowed=True, extra='forbid')

    method: LossMethod = LossMethod.ARPO
    beta: float = Field(LOSS_DEFAULTS['beta'], gt=0)
    eta: float = Field(LOSS_DEFAULTS['eta'], gt=0)
    bc: bool = False
    tau_grad: TauGrad = TauGrad.DETACHED
    simpo_gamma: float = LOSS_DEFAULTS['simpo_gamma']
    orpo_lambda: float = Field(LOSS_DEFAULTS['orpo_lambda'], ge=0)
    kto_desirable_weight: float = Field(LOSS_DEFAULTS['kto_desirable_weight'], ge=0)
    kto_undesirable_weight: float = Field(LOSS_DEFAULTS['kto_undesirable_weight'], ge=0)

    # Frozen PolicyModel; DPO and KTO only. Never serialized.
    reference_model: Optional[Any] = Field(None, exclude=True)


class OptimizerConfig(BaseModel):
    """Adaptive-moment optimizer with linear warm-up."""

    model_config = ConfigDict(extra='forbid')

    lr: float = Field(OPTIMIZER_DEFAULTS['lr'], gt=0)
    beta1: float = Field(OPTIMIZER_DEFAULTS['beta1'], ge=0, lt=1)
    beta2: float = Field(OPTIMIZER_DEFAULTS['beta2'], ge=0, lt=1)
    eps: float = Field(OPTIMIZER_DEFAULTS['eps'], gt=0)
    warmup_ratio: float = Field(OPTIMIZER_DEFAULTS['warmup_ratio'], ge=0, lt=1)
    batch_size: int = Field(OPTIMIZER_DEFAULTS['batch_size'], ge=1)


class StageConfig(BaseModel):
    """One run of one training stage."""

    model_config = ConfigDict(extra='forbid')

    stage: Stage
    data: List[str] = Field(default_factory=list)
    steps: Optional[int] = Field(None, ge=1)
    tokens: Optional[int] = Field(None, ge=1)
    group: Optional[int] = None
    loss: LossConfig = Field(default_factory=lambda: LossConfig(method=LossMethod.SFT))
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    seed: int
    # Rank of a newly created adapter; None sizes it to the parameter budget.
    adapter_rank: Optional[int] = Field(None, ge=1)
    allow_out_of_order: bool = False

    @model_validator(mode='after')
    def check_stage_contract(self) -> "StageConfig":
        if self.steps is None and self.tokens is None:
            raise ValueError("a step budget (steps) or token budget (tokens) is required")

        if self.stage != Stage.PT1_MONO_BASE and self.group is None:
            raise ValueError(f"stage {self.stage.value} trains an adapter and needs a group")

        if self.stage == Stage.POST2_PREFERENCE:
            if self.loss.method not in PREFERENCE_METHODS:
                raise ValueError(
                    f"POST2_preference needs a preference loss, got {self.loss.method.value}"
                )
        elif self.loss.method != LossMethod.SFT:
            raise ValueError(f"stage {self.stage.value} trains with sft, got {self.loss.method.value}")

        return self
