"""Record types for corpora and preference data."""

from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.constants import Origin


class ParallelPair(BaseModel):
    """A source sentence and its reference translation."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    src_lang: str
    tgt_lang: str
    src: str = Field(min_length=1)
    tgt: str = Field(min_length=1)

    @model_validator(mode='after')
    def check_languages(self) -> "ParallelPair":
        if self.src_lang == self.tgt_lang:
            raise ValueError(f"source and target language are both {self.src_lang!r}")
        return self


class MonoRecord(BaseModel):
    """One monolingual (or pseudo-monolingual) text."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    lang: str
    text: str = Field(min_length=1)


class PreferenceTriple(BaseModel):
    """Source x with a preferred (y_w) and a dis-preferred (y_l) translation."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    src_lang: str
    tgt_lang: str
    x: str = Field(min_length=1)
    y_w: str = Field(min_length=1)
    y_l: str = Field(min_length=1)
    origin: Origin = Origin.REFERENCE

    @field_validator('y_l')
    @classmethod
    def check_distinct(cls, y_l: str, info) -> str:
        if info.data.get('y_w') == y_l:
            raise ValueError("preferred and dis-preferred translations are identical")
        return y_l


class PreferenceDataset(BaseModel):
    """D = D1 (reference vs model output) + D2 (post-edit vs model output)."""

    records: List[PreferenceTriple] = Field(default_factory=list)
    d1: int = Field(0, ge=0)
    d2: int = Field(0, ge=0)
    dropped: int = Field(0, ge=0)
    skipped: int = Field(0, ge=0)

    @model_validator(mode='after')
    def check_provenance(self) -> "PreferenceDataset":
        if len(self.records) != self.d1 + self.d2:
            raise ValueError(f"{len(self.records)} records but d1 + d2 = {self.d1 + self.d2}")
        return self

