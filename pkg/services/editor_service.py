"""
Editor Service

Post-editors that turn a model translation into an improved one. The real
LLM editor is out of reach at desk scale; these stand in for it behind the
same request/response shape.
"""

import logging
from typing import Callable, List, Mapping, Optional, Protocol, Tuple, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from utils.errors import DataError

logger = logging.getLogger(__name__)


@runtime_checkable
class PostEditor(Protocol):
    """Given (x, y_model), return y_edit."""

    def edit(self, x: str, y_model: str) -> str:
        ...


# ==================== WIRE SHAPE ====================

class EditRequest(BaseModel):
    model_config = ConfigDict(extra='forbid')

    x: str
    y_model: str


class EditResponse(BaseModel):
    model_config = ConfigDict(extra='forbid')

    y_edit: str = Field(min_length=1)


Transport = Callable[[str], str]


# ==================== EDITORS ====================

class IdentityEditor:
    """Returns the model output unchanged (every D2 candidate is degenerate)."""

    def edit(self, x: str, y_model: str) -> str:
        return y_model


def edit_script(source: str, target: str) -> List[Tuple[str, str, str]]:
    """
    Minimal character alignment from source to target.

    Returns:
        Columns (op, source char, target char) left to right, with op one of
        'keep', 'sub', 'del', 'ins'
    """
    n, m = len(source), len(target)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if source[i - 1] == target[j - 1] else 1
            dist[i, j] = min(dist[i - 1, j] + 1, dist[i, j - 1] + 1, dist[i - 1, j - 1] + cost)

    columns = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (source[i - 1] != target[j - 1]):
            op = 'keep' if source[i - 1] == target[j - 1] else 'sub'
            columns.append((op, source[i - 1], target[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            columns.append(('del', source[i - 1], ''))
            i -= 1
        else:
            columns.append(('ins', '', target[j - 1]))
            j -= 1
    columns.reverse()
    return columns


def apply_edits(source: str, target: str, max_edits: int) -> str:
    """Apply the first `max_edits` edits that turn source into target."""
    out = []
    applied = 0
    for op, a, b in edit_script(source, target):
        if op == 'keep':
            out.append(a)
        elif applied < max_edits:
            out.append(b)
            applied += 1
        else:
            out.append(a)
    return ''.join(out)


class ReferenceGuidedEditor:
    """
    Deterministic stub: moves y_model up to `max_edits` character edits
    toward a known reference for x. Unknown sources pass through unchanged.
    """

    def __init__(self, references: Mapping[str, str], max_edits: int = 2):
        if max_edits < 1:
            raise DataError(f"max_edits must be >= 1, got {max_edits}")
        self.references = dict(references)
        self.max_edits = max_edits

    def edit(self, x: str, y_model: str) -> str:
        reference = self.references.get(x)
        if reference is None:
            return y_model
        return apply_edits(y_model, reference, self.max_edits)


class LocalTransport:
    """In-process transport: decodes a request, runs an editor, encodes the response."""

    def __init__(self, editor: PostEditor):
        self.editor = editor

    def __call__(self, payload: str) -> str:
        request = EditRequest.model_validate_json(payload)
        return EditResponse(y_edit=self.editor.edit(request.x, request.y_model)).model_dump_json()


class TransportEditor:
    """Editor speaking {x, y_model} -> {y_edit} over a pluggable transport."""

    def __init__(self, transport: Transport, name: Optional[str] = None):
        self.transport = transport
        self.name = name or type(transport).__name__

    def edit(self, x: str, y_model: str) -> str:
        payload = EditRequest(x=x, y_model=y_model).model_dump_json()
        try:
            return EditResponse.model_validate_json(self.transport(payload)).y_edit
        except ValidationError as e:
            raise DataError(f"editor {self.name}: malformed response ({e.error_count()} errors)")
