"""
Portable checkpoint files for models, adapters and training state.

Layout (all integers little-endian uint32):

    b"XLAB" | version | header length | JSON header
    tensor count | per tensor: name length, name, ndim, dims..., float64 '<f8' data
    sha256 of everything above (32 bytes)
"""

import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from autodiff import Tensor
from config.constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from config.schemas import ModelConfig
from model.adapters import Adapter
from model.policy import PolicyModel
from model.vocab import Vocab
from utils.errors import CheckpointIntegrityError, CheckpointVersionError, ContractError

logger = logging.getLogger(__name__)

DIGEST_SIZE = 32
_UINT = struct.Struct('<I')


# ==================== RAW BUNDLES ====================

def encode_bundle(header: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> bytes:
    """Serialize a header and named float64 arrays; tensor order is insertion order."""
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    chunks = [CHECKPOINT_MAGIC, _UINT.pack(CHECKPOINT_FORMAT_VERSION),
              _UINT.pack(len(header_bytes)), header_bytes, _UINT.pack(len(tensors))]
    for name, array in tensors.items():
        # asarray keeps 0-d shapes; tobytes writes C order.
        array = np.asarray(array, dtype='<f8')
        name_bytes = name.encode('utf-8')
        chunks.append(_UINT.pack(len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(_UINT.pack(array.ndim))
        chunks.extend(_UINT.pack(dim) for dim in array.shape)
        chunks.append(array.tobytes())
    body = b''.join(chunks)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, count: int) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise CheckpointIntegrityError.from_key(
                'checkpoint_truncated', path=self.path, detail=f"needed {count} bytes at offset {self.offset}")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def uint(self) -> int:
        return _UINT.unpack(self.take(_UINT.size))[0]


def decode_bundle(data: bytes, path: str = '<bytes>') -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Inverse of encode_bundle; checks magic, version and digest."""
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointIntegrityError.from_key('checkpoint_magic', path=path)
    if len(data) < len(CHECKPOINT_MAGIC) + _UINT.size + DIGEST_SIZE:
        raise CheckpointIntegrityError.from_key('checkpoint_truncated', path=path, detail="file too short")

    reader = _Reader(data, path)
    reader.take(len(CHECKPOINT_MAGIC))
    version = reader.uint()
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError.from_key(
            'checkpoint_version', path=path, found=version, expected=CHECKPOINT_FORMAT_VERSION)

    body, digest = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointIntegrityError.from_key('checkpoint_truncated', path=path, detail="digest mismatch")
    reader.data = body

    try:
        header = json.loads(reader.take(reader.uint()).decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointIntegrityError.from_key('checkpoint_truncated', path=path, detail=f"bad header: {e}")

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(reader.uint()):
        name = reader.take(reader.uint()).decode('utf-8')
        shape = tuple(reader.uint() for _ in range(reader.uint()))
        count = int(np.prod(shape)) if shape else 1
        raw = reader.take(count * 8)
        tensors[name] = np.frombuffer(raw, dtype='<f8').reshape(shape).astype(np.float64)
    if reader.offset != len(body):
        raise CheckpointIntegrityError.from_key(
            'checkpoint_truncated', path=path, detail=f"{len(body) - reader.offset} trailing bytes")
    return header, tensors


def write_bundle(path: Union[str, Path], header: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    tmp.write_bytes(encode_bundle(header, tensors))
    tmp.replace(path)
    logger.debug(f"Wrote {header.get('kind')} checkpoint {path} ({len(tensors)} tensors)")
    return path


def read_bundle(path: Union[str, Path], kind: Optional[str] = None) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    header, tensors = decode_bundle(Path(path).read_bytes(), str(path))
    if kind is not None and header.get('kind') != kind:
        raise ContractError(f"{path}: expected a {kind} checkpoint, found {header.get('kind')!r}")
    return header, tensors


# ==================== MODEL ====================

def model_header(model: PolicyModel) -> Dict[str, Any]:
    return {
        'config': model.config.model_dump(),
        'charset': model.vocab.charset,
        'frozen': model.frozen,
    }


def model_from_parts(header: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> PolicyModel:
    config = ModelConfig(**header['config'])
    model = PolicyModel(config, Vocab(header['charset']), params=tensors)
    if header.get('frozen'):
        model.freeze()
    return model


def save_model(model: PolicyModel, path: Union[str, Path]) -> Path:
    """Base weights only; attached adapters are saved separately."""
    header = {'kind': 'model', **model_header(model)}
    return write_bundle(path, header, {name: t.data for name, t in model.params.items()})


def load_model(path: Union[str, Path]) -> PolicyModel:
    header, tensors = read_bundle(path, 'model')
    return model_from_parts(header, tensors)


# ==================== ADAPTER ====================

def adapter_tensors(adapter: Adapter, prefix: str = '') -> Dict[str, np.ndarray]:
    return {f"{prefix}{name}": t.data for name, t in adapter.parameters().items()}


def adapter_header(adapter: Adapter) -> Dict[str, Any]:
    return {'group_id': adapter.group_id, 'rank': adapter.rank, 'alpha': adapter.alpha,
            'targets': list(adapter.targets)}


def adapter_from_parts(header: Dict[str, Any], tensors: Dict[str, np.ndarray], prefix: str = '') -> Adapter:
    A, B = {}, {}
    for target in header['targets']:
        A[target] = Tensor(tensors[f"{prefix}{target}.A"], requires_grad=True)
        B[target] = Tensor(tensors[f"{prefix}{target}.B"], requires_grad=True)
    return Adapter(group_id=int(header['group_id']), rank=int(header['rank']),
                   alpha=float(header['alpha']), A=A, B=B)


def save_adapter(adapter: Adapter, path: Union[str, Path]) -> Path:
    header = {'kind': 'adapter', **adapter_header(adapter)}
    return write_bundle(path, header, adapter_tensors(adapter))


def load_adapter(path: Union[str, Path]) -> Adapter:
    header, tensors = read_bundle(path, 'adapter')
    return adapter_from_parts(header, tensors)
