"""
Binary containers for datasets (``VVBD``) and fitted models (``VVBM``).

Both are little-endian. A dataset file is a fixed header, one record per
image (label, optional ``theta, phi``, four float32 planes) and a JSON
trailer with the provenance. A model file is a kind tag, JSON metadata and a
list of named float64 tensors.
"""

# Standard Library
import hashlib
import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field

# Scientific
import numpy as np

# This module
from .dataset import CHANNELS, Dataset, LabelSpec
from .errors import (
    FormatError,
    MagicMismatchError,
    PathError,
    TruncatedFileError,
    VersionMismatchError,
)


logger = logging.getLogger(__name__)

DATASET_MAGIC = b'VVBD'
MODEL_MAGIC = b'VVBM'
FORMAT_VERSION = 1

# magic, version, image count, resolution, channels, task tag, class count
DATASET_HEADER = struct.Struct('<4sIIIIBH')
MODEL_HEADER = struct.Struct('<4sIB')
U32 = struct.Struct('<I')
U16 = struct.Struct('<H')
U8 = struct.Struct('<B')

MODEL_KINDS = {'pca': 1, 'svm': 2, 'cnn': 3, 'alignment': 4}


def atomic_write(path, data: bytes):
    """Write ``data`` to a temporary sibling of ``path`` and rename it over."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise PathError('Output directory {} does not exist'.format(directory))

    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    except OSError as error:
        raise PathError('Cannot write to {}: {}'.format(directory, error))

    try:
        with os.fdopen(fd, 'wb') as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as error:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise PathError('Cannot write {}: {}'.format(path, error))


def file_digest(path) -> str:
    """Hex sha256 of a file's contents."""
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _read_bytes(path) -> bytes:
    try:
        with open(path, 'rb') as fh:
            return fh.read()
    except OSError as error:
        raise PathError('Cannot read {}: {}'.format(path, error))


class _Reader:
    """Cursor over a byte buffer that refuses to read past the end."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, size: int) -> bytes:
        if size > self.remaining:
            raise TruncatedFileError(size, self.remaining)
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))

    def json(self):
        (length,) = self.unpack(U32)
        try:
            return json.loads(self.take(length).decode('utf-8'))
        except (UnicodeDecodeError, ValueError) as error:
            raise FormatError('Corrupt JSON block: {}'.format(error))


def _check_magic(reader: _Reader, expected: bytes):
    found = reader.data[: len(expected)]
    if found != expected:
        raise MagicMismatchError(expected, found)


def _check_version(version: int):
    if version != FORMAT_VERSION:
        raise VersionMismatchError(version, FORMAT_VERSION)


def _json_block(data) -> bytes:
    payload = json.dumps(data, sort_keys=True).encode('utf-8')
    return U32.pack(len(payload)) + payload


def _record_dtype(resolution: int, with_angles: bool) -> np.dtype:
    fields = [('label', '<u2')]
    if with_angles:
        fields.append(('angles', '<f8', (2,)))
    fields.append(('planes', '<f4', (CHANNELS, resolution, resolution)))
    return np.dtype(fields)


def dumps(ds: Dataset) -> bytes:
    spec = ds.label_spec
    header = DATASET_HEADER.pack(
        DATASET_MAGIC,
        FORMAT_VERSION,
        len(ds),
        ds.resolution,
        CHANNELS,
        spec.tag,
        spec.n_classes,
    )

    dtype = _record_dtype(ds.resolution, spec.has_angles)
    records = np.zeros(len(ds), dtype=dtype)
    records['label'] = ds.labels
    if spec.has_angles:
        records['angles'] = ds.angles
    records['planes'] = ds.planes

    trailer = _json_block(
        {
            'provenance': ds.provenance,
            'sample_indices': ds.sample_indices.tolist(),
        }
    )
    return header + records.tobytes() + trailer


def loads(data: bytes) -> Dataset:
    reader = _Reader(data)
    _check_magic(reader, DATASET_MAGIC)
    if reader.remaining < DATASET_HEADER.size:
        # Version first, so a short file from a newer writer says so.
        if reader.remaining >= 8:
            _check_version(U32.unpack_from(data, 4)[0])
    (
        _,
        version,
        count,
        resolution,
        channels,
        task_tag,
        n_classes,
    ) = reader.unpack(DATASET_HEADER)
    _check_version(version)

    if channels != CHANNELS:
        raise FormatError('Expected 4 channels, found {}'.format(channels))
    try:
        spec = LabelSpec.from_tag(task_tag)
    except ValueError as error:
        raise FormatError(str(error))
    if n_classes != spec.n_classes:
        raise FormatError(
            'Task {} has {} classes, header says {}'.format(
                spec.task, spec.n_classes, n_classes
            )
        )

    dtype = _record_dtype(resolution, spec.has_angles)
    body = reader.take(count * dtype.itemsize)
    records = np.frombuffer(body, dtype=dtype, count=count)
    trailer = reader.json()
    if reader.remaining:
        raise FormatError('{} trailing bytes'.format(reader.remaining))

    return Dataset(
        planes=records['planes'].astype(np.float32),
        labels=records['label'].astype(np.uint16),
        label_spec=spec,
        angles=records['angles'].astype(np.float64)
        if spec.has_angles
        else None,
        sample_indices=np.array(trailer['sample_indices'], dtype=np.int64),
        provenance=trailer['provenance'],
    )


def save(ds: Dataset, path):
    """Write a dataset atomically in the ``VVBD`` format."""
    atomic_write(path, dumps(ds))
    logger.debug('Saved %d images to %s', len(ds), path)


def load(path) -> Dataset:
    """
    Read a ``VVBD`` file.

    Raises:
        MagicMismatchError: not a dataset file.
        VersionMismatchError: written by another format version.
        TruncatedFileError: the file ends early.

    """
    return loads(_read_bytes(path))


@dataclass
class ModelFile:
    kind: str
    metadata: dict = field(default_factory=dict)
    tensors: dict = field(default_factory=dict)

    def tensor(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise FormatError(
                '{} model has no tensor "{}"'.format(self.kind, name)
            )


def dumps_model(model: ModelFile) -> bytes:
    try:
        tag = MODEL_KINDS[model.kind]
    except KeyError:
        raise FormatError('Unknown model kind "{}"'.format(model.kind))

    parts = [
        MODEL_HEADER.pack(MODEL_MAGIC, FORMAT_VERSION, tag),
        _json_block(model.metadata),
        U32.pack(len(model.tensors)),
    ]
    for name, value in model.tensors.items():
        value = np.ascontiguousarray(value, dtype='<f8')
        encoded = name.encode('utf-8')
        parts.append(U16.pack(len(encoded)) + encoded)
        parts.append(U8.pack(value.ndim))
        parts.append(struct.pack('<{}I'.format(value.ndim), *value.shape))
        parts.append(value.tobytes())

    return b''.join(parts)


def loads_model(data: bytes) -> ModelFile:
    reader = _Reader(data)
    _check_magic(reader, MODEL_MAGIC)
    _, version, tag = reader.unpack(MODEL_HEADER)
    _check_version(version)

    kinds = {value: key for key, value in MODEL_KINDS.items()}
    if tag not in kinds:
        raise FormatError('Unknown model kind tag {}'.format(tag))

    metadata = reader.json()
    (count,) = reader.unpack(U32)
    tensors = {}
    for _ in range(count):
        (length,) = reader.unpack(U16)
        name = reader.take(length).decode('utf-8')
        (ndim,) = reader.unpack(U8)
        shape = struct.unpack('<{}I'.format(ndim), reader.take(4 * ndim))
        size = int(np.prod(shape, dtype=np.int64))
        raw = reader.take(8 * size)
        tensors[name] = np.frombuffer(raw, dtype='<f8').reshape(shape).copy()
    if reader.remaining:
        raise FormatError('{} trailing bytes'.format(reader.remaining))

    return ModelFile(kinds[tag], metadata, tensors)


def save_model(model: ModelFile, path):
    atomic_write(path, dumps_model(model))
    logger.debug('Saved %s model to %s', model.kind, path)


def load_model(path, kind: str = None) -> ModelFile:
    """
    Read a ``VVBM`` file, optionally insisting on its kind.

    Raises:
        FormatError: the file holds another kind of model.

    """
    model = loads_model(_read_bytes(path))
    if kind is not None and model.kind != kind:
        raise FormatError(
            '{} holds a {} model, expected {}'.format(path, model.kind, kind)
        )
    return model
