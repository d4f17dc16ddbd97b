"""Binary file formats.

RIAF: patch-feature file. Magic "RIAF", u16 LE version (=1), u32 LE
n_patches, u32 LE dim_in, then n_patches*dim_in float32 LE row-major.

RIAD: descriptor archive. Magic "RIAD", u16 LE version (=1), u32 LE
count, u32 LE dim, count*dim float32 LE payload, u32 LE metadata
length, then UTF-8 JSON metadata (item ids, config echo, seed, package
version). Metadata is serialized with sorted keys so identical runs
produce byte-identical archives.

All writes go to a temp file in the target directory and are renamed
into place only on success.
"""

import json
import os
import struct
import tempfile

import numpy as np

from ria.errors import FormatError, InvalidInputError

RIAF_MAGIC = b"RIAF"
RIAD_MAGIC = b"RIAD"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHII")


def atomic_write(path, data):
    """Write bytes to path atomically (temp file + rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ria-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode_matrix(magic, matrix):
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    header = _HEADER.pack(magic, FORMAT_VERSION, arr.shape[0], arr.shape[1])
    return header + arr.tobytes()


def _decode_header(data, magic, path):
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got_magic, version, rows, cols = _HEADER.unpack_from(data)
    if got_magic != magic:
        raise FormatError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    return rows, cols


def write_feature_file(path, features):
    """Write an N x D_in float matrix as a RIAF file."""
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"features must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("features contain non-finite values")
    atomic_write(path, _encode_matrix(RIAF_MAGIC, arr))


def read_feature_file(path):
    """Read a RIAF file into an N x D_in float64 matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    rows, cols = _decode_header(data, RIAF_MAGIC, path)
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload size mismatch (file is {len(data)} bytes, "
            f"header implies {expected})"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: payload contains non-finite values")
    return arr.astype(np.float64)


def write_descriptor_archive(path, item_ids, matrix, metadata=None):
    """Write descriptors (count x dim, one row per item id) as a RIAD archive."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(item_ids):
        raise InvalidInputError(
            f"descriptor matrix shape {matrix.shape} does not match "
            f"{len(item_ids)} item ids"
        )
    meta = dict(metadata or {})
    meta["item_ids"] = [str(i) for i in item_ids]
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = _encode_matrix(RIAD_MAGIC, matrix)
    atomic_write(path, body + struct.pack("<I", len(meta_bytes)) + meta_bytes)


def read_descriptor_archive(path):
    """Read a RIAD archive -> (item_ids, count x dim float64 matrix, metadata)."""
    with open(path, "rb") as fh:
        data = fh.read()
    rows, cols = _decode_header(data, RIAD_MAGIC, path)
    payload_end = _HEADER.size + 4 * rows * cols
    if len(data) < payload_end + 4:
        raise FormatError(f"{path}: truncated archive")
    matrix = (
        np.frombuffer(data, dtype="<f4", count=rows * cols, offset=_HEADER.size)
        .reshape(rows, cols)
        .astype(np.float64)
    )
    (meta_len,) = struct.unpack_from("<I", data, payload_end)
    meta_bytes = data[payload_end + 4 : payload_end + 4 + meta_len]
    if len(meta_bytes) != meta_len or len(data) != payload_end + 4 + meta_len:
        raise FormatError(f"{path}: metadata size mismatch")
    try:
        metadata = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad metadata block: {exc}") from exc
    item_ids = metadata.get("item_ids")
    if not isinstance(item_ids, list) or len(item_ids) != rows:
        raise FormatError(f"{path}: metadata item_ids inconsistent with payload")
    if not np.all(np.isfinite(matrix)):
        raise FormatError(f"{path}: payload contains non-finite values")
    return [str(i) for i in item_ids], matrix, metadata
