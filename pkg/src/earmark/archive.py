"""Binary feature archives (.fark) with .scp indexes, and checkpoint files.

Feature archive layout: magic "FARK1\\0", then per record
    [u32 LE id_len][id bytes][u32 LE rows][u32 LE cols]
    [f32 LE frame_shift_ms][rows*cols f32 LE, row-major]
The .scp index lists "<utt_id> <ark_path>:<byte_offset>" lines, offsets
pointing at each record's id_len field. Feature payloads are float32.

Checkpoint layout: magic "FCKP1\\0", then named tensor records
    [u32 LE name_len][name bytes][u32 LE rank][u32 LE dims...][f64 LE data...]
Checkpoints store float64 so that save -> load -> forward and resumed
training are bit-identical to the uninterrupted run. A record named
"__meta__" carries a UTF-8 JSON document (one byte per element).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArchiveError
from .features import FeatureMatrix

FARK_MAGIC = b"FARK1\x00"
FCKP_MAGIC = b"FCKP1\x00"
META_RECORD = "__meta__"


@dataclass
class ArchiveIndexEntry:
    utt_id: str
    archive_path: str
    byte_offset: int


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ArchiveError(f"truncated archive while reading {what}")
    return buf


def write_feature_archive(features, ark_path, scp_path) -> None:
    """Write (utt_id, FeatureMatrix) pairs to ark_path and index them in
    scp_path, preserving iteration order."""
    seen: set[str] = set()
    ark_path, scp_path = str(ark_path), str(scp_path)
    with open(ark_path, "wb") as ark, open(scp_path, "w", encoding="utf-8") as scp:
        ark.write(FARK_MAGIC)
        offset = len(FARK_MAGIC)
        for utt_id, mat in features:
            if utt_id in seen:
                raise ArchiveError(f"duplicate utt_id {utt_id!r}")
            seen.add(utt_id)
            rows, cols = mat.data.shape
            if rows == 0 or cols == 0:
                raise ArchiveError(f"{utt_id!r}: empty feature matrix")
            ident = utt_id.encode("utf-8")
            header = struct.pack("<I", len(ident)) + ident
            header += struct.pack("<IIf", rows, cols, mat.frame_shift_ms)
            payload = np.ascontiguousarray(mat.data, dtype="<f4").tobytes()
            ark.write(header)
            ark.write(payload)
            scp.write(f"{utt_id} {ark_path}:{offset}\n")
            offset += len(header) + len(payload)
    if not seen:
        raise ArchiveError(f"{ark_path}: refusing to write an empty archive")


def read_scp(scp_path) -> list[ArchiveIndexEntry]:
    entries = []
    with open(scp_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                utt_id, location = line.split(None, 1)
                path, offset = location.rsplit(":", 1)
                entries.append(ArchiveIndexEntry(utt_id, path, int(offset)))
            except ValueError as exc:
                raise ArchiveError(f"{scp_path}:{lineno}: malformed scp line {line!r}") from exc
    return entries


def read_feature(entry: ArchiveIndexEntry) -> FeatureMatrix:
    """Load the exact matrix written for this index entry."""
    size = os.path.getsize(entry.archive_path)
    with open(entry.archive_path, "rb") as f:
        if _read_exact(f, len(FARK_MAGIC), "magic") != FARK_MAGIC:
            raise ArchiveError(f"{entry.archive_path}: bad magic (not a feature archive)")
        if not len(FARK_MAGIC) <= entry.byte_offset < size:
            raise ArchiveError(f"{entry.archive_path}: offset {entry.byte_offset} out of range")
        f.seek(entry.byte_offset)
        (id_len,) = struct.unpack("<I", _read_exact(f, 4, "id length"))
        found = _read_exact(f, id_len, "utt_id").decode("utf-8")
        if found != entry.utt_id:
            raise ArchiveError(
                f"{entry.archive_path}@{entry.byte_offset}: found {found!r}, "
                f"expected {entry.utt_id!r} (stale scp?)"
            )
        rows, cols, shift = struct.unpack("<IIf", _read_exact(f, 12, "record header"))
        data = np.frombuffer(_read_exact(f, 4 * rows * cols, "feature payload"), dtype="<f4")
    return FeatureMatrix(data.astype(np.float64).reshape(rows, cols), float(shift))


def write_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Write named float64 tensors plus a JSON metadata record."""
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(str(path), "wb") as f:
        f.write(FCKP_MAGIC)
        _write_record(f, META_RECORD, np.frombuffer(meta_bytes, dtype=np.uint8).astype(np.float64))
        for name in sorted(tensors):
            if name == META_RECORD:
                raise ArchiveError(f"tensor name {META_RECORD!r} is reserved")
            _write_record(f, name, np.asarray(tensors[name], dtype=np.float64))


def _write_record(f, name: str, arr: np.ndarray) -> None:
    ident = name.encode("utf-8")
    f.write(struct.pack("<I", len(ident)))
    f.write(ident)
    f.write(struct.pack("<I", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Return (tensors, meta) as written by write_checkpoint."""
    tensors: dict[str, np.ndarray] = {}
    meta = None
    with open(str(path), "rb") as f:
        if _read_exact(f, len(FCKP_MAGIC), "magic") != FCKP_MAGIC:
            raise ArchiveError(f"{path}: bad magic (not a checkpoint)")
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise ArchiveError("truncated archive while reading name length")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "record name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, "rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            count = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(_read_exact(f, 8 * count, f"data of {name!r}"), dtype="<f8")
            arr = data.astype(np.float64).reshape(dims)
            if name == META_RECORD:
                meta = json.loads(arr.astype(np.uint8).tobytes().decode("utf-8"))
            else:
                tensors[name] = arr
    if meta is None:
        raise ArchiveError(f"{path}: checkpoint has no metadata record")
    return tensors, meta
