"""Kaldi-manner text manifests and the per-class 32-shard split.

A manifest directory holds wav.scp, utt2spk, and labels (one "<utt_id>
<value>" pair per line, sorted by utt_id). The labels file maps each
utterance to 0 (normal) or 1 (abnormal); transcripts are not part of this
pipeline. spk2utt is always derivable from utt2spk and is rewritten on
output; if present on input it must agree.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ManifestError

MANIFEST_FILES = ("wav.scp", "utt2spk", "labels")


@dataclass
class UtteranceRecord:
    utt_id: str
    wav_path: str
    speaker_id: str
    label: int

    def __post_init__(self):
        for name, tok in (("utt_id", self.utt_id), ("speaker_id", self.speaker_id)):
            if not tok or any(c.isspace() for c in tok):
                raise ManifestError(f"{name} must be a nonempty whitespace-free token, got {tok!r}")
        if self.label not in (0, 1):
            raise ManifestError(f"label for {self.utt_id} must be 0 or 1, got {self.label!r}")


@dataclass
class Manifest:
    records: list[UtteranceRecord] = field(default_factory=list)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.utt_id)
        seen = set()
        for r in self.records:
            if r.utt_id in seen:
                raise ManifestError(f"duplicate utt_id {r.utt_id!r}")
            seen.add(r.utt_id)

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, UtteranceRecord]:
        return {r.utt_id: r for r in self.records}

    def class_ids(self, label: int) -> list[str]:
        return [r.utt_id for r in self.records if r.label == label]


def _read_pairs(path, multi_value: bool = False) -> dict[str, str]:
    """Parse "id value" lines; rejects duplicates and malformed lines."""
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ManifestError(f"{path}:{lineno}: expected 'id value', got {line!r}")
            key, value = parts
            if not multi_value and len(value.split()) != 1:
                raise ManifestError(f"{path}:{lineno}: expected a single value, got {line!r}")
            if key in pairs:
                raise ManifestError(f"{path}:{lineno}: duplicate utt_id {key!r}")
            pairs[key] = value
    return pairs


def spk2utt_from_utt2spk(utt2spk: dict[str, str]) -> dict[str, list[str]]:
    spk2utt: dict[str, list[str]] = {}
    for utt in sorted(utt2spk):
        spk2utt.setdefault(utt2spk[utt], []).append(utt)
    return spk2utt


def parse_manifest_dir(directory) -> Manifest:
    """Read and cross-validate wav.scp, utt2spk, labels (and spk2utt if present)."""
    paths = {name: os.path.join(directory, name) for name in MANIFEST_FILES}
    for name, path in paths.items():
        if not os.path.isfile(path):
            raise ManifestError(f"{directory}: missing {name}")
    wav_scp = _read_pairs(paths["wav.scp"])
    utt2spk = _read_pairs(paths["utt2spk"])
    labels = _read_pairs(paths["labels"])

    ids = set(wav_scp)
    for name, mapping in (("utt2spk", utt2spk), ("labels", labels)):
        extra = sorted(set(mapping) - ids)
        missing = sorted(ids - set(mapping))
        if extra:
            raise ManifestError(f"{name} references {extra[0]!r} absent from wav.scp")
        if missing:
            raise ManifestError(f"{missing[0]!r} in wav.scp has no entry in {name}")

    spk2utt_path = os.path.join(directory, "spk2utt")
    if os.path.isfile(spk2utt_path):
        listed = _read_pairs(spk2utt_path, multi_value=True)
        derived = spk2utt_from_utt2spk(utt2spk)
        parsed = {spk: utts.split() for spk, utts in listed.items()}
        if {s: sorted(u) for s, u in parsed.items()} != derived:
            raise ManifestError(f"{spk2utt_path} is inconsistent with utt2spk")

    records = []
    for utt in sorted(ids):
        raw = labels[utt]
        if raw not in ("0", "1"):
            raise ManifestError(f"label for {utt!r} must be 0 or 1, got {raw!r}")
        records.append(UtteranceRecord(utt, wav_scp[utt], utt2spk[utt], int(raw)))
    return Manifest(records)


def write_manifest_dir(m: Manifest, directory) -> None:
    """Emit wav.scp, utt2spk, spk2utt (derived), labels, sorted by utt_id."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "wav.scp"), "w", encoding="utf-8") as f:
        for r in m.records:
            f.write(f"{r.utt_id} {r.wav_path}\n")
    with open(os.path.join(directory, "utt2spk"), "w", encoding="utf-8") as f:
        for r in m.records:
            f.write(f"{r.utt_id} {r.speaker_id}\n")
    with open(os.path.join(directory, "labels"), "w", encoding="utf-8") as f:
        for r in m.records:
            f.write(f"{r.utt_id} {r.label}\n")
    spk2utt = spk2utt_from_utt2spk({r.utt_id: r.speaker_id for r in m.records})
    with open(os.path.join(directory, "spk2utt"), "w", encoding="utf-8") as f:
        for spk in sorted(spk2utt):
            f.write(f"{spk} {' '.join(spk2utt[spk])}\n")


@dataclass
class ShardPlan:
    shards_per_class: int = 32
    train_shards: int = 30
    test_shards: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.shards_per_class, self.train_shards, self.test_shards) <= 0:
            raise ConfigError("shard counts must all be positive")
        if self.train_shards + self.test_shards != self.shards_per_class:
            raise ConfigError(
                f"train_shards + test_shards must equal shards_per_class "
                f"({self.train_shards}+{self.test_shards} != {self.shards_per_class})"
            )


@dataclass
class ShardAssignment:
    # utt_id -> (label, shard index)
    shard_of: dict[str, tuple[int, int]]
    train_ids: list[str]
    test_ids: list[str]

    def shard_members(self, label: int, shard: int) -> list[str]:
        return sorted(u for u, (c, s) in self.shard_of.items() if c == label and s == shard)


def shard_dataset(m: Manifest, plan: ShardPlan) -> ShardAssignment:
    """Shuffle each class by seed, deal round-robin into shards_per_class
    shards; the first train_shards shards per class are the training set."""
    rng = np.random.default_rng(plan.seed)
    shard_of: dict[str, tuple[int, int]] = {}
    train_ids: list[str] = []
    test_ids: list[str] = []
    for label in (0, 1):
        ids = m.class_ids(label)
        if len(ids) < plan.shards_per_class:
            raise ConfigError(
                f"class {label} has {len(ids)} utterances, fewer than "
                f"{plan.shards_per_class} shards"
            )
        order = rng.permutation(len(ids))
        for pos, idx in enumerate(order):
            shard = pos % plan.shards_per_class
            shard_of[ids[idx]] = (label, shard)
            (train_ids if shard < plan.train_shards else test_ids).append(ids[idx])
    train_ids.sort()
    test_ids.sort()
    return ShardAssignment(shard_of, train_ids, test_ids)
