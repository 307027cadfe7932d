#!/usr/bin/env python3
"""
File formats for particle clouds and activations.

JNP1 cloud file (little-endian):
    header, 24 bytes:  magic "JNP1" | version u32 | n_jets u32 | capacity u32 |
                       n_features u32 (= 4) | label u8 | 3 reserved bytes
    payload:           n_jets x capacity x 4 float32, features
                       (eta_rel, phi_rel, pt_rel, mask), masked slots zeroed

JACT activation file (little-endian):
    header, 12 bytes:  magic "JACT" | n_rows u32 | dim u32
    payload:           n_rows x dim float32, row-major; row i <-> cloud i

A FeatureMap is stored as consecutive JACT blocks, weight matrix then a
1-row bias block, per layer.

CSV: header `jet_id,slot,eta_rel,phi_rel,pt_rel,mask`, one line per slot,
floats with 9 significant digits.
"""

import csv
import math
import os
import struct
from typing import List, Optional

import numpy as np

from cloud_model import (
    N_FEATURES,
    PHI,
    BadMagic,
    BadVersion,
    CloudSample,
    CorruptPayload,
    InputNotFound,
    IoFailure,
    JetLabel,
    ParseFailure,
    ParticleCloud,
    ValidationFailure,
    canonicalize,
    validate,
)
from mplayer import FeatureMap

CLOUD_MAGIC = b"JNP1"
CLOUD_VERSION = 1
CLOUD_HEADER = struct.Struct("<4sIIIIB3x")
ACT_MAGIC = b"JACT"
ACT_HEADER = struct.Struct("<4sII")
FLOAT = np.dtype("<f4")
CSV_HEADER = ["jet_id", "slot", "eta_rel", "phi_rel", "pt_rel", "mask"]

# largest float32 strictly inside (-pi, pi]
_PHI32_MAX = float(np.nextafter(np.float32(math.pi), np.float32(0)))


def _read_bytes(path: str) -> bytes:
    if not os.path.exists(path):
        raise InputNotFound(f"input file not found: {path}")
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _write_bytes(path: str, data: bytes) -> None:
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _payload_float32(data: np.ndarray) -> np.ndarray:
    out = data.astype(FLOAT)
    phi = out[..., PHI]
    # float32 rounding can push values just past +-pi
    phi[phi.astype(np.float64) > math.pi] = _PHI32_MAX
    phi[phi.astype(np.float64) <= -math.pi] = -_PHI32_MAX
    return out


def write_clouds(sample: CloudSample, path: str) -> None:
    """Write a JNP1 file; clouds are canonicalized (masked slots zeroed) first."""
    data = np.stack([canonicalize(c).padded(sample.capacity) for c in sample.clouds])
    header = CLOUD_HEADER.pack(CLOUD_MAGIC, CLOUD_VERSION, len(sample), sample.capacity,
                               N_FEATURES, sample.label.value)
    _write_bytes(path, header + _payload_float32(data).tobytes())


def read_clouds(path: str) -> CloudSample:
    """Strict JNP1 reader; every cloud is validated."""
    raw = _read_bytes(path)
    if len(raw) < CLOUD_HEADER.size:
        raise CorruptPayload(f"{path}: header needs {CLOUD_HEADER.size} bytes, file has {len(raw)}", len(raw))
    magic, version, n_jets, capacity, n_features, label_code = CLOUD_HEADER.unpack_from(raw)
    if magic != CLOUD_MAGIC:
        raise BadMagic(f"{path}: expected magic {CLOUD_MAGIC!r}, found {magic!r}")
    if version != CLOUD_VERSION:
        raise BadVersion(f"{path}: unsupported version {version} (expected {CLOUD_VERSION})")
    if n_features != N_FEATURES:
        raise CorruptPayload(f"{path}: n_features must be {N_FEATURES}, found {n_features}", 16)
    try:
        label = JetLabel(label_code)
    except ValueError:
        raise CorruptPayload(f"{path}: unknown label code {label_code}", 20)
    if n_jets < 1 or capacity < 1:
        raise CorruptPayload(f"{path}: empty sample (n_jets={n_jets}, capacity={capacity})", 8)

    expected = n_jets * capacity * N_FEATURES * FLOAT.itemsize
    payload = raw[CLOUD_HEADER.size:]
    if len(payload) < expected:
        raise CorruptPayload(f"{path}: payload truncated, expected {expected} bytes", len(raw))
    if len(payload) > expected:
        raise CorruptPayload(f"{path}: {len(payload) - expected} trailing bytes", CLOUD_HEADER.size + expected)

    values = np.frombuffer(payload, dtype=FLOAT).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise CorruptPayload(f"{path}: non-finite value", CLOUD_HEADER.size + int(bad[0]) * FLOAT.itemsize)

    data = values.reshape(n_jets, capacity, N_FEATURES)
    clouds = []
    for i, jet in enumerate(data):
        cloud = ParticleCloud(jet, capacity)
        problems = validate(cloud)
        if problems:
            raise ValidationFailure(f"{path}: jet {i}: {'; '.join(problems)}")
        clouds.append(cloud)
    return CloudSample(tuple(clouds), label)


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def _fmt_phi(value: float) -> str:
    text = _fmt(value)
    # 9-digit rounding must not leave (-pi, pi]
    if float(text) > math.pi:
        return _fmt(3.14159265)
    if float(text) <= -math.pi:
        return _fmt(-3.14159265)
    return text


def write_csv(sample: CloudSample, path: str) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for jet_id, cloud in enumerate(sample.clouds):
                for slot, (eta, phi, pt, mask) in enumerate(canonicalize(cloud).padded(sample.capacity)):
                    writer.writerow([jet_id, slot, _fmt(eta), _fmt_phi(phi), _fmt(pt), int(mask)])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_csv(path: str, label: JetLabel = JetLabel.OTHER) -> CloudSample:
    """Read a cloud CSV; jets must appear in order with consecutive slots."""
    if not os.path.exists(path):
        raise InputNotFound(f"input file not found: {path}")

    jets: List[List[List[float]]] = []
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != CSV_HEADER:
                raise ParseFailure(f"expected header {','.join(CSV_HEADER)}", 1)
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(CSV_HEADER):
                    raise ParseFailure(f"expected {len(CSV_HEADER)} fields, found {len(row)}", line_no)
                try:
                    jet_id, slot = int(row[0]), int(row[1])
                    features = [float(v) for v in row[2:]]
                except ValueError as exc:
                    raise ParseFailure(str(exc), line_no)
                if not all(math.isfinite(v) for v in features):
                    raise ParseFailure("non-finite value", line_no)
                if jet_id == len(jets) and slot == 0:
                    jets.append([])
                if jet_id != len(jets) - 1 or slot != len(jets[-1]):
                    raise ParseFailure(f"unexpected jet_id/slot ({jet_id}, {slot})", line_no)
                jets[-1].append(features)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if not jets:
        raise ParseFailure("no rows", 2)
    capacity = max(len(j) for j in jets)
    clouds = []
    for i, rows in enumerate(jets):
        cloud = ParticleCloud(np.asarray(rows), capacity)
        problems = validate(cloud)
        if problems:
            raise ValidationFailure(f"{path}: jet {i}: {'; '.join(problems)}")
        clouds.append(cloud)
    return CloudSample(tuple(clouds), label)


def read_any(path: str, label: Optional[JetLabel] = None) -> CloudSample:
    """Dispatch on extension: .csv is CSV, anything else JNP1."""
    if path.lower().endswith(".csv"):
        return read_csv(path, label or JetLabel.OTHER)
    sample = read_clouds(path)
    if label is not None:
        sample = CloudSample(sample.clouds, label, sample.seed)
    return sample


def write_any(sample: CloudSample, path: str) -> None:
    if path.lower().endswith(".csv"):
        write_csv(sample, path)
    else:
        write_clouds(sample, path)


def _act_block(matrix: np.ndarray) -> bytes:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if not np.all(np.isfinite(matrix)):
        raise ValidationFailure("activations contain NaN or Inf")
    return ACT_HEADER.pack(ACT_MAGIC, matrix.shape[0], matrix.shape[1]) + matrix.astype(FLOAT).tobytes()


def _parse_act_blocks(raw: bytes, path: str) -> List[np.ndarray]:
    blocks, offset = [], 0
    while offset < len(raw):
        if len(raw) - offset < ACT_HEADER.size:
            raise CorruptPayload(f"{path}: incomplete activation header", offset)
        magic, n_rows, dim = ACT_HEADER.unpack_from(raw, offset)
        if magic != ACT_MAGIC:
            raise BadMagic(f"{path}: expected magic {ACT_MAGIC!r} at byte {offset}, found {magic!r}")
        start = offset + ACT_HEADER.size
        size = n_rows * dim * FLOAT.itemsize
        if len(raw) < start + size:
            raise CorruptPayload(f"{path}: activation payload truncated", len(raw))
        values = np.frombuffer(raw, dtype=FLOAT, count=n_rows * dim, offset=start).astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise CorruptPayload(f"{path}: non-finite activation", start + int(bad[0]) * FLOAT.itemsize)
        blocks.append(values.reshape(n_rows, dim))
        offset = start + size
    return blocks


def write_activations(acts: np.ndarray, path: str) -> None:
    _write_bytes(path, _act_block(acts))


def read_activations(path: str) -> np.ndarray:
    raw = _read_bytes(path)
    blocks = _parse_act_blocks(raw, path)
    if len(blocks) != 1:
        raise CorruptPayload(f"{path}: expected one activation block, found {len(blocks)}", 0)
    return blocks[0]


def write_feature_map(feature_map: FeatureMap, path: str) -> None:
    data = b"".join(_act_block(w) + _act_block(b[None, :])
                    for w, b in zip(feature_map.weights, feature_map.biases))
    _write_bytes(path, data)


def read_feature_map(path: str, final_activation: str = "identity") -> FeatureMap:
    blocks = _parse_act_blocks(_read_bytes(path), path)
    if not blocks or len(blocks) % 2:
        raise CorruptPayload(f"{path}: expected weight/bias block pairs, found {len(blocks)} blocks", 0)
    weights = tuple(blocks[0::2])
    biases = tuple(b.ravel() for b in blocks[1::2])
    return FeatureMap(weights, biases, final_activation)
