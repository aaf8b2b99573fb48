"""Binary checkpoint format.

Layout: 8-byte magic ``STSSLCK1`` | little-endian uint32 header length |
UTF-8 JSON header (format version, configs, provenance, tensor table with
name/shape/trainable/offset/length) | concatenated little-endian float32
tensor blobs. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
import torch

from .errors import BadMagicError, TruncatedCheckpointError, VersionMismatchError
from .model import ClassifierModel, EncoderConfig, HeadConfig

MAGIC = b"STSSLCK1"
FORMAT_VERSION = 1


@dataclass
class CheckpointData:
    encoder_config: EncoderConfig
    head_config: HeadConfig
    provenance: dict
    tensors: dict  # name -> np.ndarray float32
    trainable: dict  # name -> bool

    def encoder_state(self):
        """Encoder tensors as a torch state dict (prefix stripped)."""
        return {name[len("encoder."):]: torch.from_numpy(arr.copy())
                for name, arr in self.tensors.items()
                if name.startswith("encoder.")}


def save_checkpoint(module, encoder_config, head_config, provenance, path):
    table = []
    blobs = []
    offset = 0
    for name, p in module.named_parameters():
        arr = p.detach().cpu().numpy().astype("<f4", copy=False)
        raw = arr.tobytes()
        table.append({
            "name": name,
            "shape": list(arr.shape),
            "trainable": bool(p.requires_grad),
            "offset": offset,
            "length": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    header = {
        "version": FORMAT_VERSION,
        "encoder_config": encoder_config.to_json_dict(),
        "head_config": head_config.to_json_dict(),
        "provenance": provenance,
        "tensors": table,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> CheckpointData:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:8]!r}")
    if len(data) < 12:
        raise TruncatedCheckpointError(f"{path}: missing header length")
    (header_len,) = struct.unpack("<I", data[8:12])
    header_end = 12 + header_len
    if len(data) < header_end:
        raise TruncatedCheckpointError(f"{path}: truncated header")
    header = json.loads(data[12:header_end].decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {header.get('version')} != {FORMAT_VERSION}")

    tensors, trainable = {}, {}
    for entry in header["tensors"]:
        start = header_end + entry["offset"]
        end = start + entry["length"]
        if end > len(data):
            raise TruncatedCheckpointError(f"{path}: tensor {entry['name']} blob truncated")
        arr = np.frombuffer(data[start:end], dtype="<f4").reshape(entry["shape"]).copy()
        tensors[entry["name"]] = arr
        trainable[entry["name"]] = bool(entry["trainable"])
    return CheckpointData(
        EncoderConfig.from_json_dict(header["encoder_config"]),
        HeadConfig.from_json_dict(header["head_config"]),
        header["provenance"],
        tensors,
        trainable,
    )


def restore_classifier(ck: CheckpointData) -> ClassifierModel:
    model = ClassifierModel(ck.encoder_config, ck.head_config)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in ck.tensors.items()}
    model.load_state_dict(state)
    for name, p in model.named_parameters():
        p.requires_grad_(ck.trainable.get(name, True))
    return model
