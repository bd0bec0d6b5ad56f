"""Dataset payload format and its JSON manifest sidecar.

Payload layout (all little-endian):

    magic "BVQD" | u16 version | u32 n_seqs | u32 T | u32 C | u32 H | u32 W
    | u8 dtype tag (0 = f32) | payload f32 row-major | u32 CRC32(payload)

The manifest lives next to the payload as ``<payload>.json`` and carries the
split sizes, the window protocol, the generating seed and the physics
parameters needed to re-run the solver on stored frames.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"BVQD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIIIIB")


@dataclass
class DatasetManifest:
    payload: str
    n_train: int
    n_val: int
    n_test: int
    input_len: int
    target_len: int
    extreme_event_rate: float
    seed: int
    system_id: str = "shallow_water"
    dt: float = 1.0
    dx: float = 1.0
    physics: dict = field(default_factory=dict)
    event_threshold: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("n_train", "n_val", "n_test"):
            if getattr(self, name) < 1:
                raise FormatError(f"manifest: {name} must be >= 1")
        if self.input_len < 1 or self.target_len < 1:
            raise FormatError("manifest: input_len and target_len must be >= 1")

    @property
    def n_total(self):
        return self.n_train + self.n_val + self.n_test

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"manifest: invalid JSON ({e})")
        try:
            return cls(**raw)
        except TypeError as e:
            raise FormatError(f"manifest: bad fields ({e})")


def manifest_path(payload_path):
    return Path(str(payload_path) + ".json")


def write_dataset(seqs, manifest, directory):
    """Write sequences [n,T,C,H,W] and the manifest; returns the payload path.

    Data is stored as float32; the round trip through write/read is bit-exact
    for float32-representable input.
    """
    arr = np.asarray(seqs)
    if arr.ndim != 5:
        raise ShapeError(f"write_dataset: expected [n,T,C,H,W], got shape {arr.shape}")
    n, t, c, h, w = arr.shape
    if n != manifest.n_total:
        raise FormatError(
            f"write_dataset: {n} sequences but manifest splits sum to {manifest.n_total}"
        )
    payload = arr.astype("<f4").tobytes()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / manifest.payload
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, n, t, c, h, w, 0))
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload)))
    manifest_path(path).write_text(manifest.to_json())
    return path


def read_dataset(path):
    """Read a payload file; returns (float32 array [n,T,C,H,W], manifest)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise FormatError(f"{path}: truncated header")
    magic, version, n, t, c, h, w, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if tag != 0:
        raise FormatError(f"{path}: unknown dtype tag {tag}")
    n_bytes = n * t * c * h * w * 4
    expected = _HEADER.size + n_bytes + 4
    if len(raw) != expected:
        raise FormatError(f"{path}: payload length mismatch ({len(raw)} != {expected})")
    payload = raw[_HEADER.size:_HEADER.size + n_bytes]
    (crc,) = struct.unpack_from("<I", raw, _HEADER.size + n_bytes)
    if crc != zlib.crc32(payload):
        raise FormatError(f"{path}: payload CRC mismatch")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, t, c, h, w)
    mpath = manifest_path(path)
    if not mpath.exists():
        raise FormatError(f"{path}: manifest sidecar {mpath} missing")
    manifest = DatasetManifest.from_json(mpath.read_text())
    return data, manifest
