"""Binary container, checkpoint and PGM persistence.

Container layout (little-endian)::

    magic      8 bytes  b"WDAEPBIN"
    version    u16      1
    elem_type  u8       0 = complex128, 1 = float64, 2 = uint8
    ndim       u8
    dims       u32 * ndim
    meta_len   u32      length of the UTF-8 JSON metadata that follows
    meta       bytes
    payload    prod(dims) * element size
    crc32      u32      over every byte from ``version`` through ``payload``
"""

from __future__ import annotations

import json
import os
import shutil
import struct
import tempfile
import zlib
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import CorruptFile, DataError, VersionMismatch
from .kspace import SamplingMask
from .prior.network import Architecture, BatchNorm, DaeNetwork, Layer

__all__ = [
    "MAGIC",
    "VERSION",
    "save_array",
    "load_array",
    "save_image",
    "load_image",
    "save_kspace",
    "load_kspace",
    "save_mask",
    "load_mask",
    "save_checkpoint",
    "load_checkpoint",
    "write_pgm",
    "read_pgm",
    "export_pgm",
    "atomic_path",
    "atomic_dir",
    "write_line_chart",
]

MAGIC = b"WDAEPBIN"
VERSION = 1
_DTYPES = {0: np.dtype("<c16"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_CODES = {"c": 0, "f": 1, "u": 2, "b": 2}


@contextmanager
def atomic_path(path):
    """Yield a temporary path beside ``path``; rename over it on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


@contextmanager
def atomic_dir(path):
    """Yield a fresh temporary directory that replaces ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    old = None
    if path.exists():
        old = Path(tempfile.mkdtemp(prefix=f".{path.name}.old.", dir=path.parent))
        os.replace(path, old / path.name)
    os.replace(tmp, path)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def _encode(arr: np.ndarray, meta: dict | None) -> bytes:
    arr = np.asarray(arr)
    code = _CODES.get(arr.dtype.kind)
    if code is None:
        raise DataError(f"cannot store dtype {arr.dtype}")
    if arr.ndim > 255:
        raise DataError("too many dimensions")
    data = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    body = (
        struct.pack("<HBB", VERSION, code, arr.ndim)
        + struct.pack(f"<{arr.ndim}I", *arr.shape)
        + struct.pack("<I", len(meta_bytes))
        + meta_bytes
        + data.tobytes()
    )
    return MAGIC + body + struct.pack("<I", zlib.crc32(body))


def _decode(raw: bytes, source: str = "<bytes>"):
    if len(raw) < len(MAGIC) + 4 + 4 + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CorruptFile(f"{source}: not a WDAEPBIN container")
    body, crc = raw[len(MAGIC) : -4], raw[-4:]
    version, code, ndim = struct.unpack_from("<HBB", body, 0)
    if version != VERSION:
        raise VersionMismatch(f"{source}: container version {version}, expected {VERSION}")
    if struct.unpack("<I", crc)[0] != zlib.crc32(body):
        raise CorruptFile(f"{source}: CRC mismatch")
    if code not in _DTYPES:
        raise CorruptFile(f"{source}: unknown element type {code}")
    off = 4
    dims = struct.unpack_from(f"<{ndim}I", body, off)
    off += 4 * ndim
    (meta_len,) = struct.unpack_from("<I", body, off)
    off += 4
    try:
        meta = json.loads(body[off : off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{source}: unreadable metadata") from exc
    off += meta_len
    dtype = _DTYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(body) - off != expected:
        raise CorruptFile(f"{source}: payload is {len(body) - off} bytes, expected {expected}")
    arr = np.frombuffer(body, dtype=dtype, count=int(np.prod(dims, dtype=np.int64)), offset=off)
    return arr.reshape(dims).copy(), meta


def save_array(path, arr, meta: dict | None = None) -> None:
    blob = _encode(arr, meta)
    with atomic_path(path) as tmp:
        tmp.write_bytes(blob)


def load_array(path):
    """Return ``(array, metadata)``."""
    path = Path(path)
    return _decode(path.read_bytes(), str(path))


def save_image(path, u, meta: dict | None = None) -> None:
    save_array(path, np.asarray(u, dtype=np.complex128), {"kind": "image", **(meta or {})})


def load_image(path) -> np.ndarray:
    arr, _ = load_array(path)
    if arr.ndim != 2:
        raise DataError(f"{path}: expected a 2D image, got shape {arr.shape}")
    return arr.astype(np.complex128, copy=False)


def save_kspace(path, f, meta: dict | None = None) -> None:
    save_array(path, np.asarray(f, dtype=np.complex128), {"kind": "kspace", **(meta or {})})


def load_kspace(path) -> np.ndarray:
    return load_image(path)


def save_mask(path, mask: SamplingMask) -> None:
    save_array(path, mask.samples.astype(np.uint8), {"kind": "mask", **mask.metadata()})


def load_mask(path) -> SamplingMask:
    arr, meta = load_array(path)
    if arr.ndim != 2 or arr.dtype != np.uint8 or arr.max(initial=0) > 1:
        raise DataError(f"{path}: not a 0/1 mask")
    return SamplingMask(
        arr.astype(bool),
        meta.get("pattern", "unknown"),
        float(meta.get("target_R", arr.size / max(int(arr.sum()), 1))),
        meta.get("seed"),
        meta.get("params", {}),
    )


# -- checkpoints -------------------------------------------------------------

def _layer_kind(layer: Layer) -> str:
    kind = "conv"
    if layer.bn is not None:
        kind += "+bn"
    if layer.skip_from is not None:
        kind += "+sum"
    if layer.relu:
        kind += "+relu"
    return kind


def save_checkpoint(directory, net: DaeNetwork, **extra) -> None:
    """Write ``manifest.json`` plus one container per parameter/buffer array."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    layers = []
    for i, layer in enumerate(net.layers):
        arrays = {"weight": layer.weight, "bias": layer.bias}
        if layer.bn is not None:
            arrays.update(
                gamma=layer.bn.gamma,
                beta=layer.bn.beta,
                running_mean=layer.bn.running_mean,
                running_var=layer.bn.running_var,
            )
        files = {}
        for name, arr in arrays.items():
            fname = f"layer{i:02d}_{name}.bin"
            save_array(directory / fname, np.asarray(arr, dtype=np.float64))
            files[name] = {"file": fname, "shape": list(arr.shape)}
        entry = {"kind": _layer_kind(layer), "skip_from": layer.skip_from, "relu": layer.relu, "arrays": files}
        if layer.bn is not None:
            entry["bn_eps"] = layer.bn.eps
            entry["bn_momentum"] = layer.bn.momentum
        layers.append(entry)
    meta = {k: v for k, v in net.meta.items()}
    meta.update(extra)
    manifest = {
        "format": "wdaep-checkpoint",
        "version": VERSION,
        "architecture": net.arch.to_dict(),
        "layers": layers,
        "meta": meta,
    }
    with atomic_path(directory / "manifest.json") as tmp:
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_checkpoint(directory) -> DaeNetwork:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{directory}: unreadable manifest") from exc
    if manifest.get("format") != "wdaep-checkpoint":
        raise CorruptFile(f"{directory}: not a wdaep checkpoint")
    if manifest.get("version") != VERSION:
        raise VersionMismatch(f"{directory}: checkpoint version {manifest.get('version')}")

    def read(spec):
        arr, _ = load_array(directory / spec["file"])
        if list(arr.shape) != spec["shape"]:
            raise CorruptFile(f"{spec['file']}: shape {arr.shape} disagrees with manifest {spec['shape']}")
        return arr

    layers = []
    for entry in manifest["layers"]:
        a = entry["arrays"]
        bn = None
        if "gamma" in a:
            bn = BatchNorm(read(a["gamma"]), read(a["beta"]), read(a["running_mean"]),
                           read(a["running_var"]), entry["bn_eps"], entry["bn_momentum"])
        layers.append(Layer(read(a["weight"]), read(a["bias"]), bn, entry["relu"], entry["skip_from"]))
    return DaeNetwork(Architecture(**manifest["architecture"]), layers, "inference", manifest.get("meta", {}))


# -- PGM ---------------------------------------------------------------------

def write_pgm(path, values) -> None:
    """16-bit binary PGM from values in [0, 1]."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    if v.ndim != 2:
        raise DataError("PGM export needs a 2D array")
    pix = np.rint(v * 65535).astype(">u2")
    header = f"P5\n{v.shape[1]} {v.shape[0]}\n65535\n".encode("ascii")
    with atomic_path(path) as tmp:
        tmp.write_bytes(header + pix.tobytes())


def export_pgm(u, path) -> None:
    """Magnitude image linearly scaled so its maximum maps to 65535."""
    mag = np.abs(np.asarray(u))
    peak = mag.max(initial=0.0)
    write_pgm(path, mag / peak if peak > 0 else np.zeros_like(mag, dtype=np.float64))


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos].decode("ascii"))
    pos += 1
    if fields[0] != "P5":
        raise CorruptFile(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(np.int64)


def write_line_chart(path, series, height: int = 128, width: int = 256) -> None:
    """Render one or more y-sequences as dark polylines on a white PGM canvas.

    All series share the y range; x spans each series' own length.
    """
    series = [np.asarray(s, dtype=np.float64) for s in series if len(s)]
    canvas = np.ones((height, width))
    finite = [s[np.isfinite(s)] for s in series]
    if finite and any(f.size for f in finite):
        lo = min(f.min() for f in finite if f.size)
        hi = max(f.max() for f in finite if f.size)
        span = hi - lo if hi > lo else 1.0
        cols = np.arange(width)
        for s in series:
            x = np.linspace(0, width - 1, s.size) if s.size > 1 else np.array([0.0])
            y = np.interp(cols, x, np.nan_to_num(s, nan=lo, posinf=hi, neginf=lo))
            rows = np.rint((height - 1) * (1 - (y - lo) / span)).astype(int)
            for c in cols:
                a, b = sorted((rows[c], rows[c - 1] if c else rows[c]))
                canvas[a : b + 1, c] = 0.0
    write_pgm(path, canvas)
