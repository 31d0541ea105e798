"""Single-file NIfTI-1 (``.nii``) subset and the FLXC model file.

Only little-endian, uncompressed, single-file NIfTI-1 with datatypes
uint8, int16, float32 and float64 is supported. Orientation fields are
carried through unchanged; nothing is resampled. See ``docs/formats.md``
for the byte layouts.
"""
from __future__ import annotations

import os
import struct
import zlib
from typing import Tuple, Union

import numpy as np

from .network import Network, NetworkConfig, PathwayConfig, build_network
from .volume import Orientation, Volume

__all__ = [
    "NiftiError",
    "BadMagicError",
    "UnsupportedDatatypeError",
    "TruncatedPayloadError",
    "ModelFileError",
    "ChecksumError",
    "DATATYPES",
    "read_volume",
    "write_volume",
    "nifti_bytes",
    "save_model",
    "load_model",
    "model_bytes",
    "parse_model",
]

PathLike = Union[str, os.PathLike]


class NiftiError(ValueError):
    """Malformed or unsupported NIfTI file."""


class BadMagicError(NiftiError):
    pass


class UnsupportedDatatypeError(NiftiError):
    pass


class TruncatedPayloadError(NiftiError):
    pass


HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC = b"n+1\x00"
MAX_DIM = 4096

DATATYPES = {
    2: np.dtype("<u1"),
    4: np.dtype("<i2"),
    16: np.dtype("<f4"),
    64: np.dtype("<f8"),
}
_CODE_FOR_NAME = {"uint8": 2, "int16": 4, "float32": 16, "float64": 64}


def _datatype_code(datatype) -> int:
    if isinstance(datatype, (int, np.integer)):
        code = int(datatype)
    else:
        name = np.dtype(datatype).name
        if name not in _CODE_FOR_NAME:
            raise UnsupportedDatatypeError(f"unsupported datatype {name!r}")
        code = _CODE_FOR_NAME[name]
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(f"unsupported datatype code {code}")
    return code


def nifti_bytes(volume: Volume, datatype="float32") -> bytes:
    """Serialise ``volume`` to the bytes of a ``.nii`` file."""
    code = _datatype_code(datatype)
    dtype = DATATYPES[code]
    data = np.asarray(volume.data)
    if max(data.shape) > MAX_DIM:
        raise NiftiError(f"dimension exceeds {MAX_DIM}: {data.shape}")
    if dtype.kind in "iu":
        info = np.iinfo(dtype)
        if data.size and (data.min() < info.min or data.max() > info.max):
            raise NiftiError(f"values out of range for {dtype.name}")
        if data.dtype.kind == "f" and not np.array_equal(data, np.round(data)):
            raise NiftiError(f"non-integer values cannot be stored as {dtype.name}")
    orient = volume.orientation or Orientation()

    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *data.shape, 1, 1, 1, 1)
    struct.pack_into("<hh", hdr, 70, code, dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, orient.qfac, *volume.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(VOX_OFFSET))
    struct.pack_into("<ff", hdr, 112, 0.0, 0.0)  # scl_slope 0: no scaling
    struct.pack_into("<B", hdr, 123, 2)  # xyzt_units: mm
    struct.pack_into("<hh", hdr, 252, orient.qform_code, orient.sform_code)
    struct.pack_into("<6f", hdr, 256, *orient.quatern)
    for i, row in enumerate(orient.srow):
        struct.pack_into("<4f", hdr, 280 + 16 * i, *row)
    hdr[344:348] = MAGIC

    payload = np.asarray(data, dtype=dtype).tobytes(order="F")
    return bytes(hdr) + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + payload


def write_volume(volume: Volume, path: PathLike, datatype="float32") -> None:
    blob = nifti_bytes(volume, datatype)
    with open(path, "wb") as fh:
        fh.write(blob)


def _parse_nifti(blob: bytes, name: str = "<bytes>") -> Volume:
    if len(blob) < HEADER_SIZE:
        raise TruncatedPayloadError(f"{name}: file shorter than the {HEADER_SIZE}-byte header")
    (sizeof_hdr,) = struct.unpack_from("<i", blob, 0)
    if sizeof_hdr != HEADER_SIZE:
        if struct.unpack_from(">i", blob, 0)[0] == HEADER_SIZE:
            raise NiftiError(f"{name}: big-endian NIfTI is not supported")
        raise NiftiError(f"{name}: sizeof_hdr is {sizeof_hdr}, expected {HEADER_SIZE}")
    magic = bytes(blob[344:348])
    if magic != MAGIC:
        raise BadMagicError(f"{name}: bad magic {magic!r}, expected {MAGIC!r} (single-file NIfTI-1)")

    dim = struct.unpack_from("<8h", blob, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiError(f"{name}: invalid dim[0] = {ndim}")
    shape = list(dim[1 : ndim + 1])
    if any(s < 1 or s > MAX_DIM for s in shape):
        raise NiftiError(f"{name}: dims {shape} outside 1..{MAX_DIM}")
    if len(shape) > 3:
        if any(s != 1 for s in shape[3:]):
            raise NiftiError(f"{name}: only 3-D volumes are supported, dims {shape}")
        shape = shape[:3]
    shape += [1] * (3 - len(shape))

    code, _bitpix = struct.unpack_from("<hh", blob, 70)
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(f"{name}: unsupported datatype code {code}")
    dtype = DATATYPES[code]
    pixdim = struct.unpack_from("<8f", blob, 76)
    (vox_offset,) = struct.unpack_from("<f", blob, 108)
    slope, inter = struct.unpack_from("<ff", blob, 112)
    qform_code, sform_code = struct.unpack_from("<hh", blob, 252)
    quatern = struct.unpack_from("<6f", blob, 256)
    srow = tuple(struct.unpack_from("<4f", blob, 280 + 16 * i) for i in range(3))

    offset = int(vox_offset)
    if offset < HEADER_SIZE:
        raise NiftiError(f"{name}: vox_offset {vox_offset} lies inside the header")
    nbytes = int(np.prod(shape)) * dtype.itemsize
    if len(blob) < offset + nbytes:
        raise TruncatedPayloadError(
            f"{name}: truncated payload, expected {nbytes} bytes at offset {offset}, "
            f"found {max(0, len(blob) - offset)}"
        )
    data = np.frombuffer(blob, dtype=dtype, count=int(np.prod(shape)), offset=offset)
    data = data.reshape(shape, order="F").astype(dtype.newbyteorder("="))
    if slope != 0 and np.isfinite(slope) and not (slope == 1 and inter == 0):
        data = data.astype(np.float64) * slope + inter

    spacing = tuple(abs(p) if p != 0 else 1.0 for p in pixdim[1:4])
    qfac = pixdim[0] if pixdim[0] in (-1.0, 1.0) else 1.0
    orient = Orientation(qform_code, sform_code, tuple(quatern), srow, qfac)
    return Volume(data, spacing, orient)


def read_volume(path: PathLike) -> Volume:
    path = os.fspath(path)
    if path.endswith(".gz"):
        raise NiftiError(f"{path}: compressed NIfTI is not supported; gunzip it first")
    with open(path, "rb") as fh:
        blob = fh.read()
    return _parse_nifti(blob, path)


# ---------------------------------------------------------------------------
# model files


class ModelFileError(ValueError):
    pass


class ChecksumError(ModelFileError):
    pass


MODEL_MAGIC = b"FLXC"
MODEL_VERSION = 1


def _pack_pathway(pw: PathwayConfig) -> bytes:
    out = struct.pack("<I", pw.depth)
    for f, k in pw.banks:
        out += struct.pack("<II", f, k)
    return out


def model_bytes(net: Network) -> bytes:
    cfg = net.config
    body = bytearray(MODEL_MAGIC)
    body += struct.pack("<II", MODEL_VERSION, cfg.num_contrasts)
    body += _pack_pathway(cfg.contrast_pathway)
    body += _pack_pathway(cfg.fusion_pathway)
    body += struct.pack("<I", cfg.head_kernel)
    for p in net.parameters():
        body += np.ascontiguousarray(p, dtype="<f4").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    return bytes(body)


def save_model(net: Network, path: PathLike) -> None:
    """Write ``net`` (config included) as float32 little-endian blocks plus CRC32."""
    with open(path, "wb") as fh:
        fh.write(model_bytes(net))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob, self.pos = blob, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ModelFileError("model file truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def _read_pathway(r: _Reader) -> PathwayConfig:
    depth = r.u32()
    if not 1 <= depth <= 64:
        raise ModelFileError(f"implausible pathway depth {depth}")
    banks = tuple((r.u32(), r.u32()) for _ in range(depth))
    for f, k in banks:
        if not (1 <= f <= 4096 and 1 <= k <= 63):
            raise ModelFileError(f"implausible filter bank ({f} filters, kernel {k})")
    try:
        return PathwayConfig(banks)
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def parse_model(blob: bytes) -> Tuple[Network, NetworkConfig]:
    if len(blob) < 8 or blob[:4] != MODEL_MAGIC:
        raise ModelFileError("not a FLXC model file (bad magic)")
    (stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored:
        raise ChecksumError("model file checksum mismatch")
    r = _Reader(blob[:-4])
    r.take(4)
    version = r.u32()
    if version != MODEL_VERSION:
        raise ModelFileError(f"unsupported model file version {version} (expected {MODEL_VERSION})")
    num_contrasts = r.u32()
    contrast, fusion = _read_pathway(r), _read_pathway(r)
    try:
        cfg = NetworkConfig(num_contrasts, contrast, fusion, head_kernel=r.u32())
    except ValueError as exc:
        raise ModelFileError(f"invalid network configuration: {exc}") from exc
    template = build_network(cfg, seed=0)
    params = []
    for p in template.parameters():
        raw = r.take(p.size * 4)
        params.append(np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(p.shape))
    if r.pos != len(r.blob):
        raise ModelFileError(f"{len(r.blob) - r.pos} trailing bytes after parameters")
    return template.with_parameters(params), cfg


def load_model(path: PathLike) -> Tuple[Network, NetworkConfig]:
    with open(path, "rb") as fh:
        return parse_model(fh.read())
