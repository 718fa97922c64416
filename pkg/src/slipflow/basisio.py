"""Binary containers for bases, convection tensors and stiffness matrices.

The layouts are deliberately boring: an 8-byte magic, little-endian uint64
sizes, a canonical JSON header where one is needed, then raw float64 arrays in
C order.  Nothing in a file depends on wall time or dict iteration order, so
byte-identical inputs produce byte-identical files and the sha256 of the basis
payload can serve as a provenance key in run manifests.
"""
from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .basis import BasisMode, BasisSet
from .domain import Slab, Torus, slab_grid, torus_grid
from .errors import BasisFormatError

BASIS_MAGIC = b"SLIPBAS1"
TENSOR_MAGIC = b"SLIPTEN1"
MATRIX_MAGIC = b"SLIPMAT1"
FORMAT_VERSION = 1


def _canon_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _array_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


# ---------------------------------------------------------------------------
# basis container


def serialize_basis(basis: BasisSet) -> bytes:
    """Encode domain, grid sizing and mode payloads as one byte string."""
    domain = basis.domain
    is_torus = isinstance(domain, Torus)
    header = {
        "format_version": FORMAT_VERSION,
        "geometry": "torus" if is_torus else "slab",
        "num_modes": basis.num_modes,
        "grid": {"counts": list(basis.grid.counts),
                 "oversample": basis.grid.oversample},
        "modes": [],
    }
    if is_torus:
        header["domain"] = {"lengths": list(domain.lengths)}
        arrays = [
            ("kappa", np.stack([m.kappa for m in basis.modes])),
            ("amp_cos", np.stack([m.amp_cos for m in basis.modes])),
            ("amp_sin", np.stack([m.amp_sin for m in basis.modes])),
        ]
    else:
        header["domain"] = {"lengths": list(domain.lengths),
                            "half_height": domain.half_height,
                            "friction": domain.friction}
        header["profile_ncoef"] = basis.profile_ncoef
        arrays = [
            ("kxy", np.stack([m.kxy for m in basis.modes])),
            ("cos_prof", np.stack([m.cos_prof for m in basis.modes])),
            ("sin_prof", np.stack([m.sin_prof for m in basis.modes])),
        ]
    for m in basis.modes:
        header["modes"].append({
            "index": m.index,
            "wavevector": list(m.wavevector),
            "family": m.family,
            "phase": m.phase,
            "vertical_index": m.vertical_index,
            "h1_energy": m.h1_energy,
            "boundary_energy": m.boundary_energy,
            "vertical_eigenvalue": m.vertical_eigenvalue,
        })
    header["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]

    hjson = _canon_json(header)
    parts = [BASIS_MAGIC, struct.pack("<Q", len(hjson)), hjson]
    parts.extend(_array_bytes(a) for _, a in arrays)
    return b"".join(parts)


def basis_hash(basis: BasisSet) -> str:
    """sha256 hex digest of the serialized basis."""
    return hashlib.sha256(serialize_basis(basis)).hexdigest()


def save_basis(basis: BasisSet, path) -> str:
    """Write the basis container; returns its sha256 hex digest."""
    blob = serialize_basis(basis)
    with open(path, "wb") as fh:
        fh.write(blob)
    return hashlib.sha256(blob).hexdigest()


def _take(buf: bytes, offset: int, n: int, what: str) -> tuple[bytes, int]:
    if offset + n > len(buf):
        raise BasisFormatError(f"truncated file while reading {what}")
    return buf[offset:offset + n], offset + n


def deserialize_basis(blob: bytes) -> BasisSet:
    """Rebuild a BasisSet (including its quadrature cache) from bytes."""
    from . import basis as basismod

    raw, off = _take(blob, 0, 8, "magic")
    if raw != BASIS_MAGIC:
        raise BasisFormatError(f"bad magic {raw!r}, expected {BASIS_MAGIC!r}")
    raw, off = _take(blob, off, 8, "header length")
    (hlen,) = struct.unpack("<Q", raw)
    raw, off = _take(blob, off, hlen, "header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BasisFormatError(f"unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise BasisFormatError(
            f"unsupported format_version {header.get('format_version')!r}")

    geometry = header.get("geometry")
    arrays = {}
    for spec in header.get("arrays", []):
        shape = tuple(spec["shape"])
        nbytes = 8 * int(np.prod(shape))
        raw, off = _take(blob, off, nbytes, f"array {spec['name']}")
        arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if off != len(blob):
        raise BasisFormatError(f"{len(blob) - off} trailing bytes after arrays")

    meta = header["modes"]
    if geometry == "torus":
        domain = Torus(lengths=tuple(header["domain"]["lengths"]))
        needed = ("kappa", "amp_cos", "amp_sin")
    elif geometry == "slab":
        d = header["domain"]
        domain = Slab(lengths=tuple(d["lengths"]), half_height=d["half_height"],
                      friction=d["friction"])
        needed = ("kxy", "cos_prof", "sin_prof")
    else:
        raise BasisFormatError(f"unknown geometry {geometry!r}")
    for name in needed:
        if name not in arrays:
            raise BasisFormatError(f"missing array {name!r}")
        if arrays[name].shape[0] != len(meta):
            raise BasisFormatError(
                f"array {name!r} has {arrays[name].shape[0]} rows for {len(meta)} modes")

    modes = []
    for i, md in enumerate(meta):
        common = dict(
            index=md["index"], geometry=geometry,
            wavevector=tuple(md["wavevector"]), family=md["family"],
            phase=md["phase"], vertical_index=md["vertical_index"],
            h1_energy=md["h1_energy"], boundary_energy=md["boundary_energy"],
            vertical_eigenvalue=md["vertical_eigenvalue"],
        )
        if geometry == "torus":
            modes.append(BasisMode(**common, kappa=arrays["kappa"][i],
                                   amp_cos=arrays["amp_cos"][i],
                                   amp_sin=arrays["amp_sin"][i]))
        else:
            modes.append(BasisMode(**common, kxy=arrays["kxy"][i],
                                   cos_prof=arrays["cos_prof"][i],
                                   sin_prof=arrays["sin_prof"][i]))

    counts = tuple(header["grid"]["counts"])
    oversample = header["grid"]["oversample"]
    if geometry == "torus":
        grid = torus_grid(domain, counts, oversample)
    else:
        grid = slab_grid(domain, counts, oversample)
    return basismod.assemble_cache(domain, grid, modes,
                                   profile_ncoef=header.get("profile_ncoef"))


def load_basis(path) -> BasisSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    return deserialize_basis(blob)


# ---------------------------------------------------------------------------
# dense arrays


def save_tensor(tensor: np.ndarray, path) -> None:
    """Write a rank-3 convection tensor."""
    t = np.asarray(tensor, dtype=float)
    if t.ndim != 3:
        raise ValueError(f"expected a rank-3 array, got shape {t.shape}")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<QQQ", *t.shape))
        fh.write(_array_bytes(t))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    raw, off = _take(blob, 0, 8, "magic")
    if raw != TENSOR_MAGIC:
        raise BasisFormatError(f"bad magic {raw!r}, expected {TENSOR_MAGIC!r}")
    raw, off = _take(blob, off, 24, "dims")
    shape = struct.unpack("<QQQ", raw)
    raw, off = _take(blob, off, 8 * int(np.prod(shape)), "tensor data")
    if off != len(blob):
        raise BasisFormatError(f"{len(blob) - off} trailing bytes in tensor file")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def save_matrix(matrix: np.ndarray, path) -> None:
    """Write a dense matrix (stiffness or gram)."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", *a.shape))
        fh.write(_array_bytes(a))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    raw, off = _take(blob, 0, 8, "magic")
    if raw != MATRIX_MAGIC:
        raise BasisFormatError(f"bad magic {raw!r}, expected {MATRIX_MAGIC!r}")
    raw, off = _take(blob, off, 16, "dims")
    shape = struct.unpack("<QQ", raw)
    raw, off = _take(blob, off, 8 * int(np.prod(shape)), "matrix data")
    if off != len(blob):
        raise BasisFormatError(f"{len(blob) - off} trailing bytes in matrix file")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
