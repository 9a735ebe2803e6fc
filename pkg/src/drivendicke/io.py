"""Deterministic file output and a versioned binary cache.

The CSV writers in this module produce byte-identical files for identical
inputs: floats are rendered in shortest round-trip form, negative zero is
normalized, booleans are lowercase, and the newline is fixed.  All writes go
through a temp-file-plus-rename so readers never observe a partial file.

Cache bundles are zip containers (numpy .npz) carrying an explicit format
version, a JSON metadata blob, and arrays forced to little-endian 64-bit
layouts, so a reload reproduces every array bit for bit on any host.
"""

from __future__ import annotations

import json
import os
import tempfile
import zipfile

import numpy as np

from .dissipator import DissipatorData
from .floquet import FloquetBasis

CACHE_FORMAT_VERSION = 1

_VERSION_KEY = "__cache_version__"
_META_KEY = "__meta__"


class CacheCorruption(RuntimeError):
    """The cache file exists but cannot be decoded as a valid bundle."""


class CacheVersionMismatch(RuntimeError):
    """The cache file has a different format version than this code."""

    def __init__(self, found, expected):
        super().__init__(
            "cache format version %r, expected %r" % (found, expected)
        )
        self.found = found
        self.expected = expected


def atomic_write_bytes(path, data):
    """Write bytes to path via a same-directory temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def format_cell(value):
    """Render one CSV cell deterministically.

    repr() of a Python float is the shortest string that round-trips, which
    makes the output stable across runs and platforms.  Negative zero is
    folded into plain zero so that sign noise from 0.0 * (-1) cannot flip a
    byte in the file.
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if x == 0.0:
            x = 0.0
        return repr(x)
    if isinstance(value, str):
        if "," in value or "\n" in value or '"' in value:
            raise ValueError("cell string needs quoting, which is not supported: %r" % value)
        return value
    raise TypeError("unsupported CSV cell type: %r" % type(value).__name__)


def write_csv(path, header, rows):
    """Write a CSV file atomically with deterministic formatting."""
    header = list(header)
    lines = [",".join(header)]
    for row in rows:
        row = tuple(row)
        if len(row) != len(header):
            raise ValueError(
                "row has %d cells, header has %d" % (len(row), len(header))
            )
        lines.append(",".join(format_cell(c) for c in row))
    text = "\n".join(lines) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj):
    """Write canonical JSON (sorted keys) atomically."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def _pack_array(name, arr):
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        out = np.ascontiguousarray(arr, dtype="<c16")
    elif arr.dtype.kind == "f":
        out = np.ascontiguousarray(arr, dtype="<f8")
    elif arr.dtype.kind in "iub":
        out = np.ascontiguousarray(arr, dtype="<i8")
    else:
        raise TypeError("array %r has unsupported dtype %r" % (name, arr.dtype))
    return out


def save_bundle(path, arrays, meta=None):
    """Save named arrays plus JSON metadata as one versioned container."""
    packed = {}
    for name, arr in arrays.items():
        if name.startswith("__"):
            raise ValueError("array name %r collides with reserved keys" % name)
        packed[name] = _pack_array(name, arr)
    packed[_VERSION_KEY] = np.array([CACHE_FORMAT_VERSION], dtype="<i8")
    blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    packed[_META_KEY] = np.frombuffer(blob, dtype=np.uint8).copy()

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".npz")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **packed)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load_bundle(path, required=()):
    """Load a bundle saved by save_bundle.

    Raises FileNotFoundError on a plain cache miss, CacheVersionMismatch if
    the container was written by a different format revision, and
    CacheCorruption for anything undecodable or missing required arrays.
    """
    try:
        with np.load(path, allow_pickle=False) as npz:
            names = set(npz.files)
            if _VERSION_KEY not in names:
                raise CacheCorruption("%s: missing version marker" % path)
            version = int(npz[_VERSION_KEY][0])
            if version != CACHE_FORMAT_VERSION:
                raise CacheVersionMismatch(version, CACHE_FORMAT_VERSION)
            missing = [k for k in required if k not in names]
            if missing:
                raise CacheCorruption(
                    "%s: missing arrays %s" % (path, ", ".join(missing))
                )
            arrays = {
                k: np.array(npz[k])
                for k in names
                if k not in (_VERSION_KEY, _META_KEY)
            }
            meta_raw = npz[_META_KEY].tobytes() if _META_KEY in names else b"{}"
    except FileNotFoundError:
        raise
    except (CacheCorruption, CacheVersionMismatch):
        raise
    except (zipfile.BadZipFile, ValueError, KeyError, OSError, EOFError) as exc:
        raise CacheCorruption("%s: %s" % (path, exc)) from exc
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CacheCorruption("%s: bad metadata blob (%s)" % (path, exc)) from exc
    return arrays, meta


def save_floquet_basis(path, basis):
    arrays = {
        "quasienergies": basis.quasienergies,
        "phi0": basis.phi0,
        "fourier_coeffs": basis.fourier_coeffs,
        "completeness": basis.completeness,
    }
    meta = {
        "kind": "floquet_basis",
        "omega_ref": float(basis.omega_ref),
        "driven": bool(basis.driven),
        "nu_max": int(basis.nu_max),
        "degenerate": bool(basis.degenerate),
    }
    save_bundle(path, arrays, meta)


def load_floquet_basis(path):
    required = ("quasienergies", "phi0", "fourier_coeffs", "completeness")
    arrays, meta = load_bundle(path, required=required)
    if meta.get("kind") != "floquet_basis":
        raise CacheCorruption("%s: not a floquet_basis bundle" % path)
    return FloquetBasis(
        omega_ref=float(meta["omega_ref"]),
        driven=bool(meta["driven"]),
        quasienergies=arrays["quasienergies"],
        phi0=arrays["phi0"],
        fourier_coeffs=arrays["fourier_coeffs"],
        nu_max=int(meta["nu_max"]),
        completeness=arrays["completeness"],
        degenerate=bool(meta["degenerate"]),
    )


def save_dissipator(path, data):
    tables = np.stack([np.asarray(t) for t in data.x_tables])
    arrays = {
        "x_tables": tables,
        "rate_matrix": data.rate_matrix,
        "coherence_coeffs": data.coherence_coeffs,
        "tail_fractions": np.array(data.tail_fractions, dtype=float),
    }
    meta = {"kind": "dissipator", "warnings": list(data.warnings)}
    save_bundle(path, arrays, meta)


def load_dissipator(path):
    required = ("x_tables", "rate_matrix", "coherence_coeffs", "tail_fractions")
    arrays, meta = load_bundle(path, required=required)
    if meta.get("kind") != "dissipator":
        raise CacheCorruption("%s: not a dissipator bundle" % path)
    return DissipatorData(
        x_tables=tuple(arrays["x_tables"]),
        rate_matrix=arrays["rate_matrix"],
        coherence_coeffs=arrays["coherence_coeffs"],
        tail_fractions=tuple(float(t) for t in arrays["tail_fractions"]),
        warnings=tuple(meta.get("warnings", ())),
    )
