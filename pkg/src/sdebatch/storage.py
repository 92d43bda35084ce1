"""Trajectory store serialization, content hashing and run manifests.

Two store formats:

* CSV (default): header ``orbit,time,y0..y{n-1}``, one row per (orbit,
  sample), orbit-major then time-ordered.  Floats are written with
  ``repr``, the shortest digit string that round-trips the exact double.
* binary: magic bytes ``SDB1``, a little-endian uint64 length prefix, a
  UTF-8 JSON metadata block, then the sample times and the values as
  little-endian 64-bit floats in orbit-major, time-major, equation-minor
  order.

A run manifest (JSON) is written next to every output so a run can be
reproduced bit for bit from its recorded configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from datetime import datetime, timezone

import numpy as np

from .engine import EngineConfig, TrajectoryStore

__all__ = [
    "StoreFormatError", "store_hash",
    "write_store_csv", "read_store_csv", "write_store_bin", "read_store_bin",
    "write_store", "read_store", "build_manifest", "write_manifest", "read_manifest",
    "write_matrix_csv", "format_float",
]

_MAGIC = b"SDB1"


class StoreFormatError(IOError):
    """A store file that cannot be decoded."""


def format_float(x: float) -> str:
    """Shortest decimal digits that parse back to the exact double."""
    return repr(float(x))


def store_hash(store: TrajectoryStore) -> str:
    """SHA-256 over the store's shape, sample times and values."""
    digest = hashlib.sha256()
    digest.update(np.asarray(store.values.shape, dtype=np.int64).tobytes())
    digest.update(np.ascontiguousarray(store.times, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(store.values, dtype="<f8").tobytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# CSV

def write_store_csv(store: TrajectoryStore, path):
    columns = ["orbit", "time"] + ["y%d" % j for j in range(store.nequat)]
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(",".join(columns) + "\n")
        for orbit in range(store.orbits):
            for sample in range(store.samples):
                row = [str(orbit), format_float(store.times[sample])]
                row += [format_float(v) for v in store.values[orbit, sample]]
                out.write(",".join(row) + "\n")


def read_store_csv(path) -> TrajectoryStore:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        fields = header.split(",")
        if fields[:2] != ["orbit", "time"] or len(fields) < 3:
            raise StoreFormatError("%s: not a trajectory store CSV" % path)
        nequat = len(fields) - 2
        try:
            data = np.loadtxt(handle, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise StoreFormatError("%s: malformed trajectory store CSV (%s)" % (path, exc))
    if data.size == 0 or data.shape[1] != nequat + 2:
        raise StoreFormatError("%s: malformed trajectory store CSV" % path)
    orbit_col = data[:, 0].astype(np.int64)
    orbits = int(orbit_col.max()) + 1
    if data.shape[0] % orbits:
        raise StoreFormatError("%s: ragged trajectory store CSV" % path)
    samples = data.shape[0] // orbits
    if not np.array_equal(orbit_col, np.repeat(np.arange(orbits), samples)):
        raise StoreFormatError("%s: rows are not orbit-major ordered" % path)
    times = data[:samples, 1].copy()
    values = data[:, 2:].reshape(orbits, samples, nequat).copy()
    return TrajectoryStore(times=times, values=values)


def write_matrix_csv(path, header: list[str], rows):
    """Small helper for analysis/bench tables: floats via repr, rest via str."""
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(",".join(header) + "\n")
        for row in rows:
            rendered = [format_float(v) if isinstance(v, float) else str(v) for v in row]
            out.write(",".join(rendered) + "\n")


# ---------------------------------------------------------------------------
# Binary

def write_store_bin(store: TrajectoryStore, path, metadata: dict | None = None):
    meta = dict(metadata or {})
    meta.update({
        "orbits": store.orbits,
        "samples": store.samples,
        "nequat": store.nequat,
        "model": store.model_name,
    })
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as out:
        out.write(_MAGIC)
        out.write(struct.pack("<Q", len(blob)))
        out.write(blob)
        out.write(np.ascontiguousarray(store.times, dtype="<f8").tobytes())
        out.write(np.ascontiguousarray(store.values, dtype="<f8").tobytes())


def read_store_bin(path) -> TrajectoryStore:
    with open(path, "rb") as handle:
        magic = handle.read(4)
        if magic != _MAGIC:
            raise StoreFormatError("%s: bad magic bytes %r" % (path, magic))
        raw_len = handle.read(8)
        if len(raw_len) != 8:
            raise StoreFormatError("%s: truncated metadata length" % path)
        (meta_len,) = struct.unpack("<Q", raw_len)
        blob = handle.read(meta_len)
        if len(blob) != meta_len:
            raise StoreFormatError("%s: truncated metadata block" % path)
        try:
            meta = json.loads(blob.decode("utf-8"))
            orbits = int(meta["orbits"])
            samples = int(meta["samples"])
            nequat = int(meta["nequat"])
        except (ValueError, KeyError) as exc:
            raise StoreFormatError("%s: bad metadata block (%s)" % (path, exc))
        times = np.frombuffer(handle.read(samples * 8), dtype="<f8")
        values = np.frombuffer(handle.read(orbits * samples * nequat * 8), dtype="<f8")
        if times.size != samples or values.size != orbits * samples * nequat:
            raise StoreFormatError("%s: truncated data section" % path)
    return TrajectoryStore(
        times=times.astype(np.float64),
        values=values.reshape(orbits, samples, nequat).astype(np.float64),
        model_name=str(meta.get("model", "")),
    )


def write_store(store: TrajectoryStore, path, fmt: str = "csv",
                metadata: dict | None = None):
    if fmt == "csv":
        write_store_csv(store, path)
    elif fmt == "bin":
        write_store_bin(store, path, metadata)
    else:
        raise ValueError("unknown store format %r" % fmt)


def read_store(path) -> TrajectoryStore:
    """Read a store in either format, sniffing the magic bytes."""
    with open(path, "rb") as handle:
        magic = handle.read(4)
    if magic == _MAGIC:
        return read_store_bin(path)
    return read_store_csv(path)


# ---------------------------------------------------------------------------
# Run manifests

def build_manifest(command: str, args: dict, config: EngineConfig | None,
                   model_source: str, inputs: dict, outputs: dict,
                   store_sha256: str | None = None, extra: dict | None = None) -> dict:
    """Everything needed to reproduce a run, plus a creation timestamp.

    The ``created`` field is the only part that varies between identical
    runs; data outputs themselves are deterministic.
    """
    from . import __version__
    manifest = {
        "tool": "sdebatch",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "args": args,
        "model": model_source,
        "inputs": inputs,
        "outputs": outputs,
    }
    if config is not None:
        manifest["config"] = dataclasses.asdict(config)
    if store_sha256 is not None:
        manifest["store_sha256"] = store_sha256
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(manifest: dict, path):
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        json.dump(manifest, out, indent=2, sort_keys=True)
        out.write("\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
