"""File formats: delimited text series, the ``DOBS1`` binary container, WAV.

``DOBS1`` layout (all little-endian)::

    b"DOBS1"                 5-byte magic
    uint32                   length H of the JSON header in bytes
    H bytes                  UTF-8 JSON: {"version", "meta", "blocks"}
    f64 payload              blocks back to back, C order

Each entry of ``blocks`` is ``{"name", "shape", "offset"}`` with ``offset``
counted in f64 elements from the start of the payload. The header is dumped
with sorted keys so identical content gives identical bytes.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

MAGIC = b"DOBS1"
VERSION = 1


def write_dobs(path, blocks, meta=None):
    """Write named float arrays plus a JSON-able ``meta`` dict."""
    entries = []
    payload = []
    offset = 0
    for name, arr in blocks.items():
        shape = list(np.shape(arr))
        a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        entries.append({"name": name, "shape": shape, "offset": offset})
        payload.append(a.tobytes())
        offset += a.size
    header = json.dumps(
        {"version": VERSION, "meta": meta or {}, "blocks": entries},
        sort_keys=True,
        separators=(",", ":"),
        allow_nan=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for chunk in payload:
            fh.write(chunk)


def read_dobs(path):
    """Return ``(blocks, meta)``; rejects foreign magic and unknown versions."""
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise InvalidInputError(f"{path}: not a DOBS1 file")
    if len(raw) < 9:
        raise InvalidInputError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<I", raw[5:9])
    try:
        header = json.loads(raw[9 : 9 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"{path}: corrupt header ({exc})") from None
    if header.get("version") != VERSION:
        raise InvalidInputError(
            f"{path}: unsupported DOBS1 version {header.get('version')!r} (expected {VERSION})"
        )
    body = raw[9 + hlen :]
    data = np.frombuffer(body[: len(body) - len(body) % 8], dtype="<f8")
    blocks = {}
    for entry in header["blocks"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        if start + size > data.size:
            raise InvalidInputError(f"{path}: block {entry['name']!r} is truncated")
        blocks[entry["name"]] = data[start : start + size].reshape(entry["shape"]).copy()
    return blocks, header["meta"]


def write_csv(path, columns, header):
    """Write equally long 1-D columns with a header row, full float precision."""
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if np.isnan(v):
        return "nan"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def read_csv(path):
    """Return ``(header, table)`` for a numeric CSV written by :func:`write_csv`."""
    with open(path) as fh:
        first = fh.readline().strip()
        if not first:
            raise InvalidInputError(f"{path}: empty file")
        header = [h.strip() for h in first.split(",")]
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise InvalidInputError(f"{path}: {exc}") from None
    if table.size == 0:
        table = np.empty((0, len(header)))
    if table.shape[1] != len(header):
        raise InvalidInputError(f"{path}: {table.shape[1]} columns but {len(header)} names")
    return header, table


def write_series(path, t, values, prefix, meta=None):
    """Series as CSV (``t,<prefix>_1..``) or DOBS1, chosen by file suffix."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != len(t):
        values = values.T
    names = [f"{prefix}_{j + 1}" for j in range(values.shape[1])]
    if str(path).endswith(".dob"):
        write_dobs(path, {"t": t, prefix: values}, dict(meta or {}, columns=names))
    else:
        write_csv(path, [t] + list(values.T), ["t"] + names)


def read_series(path, exclude_prefixes=("theta",)):
    """Load ``(t, values, names)`` from a series CSV or DOBS1 file.

    Value columns are every column except ``t`` and those starting with one of
    ``exclude_prefixes``.
    """
    if str(path).endswith(".dob"):
        blocks, meta = read_dobs(path)
        if "t" not in blocks:
            raise InvalidInputError(f"{path}: no time block")
        names = [k for k in blocks if k != "t" and not k.startswith(tuple(exclude_prefixes))]
        if len(names) != 1:
            raise InvalidInputError(f"{path}: expected a single value block, found {names}")
        values = np.atleast_2d(blocks[names[0]])
        return blocks["t"], values, meta.get("columns", names)
    header, table = read_csv(path)
    if "t" not in header:
        raise InvalidInputError(f"{path}: missing 't' column")
    keep = [i for i, h in enumerate(header) if h != "t" and not h.startswith(tuple(exclude_prefixes))]
    if not keep:
        raise InvalidInputError(f"{path}: no value columns")
    return table[:, header.index("t")], table[:, keep], [header[i] for i in keep]


def read_wav(path):
    """Read a RIFF WAV file as ``(mono float signal, rate)``.

    Supports 16-bit PCM (scaled to [-1, 1)) and 32-bit IEEE float; stereo is
    averaged to mono.
    """
    from scipy.io import wavfile

    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise InvalidInputError(f"{path}: unsupported sample format {data.dtype}")
    if x.ndim == 2:
        if x.shape[1] > 2:
            raise InvalidInputError(f"{path}: {x.shape[1]} channels; mono or stereo only")
        x = x.mean(axis=1)
    return x, int(rate)


def write_wav(path, signal, rate, fmt="pcm16"):
    from scipy.io import wavfile

    x = np.asarray(signal, dtype=float)
    if fmt == "pcm16":
        data = np.clip(np.round(x * 32767.0), -32768, 32767).astype("<i2")
    elif fmt == "float32":
        data = x.astype("<f4")
    else:
        raise InvalidInputError(f"unknown WAV format {fmt!r}")
    wavfile.write(path, int(rate), data)


def array_digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
