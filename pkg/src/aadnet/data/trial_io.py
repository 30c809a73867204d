"""The ``AADB`` single-trial binary format.

Layout (little-endian)::

    4s   magic "AADB"
    u32  version (1)
    f32  sampling rate
    u32  channel count C
    u32  sample count N
    u8   orientation label
    u8   timbre label
    u16  subject id length, followed by that many UTF-8 bytes
    u32  trial id
    f32  C*N samples, channel-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..exceptions import FormatError
from ..preprocess import TrialRecord

MAGIC = b"AADB"
VERSION = 1
_FIXED = struct.Struct("<4sIfIIBBH")
_TRIAL_ID = struct.Struct("<I")


def payload_bytes(n_channels, n_samples):
    return 4 * n_channels * n_samples


def encode_trial(trial):
    sid = trial.subject_id.encode("utf-8")
    if len(sid) > 0xFFFF:
        raise FormatError("subject id longer than 65535 bytes")
    c, n = trial.samples.shape
    head = _FIXED.pack(MAGIC, VERSION, float(trial.fs), c, n,
                       int(trial.label_oa), int(trial.label_ta), len(sid))
    body = np.ascontiguousarray(trial.samples, dtype="<f4").tobytes()
    return head + sid + _TRIAL_ID.pack(int(trial.trial_id)) + body


def decode_trial(buf):
    """Parse an ``AADB`` byte string; raises :class:`FormatError` with the failing offset."""
    buf = memoryview(buf)
    if len(buf) < _FIXED.size:
        raise FormatError(
            f"header truncated: need {_FIXED.size} bytes, file has {len(buf)}", len(buf)
        )
    magic, version, fs, c, n, oa, ta, sid_len = _FIXED.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {bytes(magic)!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if not np.isfinite(fs) or fs <= 0:
        raise FormatError(f"sampling rate must be positive, got {fs}", 8)
    if c < 1:
        raise FormatError("channel count must be >= 1", 12)
    if oa > 1:
        raise FormatError(f"orientation label must be 0 or 1, got {oa}", 20)
    if ta > 1:
        raise FormatError(f"timbre label must be 0 or 1, got {ta}", 21)
    pos = _FIXED.size
    if len(buf) < pos + sid_len + _TRIAL_ID.size:
        raise FormatError(
            f"subject id/trial id truncated: need {pos + sid_len + _TRIAL_ID.size} bytes, "
            f"file has {len(buf)}", len(buf)
        )
    try:
        subject_id = bytes(buf[pos : pos + sid_len]).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"subject id is not valid UTF-8: {exc.reason}", pos + exc.start) from None
    pos += sid_len
    (trial_id,) = _TRIAL_ID.unpack_from(buf, pos)
    pos += _TRIAL_ID.size
    expected = payload_bytes(c, n)
    actual = len(buf) - pos
    if actual != expected:
        kind = "truncated" if actual < expected else "has trailing bytes"
        raise FormatError(
            f"payload {kind}: header declares {expected} bytes ({c} x {n} float32), "
            f"found {actual}", pos
        )
    samples = np.frombuffer(buf, dtype="<f4", count=c * n, offset=pos).reshape(c, n)
    return TrialRecord(
        subject_id=subject_id,
        trial_id=int(trial_id),
        fs=float(fs),
        samples=samples.astype(np.float64),
        label_oa=int(oa),
        label_ta=int(ta),
    )


def save_trial(trial, path):
    path = Path(path)
    path.write_bytes(encode_trial(trial))
    return path


def load_trial(path):
    """Read a trial; samples come back as float64 holding the stored float32 values."""
    return decode_trial(Path(path).read_bytes())


def read_header(path):
    """Decode only the fixed header and ids; returns a dict without the samples."""
    with open(path, "rb") as fh:
        head = fh.read(_FIXED.size + 0xFFFF + _TRIAL_ID.size)
    if len(head) < _FIXED.size:
        raise FormatError(f"header truncated: need {_FIXED.size} bytes", len(head))
    magic, version, fs, c, n, oa, ta, sid_len = _FIXED.unpack_from(head, 0)
    if magic != MAGIC or version != VERSION:
        raise FormatError("not an AADB version 1 file", 0)
    pos = _FIXED.size
    if len(head) < pos + sid_len + _TRIAL_ID.size:
        raise FormatError("subject id/trial id truncated", len(head))
    sid = head[pos : pos + sid_len].decode("utf-8", errors="replace")
    (trial_id,) = _TRIAL_ID.unpack_from(head, pos + sid_len)
    return {"fs": fs, "n_channels": c, "n_samples": n, "label_oa": oa,
            "label_ta": ta, "subject_id": sid, "trial_id": trial_id}
