"""CTC posterior matrices and their binary file format.

A posterior file is::

    b"CTCP"  u16 version (=1)  u32 T  u32 V  u32 blank_id  T*V float32

with every integer and float little-endian and values stored frame-major.
Values are natural-log probabilities.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

MAGIC = b"CTCP"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")

# admits float32 storage of log_softmax output
NORM_TOL = 1e-5


class PosteriorFormatError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class PosteriorMatrix:
    """``T x V`` grid of per-frame log-probabilities (the CTC output)."""

    values: np.ndarray
    blank_id: int = 0

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise ValueError(f"posterior matrix must be 2-D, got shape {values.shape}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_probs(cls, probs, blank_id: int = 0) -> "PosteriorMatrix":
        with np.errstate(divide="ignore"):
            return cls(np.log(np.asarray(probs, dtype=np.float64)), blank_id)

    @classmethod
    def from_logits(cls, logits, blank_id: int = 0) -> "PosteriorMatrix":
        """Apply log_softmax over the vocabulary axis."""
        logits = np.asarray(logits, dtype=np.float64)
        m = logits.max(axis=1, keepdims=True)
        z = logits - m
        return cls(z - np.log(np.exp(z).sum(axis=1, keepdims=True)), blank_id)

    def argmax(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. ties go to the lowest index
        return np.argmax(self.values, axis=1)

    def blank_probs(self) -> np.ndarray:
        return np.exp(self.values[:, self.blank_id])

    def __eq__(self, other):
        if not isinstance(other, PosteriorMatrix):
            return NotImplemented
        return (self.blank_id == other.blank_id and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values, other.values)))

    __hash__ = None


@dataclass
class Violation:
    reason: str
    frame: Optional[int] = None
    index: Optional[int] = None

    def __str__(self):
        where = []
        if self.frame is not None:
            where.append(f"frame {self.frame}")
        if self.index is not None:
            where.append(f"index {self.index}")
        return f"{self.reason}" + (f" at {', '.join(where)}" if where else "")


def validate(m: PosteriorMatrix, tol: float = NORM_TOL) -> Optional[Violation]:
    """Return ``None`` if ``m`` is a valid posterior, else the first violation."""
    v = m.values
    if not 0 <= m.blank_id < m.vocab_size:
        return Violation(f"blank_id {m.blank_id} outside vocabulary of size {m.vocab_size}")
    bad = ~np.isfinite(v) | (v > 0)
    if bad.any():
        t, k = map(int, np.argwhere(bad)[0])
        kind = "non-finite value" if not np.isfinite(v[t, k]) else "positive log-probability"
        return Violation(kind, t, k)
    if v.shape[0]:
        lse = log_sum_exp_rows(v)
        off = np.flatnonzero(np.abs(lse) > tol)
        if off.size:
            t = int(off[0])
            return Violation(f"row log-sum-exp is {lse[t]:.3g}, not 0", t)
    return None


def write_posteriors(m: PosteriorMatrix) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, m.num_frames, m.vocab_size, m.blank_id)
    return header + np.ascontiguousarray(m.values, dtype="<f4").tobytes()


def read_posteriors(data: bytes) -> PosteriorMatrix:
    if len(data) < _HEADER.size:
        raise PosteriorFormatError(f"truncated header: {len(data)} of {_HEADER.size} bytes",
                                   len(data))
    magic, version, t, v, blank = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise PosteriorFormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise PosteriorFormatError(f"unsupported version {version}", 4)
    if v == 0 or blank >= v:
        raise PosteriorFormatError(f"bad shape/blank: V={v}, blank_id={blank}", 10)
    need = _HEADER.size + 4 * t * v
    if len(data) != need:
        raise PosteriorFormatError(
            f"payload holds {(len(data) - _HEADER.size) / 4:g} values, expected {t * v}",
            min(len(data), need))
    values = np.frombuffer(data, dtype="<f4", count=t * v, offset=_HEADER.size)
    return PosteriorMatrix(values.reshape(t, v).astype(np.float32), int(blank))


def load(path) -> PosteriorMatrix:
    with open(path, "rb") as f:
        return read_posteriors(f.read())


def save(m: PosteriorMatrix, path) -> None:
    with open(path, "wb") as f:
        f.write(write_posteriors(m))


def log_sum_exp_rows(values: np.ndarray) -> np.ndarray:
    mx = values.max(axis=1)
    return mx + np.log(np.exp(values - mx[:, None]).sum(axis=1))


def renormalize(values: np.ndarray) -> np.ndarray:
    """Shift each row so it log-sums to exactly 0."""
    return values - log_sum_exp_rows(values)[:, None]

