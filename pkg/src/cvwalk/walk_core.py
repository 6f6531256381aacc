"""Simple random walk paths: representation, sampling, interpolation, rescaling.

A path is stored as its +-1 increments; positions are the prefix sums
starting at 0. All values are immutable after construction, so they are safe
to share across threads and to cache.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IncrementPath",
    "RngSpec",
    "sample_srw",
    "position",
    "interpolate",
    "interpolate_many",
    "sign_at_half",
    "scaled_eval",
    "scaled_eval_many",
    "parse_path_text",
    "format_path_text",
    "read_path_text",
    "write_path_text",
    "read_path_binary",
    "write_path_binary",
]


class IncrementPath:
    """A finite simple-random-walk path, stored as a sequence of +-1 steps.

    Positions S_0..S_n are derived from the steps (S_0 = 0) and cached on
    first use. Instances are immutable.
    """

    __slots__ = ("_steps", "_positions")

    def __init__(self, steps):
        arr = np.asarray(steps, dtype=np.int8)
        if arr.ndim != 1:
            raise ValueError("steps must be one-dimensional")
        if arr.size and not np.all((arr == 1) | (arr == -1)):
            raise ValueError("every step must be +1 or -1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "_steps", arr)
        object.__setattr__(self, "_positions", None)

    @property
    def steps(self) -> np.ndarray:
        """Read-only array of +-1 increments."""
        return self._steps

    def positions(self) -> np.ndarray:
        """Read-only array (S_0, ..., S_n) of partial sums, S_0 = 0."""
        if self._positions is None:
            pos = np.zeros(len(self._steps) + 1, dtype=np.int64)
            np.cumsum(self._steps, out=pos[1:])
            pos.flags.writeable = False
            object.__setattr__(self, "_positions", pos)
        return self._positions

    def __len__(self) -> int:
        return len(self._steps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IncrementPath):
            return NotImplemented
        return np.array_equal(self._steps, other._steps)

    def __hash__(self):
        return hash(self._steps.tobytes())

    def __repr__(self) -> str:
        if len(self) > 24:
            body = format_path_text(IncrementPath(self._steps[:24])) + "..."
        else:
            body = format_path_text(self)
        return f"IncrementPath({body!r}, n={len(self)})"

    def __setattr__(self, name, value):
        raise AttributeError("IncrementPath is immutable")


@dataclass(frozen=True)
class RngSpec:
    """Keyed random stream: (master_seed, stream_id) -> one PCG64 stream.

    The generator is fixed per release: numpy PCG64 seeded with
    SeedSequence([master_seed, stream_id]). Identical specs reproduce the
    same draws; distinct stream_ids give statistically independent streams.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.stream_id < 0:
            raise ValueError("stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        seed = np.random.SeedSequence([self.master_seed & (2**64 - 1), self.stream_id])
        return np.random.Generator(np.random.PCG64(seed))


def sample_srw(n_steps: int, rng: RngSpec) -> IncrementPath:
    """Draw a fair +-1 walk of n_steps steps, reproducible per RngSpec."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    gen = rng.generator()
    steps = (2 * gen.integers(0, 2, size=n_steps, dtype=np.int8) - 1).astype(np.int8)
    return IncrementPath(steps)


def position(path: IncrementPath, k: int) -> int:
    """S_k, the sum of the first k steps."""
    if not 0 <= k <= len(path):
        raise IndexError(f"index {k} out of range for path of length {len(path)}")
    return int(path.positions()[k])


def interpolate(path: IncrementPath, t: float) -> float:
    """Linear interpolation of positions at real time t in [0, n]."""
    n = len(path)
    if t < 0 or t > n:
        raise ValueError(f"t={t} outside path domain [0, {n}]")
    k = int(t)
    if k == n:
        return float(path.positions()[n])
    pos = path.positions()
    frac = t - k
    return float(pos[k]) + frac * float(pos[k + 1] - pos[k])


def interpolate_many(path: IncrementPath, ts: np.ndarray) -> np.ndarray:
    """Vectorized `interpolate` over an array of times."""
    ts = np.asarray(ts, dtype=np.float64)
    n = len(path)
    if ts.size and (ts.min() < 0 or ts.max() > n):
        raise ValueError("some t outside path domain")
    return np.interp(ts, np.arange(n + 1), path.positions().astype(np.float64))


def sign_at_half(path: IncrementPath, j: int) -> int:
    """Sign of the path at the half-integer time j - 1/2.

    The midpoint (S_{j-1} + S_j)/2 is an odd half-integer, never zero, so
    the result is always +-1.
    """
    if not 1 <= j <= len(path):
        raise IndexError(f"index {j} out of range for path of length {len(path)}")
    pos = path.positions()
    mid2 = int(pos[j - 1]) + int(pos[j])
    return 1 if mid2 > 0 else -1


def scaled_eval(path: IncrementPath, n: int, t: float) -> float:
    """Diffusive rescaling: interpolate(path, n*t) / sqrt(n).

    Requires n*t within the path domain.
    """
    if n <= 0:
        raise ValueError("scale n must be positive")
    nt = n * t
    if nt > len(path):
        raise ValueError(f"horizon exceeded: n*t={nt} > path length {len(path)}")
    return interpolate(path, nt) / np.sqrt(n)


def scaled_eval_many(path: IncrementPath, n: int, ts: np.ndarray) -> np.ndarray:
    """Vectorized `scaled_eval` over an array of times."""
    if n <= 0:
        raise ValueError("scale n must be positive")
    ts = np.asarray(ts, dtype=np.float64)
    nts = n * ts
    if nts.size and nts.max() > len(path):
        raise ValueError("horizon exceeded")
    return interpolate_many(path, nts) / np.sqrt(n)


# ---------------------------------------------------------------------------
# Text and binary formats
# ---------------------------------------------------------------------------

def parse_path_text(text: str) -> IncrementPath:
    """Parse a '+'/'-' string (one optional trailing newline) into a path."""
    if text.endswith("\n"):
        text = text[:-1]
    bad = set(text) - {"+", "-"}
    if bad:
        raise ValueError(f"invalid path characters: {sorted(bad)!r}")
    steps = np.fromiter((1 if c == "+" else -1 for c in text), dtype=np.int8, count=len(text))
    return IncrementPath(steps)


def format_path_text(path: IncrementPath) -> str:
    """Render a path as a '+'/'-' string (no newline)."""
    lookup = np.array(["-", "+"])
    return "".join(lookup[(path.steps + 1) // 2])


def read_path_text(file) -> IncrementPath:
    with open(file, "r", encoding="ascii") as fh:
        return parse_path_text(fh.read())


def write_path_text(path: IncrementPath, file) -> None:
    with open(file, "w", encoding="ascii") as fh:
        fh.write(format_path_text(path))
        fh.write("\n")


def write_path_binary(path: IncrementPath, file) -> None:
    """Binary layout: little-endian uint64 length, then packed step bits.

    Bit i (LSB-first within each byte) is 1 for a +1 step; the final byte is
    zero-padded.
    """
    bits = ((path.steps + 1) // 2).astype(np.uint8)
    packed = np.packbits(bits, bitorder="little")
    with open(file, "wb") as fh:
        fh.write(struct.pack("<Q", len(path)))
        fh.write(packed.tobytes())


def read_path_binary(file) -> IncrementPath:
    with open(file, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError("truncated path file: missing length header")
        (n,) = struct.unpack("<Q", header)
        payload = fh.read()
    expected = (n + 7) // 8
    if len(payload) != expected:
        raise ValueError(f"truncated path file: expected {expected} payload bytes, got {len(payload)}")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=n, bitorder="little")
    return IncrementPath(2 * bits.astype(np.int8) - 1)
