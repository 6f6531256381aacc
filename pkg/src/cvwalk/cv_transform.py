"""The Csaki-Vincze walk transform, its inverse, and the sign-code bijection.

The transform maps an n-step +-1 walk to an (n-1)-step walk. Two equivalent
constructions are implemented:

* the half-integer sign form, step j of the output being
  sign(S_{j-1/2}) * (S_{j+1} - S_j), used as the fast vectorized path;
* the block form over sign-change times tau_l, where step j equals
  (-1)^l * X_1 * X_{j+1} on tau_l + 1 <= j <= tau_{l+1}, kept as the
  readable reference and cross-checked against the fast form in tests.

Each application discards exactly one bit (the first step); collecting the
first steps of all iterates gives a code that determines the path uniquely,
realized here by `encode` and the triangular `decode`.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .walk_core import IncrementPath

__all__ = [
    "SignCode",
    "TauSequence",
    "transform",
    "transform_block_form",
    "iterate",
    "tau_times",
    "reflected",
    "inverse_step",
    "encode",
    "decode",
    "parse_code_text",
    "format_code_text",
]


class SignCode:
    """Sequence (T^k(S)_1)_k of first steps of the iterated transforms.

    Codes of length n are in bijection with n-step paths.
    """

    __slots__ = ("_code",)

    def __init__(self, code):
        arr = np.asarray(code, dtype=np.int8)
        if arr.ndim != 1:
            raise ValueError("code must be one-dimensional")
        if arr.size and not np.all((arr == 1) | (arr == -1)):
            raise ValueError("every code entry must be +1 or -1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "_code", arr)

    @property
    def code(self) -> np.ndarray:
        return self._code

    def __len__(self) -> int:
        return len(self._code)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignCode):
            return NotImplemented
        return np.array_equal(self._code, other._code)

    def __hash__(self):
        return hash(self._code.tobytes())

    def __repr__(self) -> str:
        return f"SignCode({format_code_text(self)!r})"

    def __setattr__(self, name, value):
        raise AttributeError("SignCode is immutable")


@dataclass(frozen=True)
class TauSequence:
    """Sign-change times tau_0 = 0 < tau_1 < ... realized within the path.

    tau_{l+1} is the first i > tau_l with S_{i-1} * S_{i+1} < 0; times whose
    defining minimum falls beyond the path end are simply absent.
    """

    taus: tuple[int, ...]

    def __post_init__(self):
        if not self.taus or self.taus[0] != 0:
            raise ValueError("tau_0 = 0 must be present")
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise ValueError("taus must be strictly increasing")

    def __len__(self) -> int:
        return len(self.taus)

    def __getitem__(self, l: int) -> int:
        return self.taus[l]


def transform(path: IncrementPath) -> IncrementPath:
    """Apply the transform once; the output has one step fewer.

    A length-1 input maps to the empty path. Empty input is rejected.
    """
    n = len(path)
    if n == 0:
        raise ValueError("cannot transform an empty path")
    pos = path.positions()
    mid2 = pos[:-1] + pos[1:]
    out = np.where(mid2[: n - 1] > 0, path.steps[1:], -path.steps[1:])
    return IncrementPath(out.astype(np.int8))


def transform_block_form(path: IncrementPath) -> IncrementPath:
    """Reference construction via the sign-change times.

    Step j of the output is (-1)^l * X_1 * X_{j+1} where l counts the tau
    values in [1, j-1]. Slower than `transform` but a direct transcription
    of the defining recurrence.
    """
    n = len(path)
    if n == 0:
        raise ValueError("cannot transform an empty path")
    steps = path.steps
    taus = tau_times(path).taus
    x1 = int(steps[0])
    out = np.empty(n - 1, dtype=np.int8)
    for j in range(1, n):
        l = bisect_right(taus, j - 1) - 1
        out[j - 1] = (1 if l % 2 == 0 else -1) * x1 * int(steps[j])
    return IncrementPath(out)


def iterate(path: IncrementPath, h: int) -> IncrementPath:
    """h-fold transform; h = 0 is the identity. Requires h <= length."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h > len(path):
        raise ValueError(f"cannot iterate {h} times on a path of length {len(path)}")
    if h == 0:
        return path
    return IncrementPath(_kernels.iterate_cv(path.steps, h))


def tau_times(path: IncrementPath) -> TauSequence:
    """All sign-change times realized within the path, starting at tau_0 = 0."""
    pos = path.positions()
    n = len(path)
    if n >= 2:
        crossings = np.nonzero(pos[:-2] * pos[2:] < 0)[0] + 1
    else:
        crossings = np.empty(0, dtype=np.int64)
    return TauSequence((0, *map(int, crossings)))


def reflected(tpath: IncrementPath) -> np.ndarray:
    """Positions minus their running minimum; entrywise nonnegative."""
    pos = tpath.positions()
    return pos - np.minimum.accumulate(pos)


def inverse_step(tpath: IncrementPath, s1: int) -> IncrementPath:
    """The unique path P with first step s1 and transform(P) = tpath.

    Total: every (tpath, s1) pair has exactly one preimage.
    """
    if s1 not in (1, -1):
        raise ValueError("s1 must be +1 or -1")
    m = len(tpath)
    out = np.empty(m + 1, dtype=np.int8)
    _kernels.inverse_pass(tpath.steps, m, np.int8(s1), out)
    return IncrementPath(out)


def encode(path: IncrementPath) -> SignCode:
    """Code entry k is the first step of the k-th iterated transform."""
    return SignCode(_kernels.encode_signs(path.steps))


def decode(code: SignCode) -> IncrementPath:
    """Invert `encode` by growing the path one inverse step at a time."""
    return IncrementPath(_kernels.decode_signs(code.code))


def parse_code_text(text: str) -> SignCode:
    """Parse a '+'/'-' string into a sign code (same format as paths)."""
    if text.endswith("\n"):
        text = text[:-1]
    bad = set(text) - {"+", "-"}
    if bad:
        raise ValueError(f"invalid code characters: {sorted(bad)!r}")
    entries = np.fromiter((1 if c == "+" else -1 for c in text), dtype=np.int8, count=len(text))
    return SignCode(entries)


def format_code_text(code: SignCode) -> str:
    lookup = np.array(["-", "+"])
    return "".join(lookup[(code.code + 1) // 2])
