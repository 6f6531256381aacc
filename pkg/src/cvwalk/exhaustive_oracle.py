"""Exact verification of the transform's distributional identities.

All 2^n equally weighted n-step paths are enumerated (streamed in chunks,
vectorized across rows) and counted exactly; nothing here is statistical.
The five checks cover: two-to-one measure preservation, injectivity of the
sign code, exact prefix/image independence factorization, the reflection
bound |Y_k - |S_k|| <= 2, and the identity between sign-change times and
first hits of the even negative levels by the transformed path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .walk_core import IncrementPath, format_path_text

__all__ = [
    "MAX_ENUM_N",
    "MAX_INDEP_N",
    "CountTable",
    "CheckReport",
    "enumerate_paths",
    "check_measure_preserving",
    "check_bijection",
    "check_independence",
    "check_reflection_bound",
    "check_tau_identity",
    "run_checks",
]

MAX_ENUM_N = 24
MAX_INDEP_N = 20
_CHUNK_BITS = 16


@dataclass
class CountTable:
    """Exact counts of outcome tuples; totals are powers of two by design."""

    counts: dict[tuple, int] = field(default_factory=dict)

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be nonnegative")

    @classmethod
    def from_pairs(cls, pairs) -> "CountTable":
        counts: dict[tuple, int] = {}
        for a, b in pairs:
            key = (a, b)
            counts[key] = counts.get(key, 0) + 1
        return cls(counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class CheckReport:
    """Outcome of one exact check: pass flag, attained deviation, and the
    first counterexample found (as path text) plus aggregate counts."""

    check: str
    n: int
    h: int | None
    passed: bool
    max_deviation: float | None = None
    counterexample: str | None = None
    counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "n": self.n,
            "h": self.h,
            "pass": self.passed,
            "max_deviation": self.max_deviation,
            "counterexample": self.counterexample,
        }


def _require_n(n: int, cap: int) -> None:
    if not 1 <= n <= cap:
        raise ValueError(f"n must be in [1, {cap}], got {n}")


def _step_chunks(n: int) -> Iterator[np.ndarray]:
    """Yield (rows, n) +-1 matrices covering all 2^n paths in lexicographic
    order with '-' < '+' (row g encodes g's binary digits, MSB first)."""
    total = 1 << n
    chunk = 1 << min(_CHUNK_BITS, n)
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    for start in range(0, total, chunk):
        g = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = (g[:, None] >> shifts[None, :]) & 1
        yield (2 * bits.astype(np.int8) - 1)


def enumerate_paths(n: int) -> Iterator[IncrementPath]:
    """Stream all 2^n paths of length n in lexicographic order."""
    if not 0 <= n <= MAX_ENUM_N:
        raise ValueError(f"n must be in [0, {MAX_ENUM_N}], got {n}")
    if n == 0:
        yield IncrementPath([])
        return
    for chunk in _step_chunks(n):
        for row in chunk:
            yield IncrementPath(row)


def _positions_rows(steps: np.ndarray) -> np.ndarray:
    """Row-wise positions including the leading zero column."""
    rows, n = steps.shape
    pos = np.zeros((rows, n + 1), dtype=np.int64)
    np.cumsum(steps, axis=1, out=pos[:, 1:])
    return pos


def _transform_rows(steps: np.ndarray) -> np.ndarray:
    """Row-wise transform: sign of the half-integer midpoint times the next
    step. Input (rows, n), output (rows, n-1)."""
    pos = _positions_rows(steps)
    mid2 = pos[:, :-2] + pos[:, 1:-1]
    return np.where(mid2 > 0, steps[:, 1:], -steps[:, 1:]).astype(np.int8)


def _pack_rows(steps: np.ndarray) -> np.ndarray:
    """Row-wise packing of +-1 entries into integers (MSB-first, + = 1)."""
    rows, m = steps.shape
    if m == 0:
        return np.zeros(rows, dtype=np.int64)
    weights = (1 << np.arange(m - 1, -1, -1)).astype(np.int64)
    bits = ((steps + 1) // 2).astype(np.int64)
    return bits @ weights


def _unpack_text(key: int, m: int) -> str:
    return "".join("+" if (key >> (m - 1 - i)) & 1 else "-" for i in range(m))


def check_measure_preserving(n: int) -> CheckReport:
    """Every (n-1)-step path must be hit exactly twice by the transform."""
    _require_n(n, MAX_ENUM_N)
    counts = np.zeros(1 << (n - 1), dtype=np.int64)
    for chunk in _step_chunks(n):
        keys = _pack_rows(_transform_rows(chunk))
        counts += np.bincount(keys, minlength=counts.size)
    bad = np.nonzero(counts != 2)[0]
    passed = bad.size == 0
    report = CheckReport(
        check="measure_preserving",
        n=n,
        h=None,
        passed=passed,
        max_deviation=float(np.abs(counts - 2).max()),
        counts={"outputs": counts.size, "min_count": int(counts.min()), "max_count": int(counts.max())},
    )
    if not passed:
        key = int(bad[0])
        report.counterexample = f"output {_unpack_text(key, n - 1)!r} hit {int(counts[key])} times"
    return report


def check_bijection(n: int) -> CheckReport:
    """The sign code restricted to n-step paths must be injective (hence onto
    all 2^n codes)."""
    _require_n(n, MAX_ENUM_N)
    counts = np.zeros(1 << n, dtype=np.int64)
    for chunk in _step_chunks(n):
        m = chunk
        code = np.empty_like(chunk)
        for k in range(n):
            code[:, k] = m[:, 0]
            m = _transform_rows(m)
        counts += np.bincount(_pack_rows(code), minlength=counts.size)
    bad = np.nonzero(counts != 1)[0]
    passed = bad.size == 0
    report = CheckReport(
        check="bijection",
        n=n,
        h=None,
        passed=passed,
        max_deviation=float(np.abs(counts - 1).max()),
        counts={"codes": counts.size, "min_count": int(counts.min()), "max_count": int(counts.max())},
    )
    if not passed:
        key = int(bad[0])
        report.counterexample = f"code {_unpack_text(key, n)!r} produced {int(counts[key])} times"
    return report


def check_independence(n: int, h: int) -> CheckReport:
    """Exact factorization: every (length-h prefix, h-fold image) pair must
    occur exactly once among the 2^n paths."""
    if not 0 <= h < n:
        raise ValueError(f"need 0 <= h < n, got h={h}, n={n}")
    _require_n(n, MAX_INDEP_N)
    counts = np.zeros(1 << n, dtype=np.int64)
    for chunk in _step_chunks(n):
        prefix_keys = _pack_rows(chunk[:, :h])
        m = chunk
        for _ in range(h):
            m = _transform_rows(m)
        image_keys = _pack_rows(m)
        counts += np.bincount((prefix_keys << (n - h)) + image_keys, minlength=counts.size)
    bad = np.nonzero(counts != 1)[0]
    passed = bad.size == 0
    report = CheckReport(
        check="independence",
        n=n,
        h=h,
        passed=passed,
        max_deviation=float(np.abs(counts - 1).max()),
        counts={"cells": counts.size, "min_count": int(counts.min()), "max_count": int(counts.max())},
    )
    if not passed:
        key = int(bad[0])
        prefix = _unpack_text(key >> (n - h), h)
        image = _unpack_text(key & ((1 << (n - h)) - 1), n - h)
        report.counterexample = f"(prefix {prefix!r}, image {image!r}) occurred {int(counts[key])} times"
    return report


def check_reflection_bound(n: int) -> CheckReport:
    """max_k |Y_k - |S_k|| over all paths, where Y is the transformed path
    minus its running minimum; the bound is 2."""
    _require_n(n, MAX_ENUM_N)
    max_dev = 0
    counterexample = None
    for chunk in _step_chunks(n):
        pos = _positions_rows(chunk)
        tpos = _positions_rows(_transform_rows(chunk))
        y = tpos - np.minimum.accumulate(tpos, axis=1)
        dev = np.abs(y - np.abs(pos[:, :n]))
        chunk_max = int(dev.max())
        if chunk_max > max_dev:
            max_dev = chunk_max
            if chunk_max > 2 and counterexample is None:
                r = int(np.nonzero((dev == chunk_max).any(axis=1))[0][0])
                counterexample = format_path_text(IncrementPath(chunk[r]))
    return CheckReport(
        check="reflection_bound",
        n=n,
        h=None,
        passed=max_dev <= 2,
        max_deviation=float(max_dev),
        counterexample=counterexample,
        counts={"paths": 1 << n},
    )


def check_tau_identity(n: int) -> CheckReport:
    """The l-th sign-change time must equal the first index at which the
    transformed path hits -2l, for every realized l, on every path."""
    _require_n(n, MAX_ENUM_N)
    mismatches = 0
    counterexample = None
    for chunk in _step_chunks(n):
        pos = _positions_rows(chunk)
        tpos = _positions_rows(_transform_rows(chunk))
        # crossing count per row, cumulative over i = 1..n-1
        if n >= 2:
            crossing = pos[:, :-2] * pos[:, 2:] < 0
            cum = np.cumsum(crossing, axis=1)
            total = cum[:, -1]
        else:
            cum = np.zeros((chunk.shape[0], 0), dtype=np.int64)
            total = np.zeros(chunk.shape[0], dtype=np.int64)
        lmax = int((-tpos.min()) // 2) if tpos.size else 0
        bad = np.zeros(chunk.shape[0], dtype=bool)
        # l = 0 is tau_0 = 0 and T(S)_0 = 0, always consistent; start at 1.
        for l in range(1, lmax + 1):
            hit_mask = tpos == -2 * l
            has_hit = hit_mask.any(axis=1)
            first_hit = np.argmax(hit_mask, axis=1)
            has_tau = total >= l
            first_tau = np.argmax(cum >= l, axis=1) + 1
            bad |= has_hit != has_tau
            both = has_hit & has_tau
            bad |= both & (first_hit != first_tau)
        if bad.any():
            mismatches += int(bad.sum())
            if counterexample is None:
                r = int(np.nonzero(bad)[0][0])
                counterexample = format_path_text(IncrementPath(chunk[r]))
    return CheckReport(
        check="tau_identity",
        n=n,
        h=None,
        passed=mismatches == 0,
        max_deviation=float(mismatches),
        counterexample=counterexample,
        counts={"paths": 1 << n, "mismatches": mismatches},
    )


def run_checks(n: int, h: int | None = None, checks: list[str] | None = None) -> list[CheckReport]:
    """Run the named checks at size n.

    For "independence": a given h runs that single h; otherwise every
    h in [0, min(6, n-1)] is run.
    """
    names = checks if checks is not None else [
        "measure_preserving",
        "bijection",
        "independence",
        "reflection_bound",
        "tau_identity",
    ]
    reports = []
    for name in names:
        if name == "measure_preserving":
            reports.append(check_measure_preserving(n))
        elif name == "bijection":
            reports.append(check_bijection(n))
        elif name == "independence":
            hs = [h] if h is not None else list(range(0, min(6, n - 1) + 1))
            for hh in hs:
                reports.append(check_independence(n, hh))
        elif name == "reflection_bound":
            reports.append(check_reflection_bound(n))
        elif name == "tau_identity":
            reports.append(check_tau_identity(n))
        else:
            raise ValueError(f"unknown check {name!r}")
    return reports
