"""Monte Carlo harnesses: scaling-limit coupling error, independence of
separated iterates, hitting-time regimes, and the sign-product martingale
representation, plus the statistical helpers they report through.

Reproducibility contract: replicate r of an experiment uses the stream
(master_seed, r), so records depend only on the config, never on worker
scheduling; CSV output is byte-identical across runs. Records that cannot
be computed (embedded walk too short for the requested (n, h)) are emitted
with valid=False rather than dropped, so long batches never lose work.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, asdict

import numpy as np
from scipy import stats as _stats

from .exhaustive_oracle import CountTable
from .walk_core import IncrementPath, RngSpec, sample_srw, scaled_eval, scaled_eval_many
from .cv_transform import iterate, transform
from .brownian_lab import (
    BrownianGrid,
    embed_walk,
    iterate_levy,
    levy_transform_grid,
    sample_brownian,
)

__all__ = [
    "ExperimentConfig",
    "ResultRecord",
    "ErrorTable",
    "run_limit_experiment",
    "run_independence_experiment",
    "run_regime_experiment",
    "martingale_check",
    "sign_product_coefficients",
    "representation_residual",
    "diagonal_select",
    "ks_statistic",
    "chi_square_independence",
    "build_error_table",
    "write_records_csv",
    "CSV_HEADER",
]

CSV_HEADER = ("experiment", "n", "h", "replicate", "metric", "value", "valid")

# Aggregate rows (correlations, chi-square statistics) use this replicate id.
AGGREGATE = -1

# Grid transforms cost O(h * grid length); the stopped-value check is only
# worth it for short schedules.
_ISOMETRY_MAX_H = 64


@dataclass
class ExperimentConfig:
    """Parameters shared by all experiment kinds; the JSON schema uses
    exactly these field names.

    h_values are absolute iteration counts (limit experiment). h_schedule
    entries are iteration-count rules resolved per embedding level n:
    "sqrt" -> floor(sqrt(n)), "nlog" -> floor(n / ln n), "linear" or
    "linear:c" -> floor(c * n), or a bare integer for a constant count.
    alphas scale n to the separated iteration counts of the independence
    experiment; k_values are the martingale iteration depths.
    """

    master_seed: int
    replicates: int
    dt: float = 2.0**-20
    horizon: float = 1.5
    n_values: tuple[int, ...] = (64, 256, 1024)
    h_values: tuple[int, ...] | None = (0, 1, 2)
    h_schedule: tuple[str, ...] | None = None
    t_probe: float = 1.0
    alphas: tuple[float, ...] = (8.0, 24.0)
    k_values: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        if self.h_values is not None:
            self.h_values = tuple(int(h) for h in self.h_values)
        if self.h_schedule is not None:
            self.h_schedule = tuple(str(s) for s in self.h_schedule)
        self.alphas = tuple(float(a) for a in self.alphas)
        self.k_values = tuple(int(k) for k in self.k_values)
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if self.t_probe <= 0:
            raise ValueError("t_probe must be positive")
        if any(n < 1 for n in self.n_values):
            raise ValueError("all n_values must be positive")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "master_seed" not in data or "replicates" not in data:
            raise ValueError("config requires master_seed and replicates")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def validate_limit(self) -> None:
        if not self.h_values:
            raise ValueError("limit experiment needs h_values")
        if self.horizon < self.t_probe:
            raise ValueError("horizon must cover t_probe")
        for n in self.n_values:
            for h in self.h_values:
                if n * self.horizon <= n * self.t_probe + h:
                    raise ValueError(
                        f"expected hits n*horizon={n * self.horizon:g} do not exceed "
                        f"n*t_probe+h={n * self.t_probe + h:g} for (n={n}, h={h})"
                    )

    def validate_regime(self) -> None:
        if not self.h_schedule:
            raise ValueError("regime experiment needs h_schedule")
        if self.horizon < self.t_probe:
            raise ValueError("horizon must cover t_probe")
        for n in self.n_values:
            for sched in self.h_schedule:
                h = resolve_schedule(sched, n)
                if n * self.horizon <= n * self.t_probe + h:
                    raise ValueError(
                        f"expected hits n*horizon={n * self.horizon:g} do not exceed "
                        f"n*t_probe+h={n * self.t_probe + h:g} for (n={n}, schedule={sched!r})"
                    )


@dataclass
class ResultRecord:
    """One scalar outcome of one replicate (or an aggregate over all of
    them, replicate = -1). seed and wall_time are bookkeeping and stay out
    of the CSV so reruns stay byte-identical."""

    experiment: str
    n: int
    h: int
    replicate: int
    metric: str
    value: float
    valid: bool = True
    seed: tuple[int, int] | None = None
    wall_time: float | None = None


@dataclass
class ErrorTable:
    """Doubly indexed mean coupling errors u[k][n], entries in [0, 1]."""

    u: np.ndarray
    k_values: tuple[int, ...]
    n_values: tuple[int, ...]

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.u.ndim != 2:
            raise ValueError("u must be 2-d (rows k, columns n)")
        if self.u.size and (self.u.min() < 0 or self.u.max() > 1):
            raise ValueError("entries must lie in [0, 1]")


def resolve_schedule(spec: str, n: int) -> int:
    """Map a schedule rule and level n to an iteration count."""
    s = str(spec).strip()
    if s == "sqrt":
        return int(math.isqrt(n))
    if s == "nlog":
        if n < 2:
            raise ValueError("nlog schedule needs n >= 2")
        return int(n / math.log(n))
    if s == "linear":
        return n
    if s.startswith("linear:"):
        c = float(s.split(":", 1)[1])
        if c < 0:
            raise ValueError("linear schedule factor must be nonnegative")
        return int(c * n)
    try:
        return int(s)
    except ValueError:
        raise ValueError(f"unknown schedule {spec!r}") from None


def _run_replicates(worker, replicates: int, workers: int) -> list:
    """Run worker(rep) for rep = 0..replicates-1, results in replicate
    order regardless of scheduling."""
    if workers <= 1:
        return [worker(rep) for rep in range(replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(replicates)))


# ---------------------------------------------------------------------------
# Scaling-limit coupling experiment
# ---------------------------------------------------------------------------

def _limit_replicate(cfg: ExperimentConfig, rep: int) -> list[ResultRecord]:
    t_start = time.perf_counter()
    seed = (cfg.master_seed, rep)
    grid = sample_brownian(cfg.horizon, cfg.dt, RngSpec(*seed))
    h_max = max(cfg.h_values)
    levels = [grid]
    for _ in range(h_max):
        levels.append(levy_transform_grid(levels[-1]))

    probe_counts = [int(round(m / cfg.dt)) for m in range(1, int(math.floor(cfg.t_probe + 1e-9)) + 1)]
    probe_n = int(round(cfg.t_probe / cfg.dt))
    probe_ts = np.arange(probe_n + 1) * cfg.dt

    records = []
    for n in cfg.n_values:
        emb = embed_walk(grid, n)
        for h in cfg.h_values:
            need = math.ceil(n * cfg.t_probe - 1e-9) + h
            if len(emb.walk) < need:
                for metric in ("sup_error", "du_error"):
                    records.append(ResultRecord("limit", n, h, rep, metric, float("nan"), False, seed))
                continue
            walk_h = iterate(emb.walk, h)
            svals = scaled_eval_many(walk_h, n, probe_ts)
            bvals = levels[h].values[: probe_n + 1]
            diff = np.abs(svals - bvals)
            sup_error = float(diff.max())
            du_error = sum(
                2.0 ** (-(m + 1)) * min(1.0, float(diff[: cnt + 1].max()))
                for m, cnt in enumerate(probe_counts)
            )
            wall = time.perf_counter() - t_start
            records.append(ResultRecord("limit", n, h, rep, "sup_error", sup_error, True, seed, wall))
            records.append(ResultRecord("limit", n, h, rep, "du_error", float(du_error), True, seed, wall))
    return records


def run_limit_experiment(config: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """Coupled comparison of the rescaled embedded walk iterates against the
    grid transform iterates of the same underlying grid path.

    Per replicate and (n, h): sup over the probe grid [0, t_probe] of the
    absolute difference, plus the truncated weighted-sup metric.
    """
    config.validate_limit()
    batches = _run_replicates(lambda rep: _limit_replicate(config, rep), config.replicates, workers)
    return [rec for batch in batches for rec in batch]


# ---------------------------------------------------------------------------
# Independence of separated iterates
# ---------------------------------------------------------------------------

def _independence_h_list(cfg: ExperimentConfig, n: int) -> list[int]:
    return [0] + [int(a * n) for a in cfg.alphas]


def _independence_replicate(cfg: ExperimentConfig, rep: int) -> list[ResultRecord]:
    t_start = time.perf_counter()
    seed = (cfg.master_seed, rep)
    gen_spec = RngSpec(*seed)
    records = []
    for idx_n, n in enumerate(cfg.n_values):
        h_list = _independence_h_list(cfg, n)
        length = math.ceil(n * cfg.t_probe - 1e-9) + max(h_list) + 1
        # one independent walk per n, all drawn from this replicate's stream
        walk = sample_srw(length, RngSpec(cfg.master_seed, rep * len(cfg.n_values) + idx_n))
        for i, h in enumerate(h_list):
            value = scaled_eval(iterate(walk, h), n, cfg.t_probe)
            records.append(
                ResultRecord("independence", n, h, rep, f"value_h{i}", float(value), True, seed,
                             time.perf_counter() - t_start)
            )
    return records


def run_independence_experiment(config: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """Sample walks directly and read off the rescaled path at t_probe for
    iteration counts 0 and floor(alpha * n) per alpha.

    Per-replicate records carry the probe values; aggregate records
    (replicate = -1) carry every pairwise correlation and the chi-square
    statistic of the sign-quadrant counts.
    """
    if config.h_values is not None and config.h_schedule is not None:
        raise ValueError("independence experiment derives h from alphas; leave h_schedule unset")
    batches = _run_replicates(lambda rep: _independence_replicate(config, rep), config.replicates, workers)
    records = [rec for batch in batches for rec in batch]

    for n in config.n_values:
        h_list = _independence_h_list(config, n)
        values = {}
        for i, h in enumerate(h_list):
            vals = [r.value for r in records if r.n == n and r.metric == f"value_h{i}" and r.valid]
            values[i] = np.asarray(vals)
        for i in range(len(h_list)):
            for j in range(i + 1, len(h_list)):
                a, b = values[i], values[j]
                corr = float(np.corrcoef(a, b)[0, 1])
                records.append(
                    ResultRecord("independence", n, AGGREGATE, AGGREGATE,
                                 f"corr_h{h_list[i]}_h{h_list[j]}", corr, True)
                )
                signs_a = np.where(a > 0, 1, -1)
                signs_b = np.where(b > 0, 1, -1)
                table = CountTable.from_pairs(zip(signs_a.tolist(), signs_b.tolist()))
                try:
                    chi = chi_square_independence(table)
                    ok = True
                except ValueError:
                    chi, ok = float("nan"), False
                records.append(
                    ResultRecord("independence", n, AGGREGATE, AGGREGATE,
                                 f"chisq_h{h_list[i]}_h{h_list[j]}", chi, ok)
                )
    return records


# ---------------------------------------------------------------------------
# Hitting-time regимes
# ---------------------------------------------------------------------------

def _regime_replicate(cfg: ExperimentConfig, rep: int) -> list[ResultRecord]:
    t_start = time.perf_counter()
    seed = (cfg.master_seed, rep)
    grid = sample_brownian(cfg.horizon, cfg.dt, RngSpec(*seed))
    probe_idx_cap = int(round(cfg.t_probe / cfg.dt))
    records = []
    stopped_cache: dict[int, BrownianGrid] = {}
    for n in cfg.n_values:
        emb = embed_walk(grid, n)
        for sched in cfg.h_schedule:
            h_n = resolve_schedule(sched, n)
            wall = time.perf_counter() - t_start
            if h_n == 0:
                t_hit, hit_known = 0.0, True
            elif len(emb.times) >= h_n:
                t_hit, hit_known = float(emb.times[h_n - 1]), True
            else:
                t_hit, hit_known = float("nan"), False
            # the capped time is known even when the hit falls past the
            # horizon, because then t_probe <= horizon < T
            if hit_known:
                t_capped = min(cfg.t_probe, t_hit)
            else:
                t_capped = cfg.t_probe
            records.append(ResultRecord("regime", n, h_n, rep, f"t_capped:{sched}", t_capped, True, seed, wall))
            records.append(ResultRecord("regime", n, h_n, rep, f"t_hit:{sched}", t_hit, hit_known, seed, wall))
            if 1 <= h_n <= _ISOMETRY_MAX_H:
                if h_n not in stopped_cache:
                    # the grid transform is causal, so iterating the prefix
                    # up to t_probe is enough for stopped values
                    prefix = BrownianGrid(cfg.dt, grid.values[: probe_idx_cap + 1])
                    stopped_cache[h_n] = iterate_levy(prefix, h_n)
                idx = probe_idx_cap if not hit_known else min(int(round(t_hit / cfg.dt)), probe_idx_cap)
                stopped = float(stopped_cache[h_n].values[idx])
                records.append(
                    ResultRecord("regime", n, h_n, rep, f"stopped_sq:{sched}", stopped**2, True, seed,
                                 time.perf_counter() - t_start)
                )
    return records


def run_regime_experiment(config: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """Hitting-time regime estimates per schedule rule.

    Per (replicate, n, schedule): the capped time min(t_probe, T_{h_n}), the
    raw hit time (valid only if observed within the horizon), and, for
    schedules with 1 <= h_n <= 64, the squared h_n-fold-transformed grid
    value at the stopped time, whose mean matches the mean capped time.
    """
    config.validate_regime()
    batches = _run_replicates(lambda rep: _regime_replicate(config, rep), config.replicates, workers)
    return [rec for batch in batches for rec in batch]


# ---------------------------------------------------------------------------
# Martingale representation of the iterated transform
# ---------------------------------------------------------------------------

def sign_product_coefficients(path: IncrementPath, k: int) -> np.ndarray:
    """Products of half-integer signs P[j] = prod over l = 1..k of the sign
    of T^{k-l}(path) at j + l - 1/2, for j = 0..len(path)-k-1."""
    n0 = len(path)
    if not 0 <= k <= n0:
        raise ValueError("need 0 <= k <= path length")
    iterates = [path]
    for _ in range(k):
        iterates.append(transform(iterates[-1]))
    coeffs = np.ones(n0 - k, dtype=np.int64)
    for l in range(1, k + 1):
        pos = iterates[k - l].positions()
        mid2 = pos[l - 1 : n0 - k + l] + pos[l : n0 - k + l + 1]
        coeffs *= np.where(mid2 > 0, 1, -1)
    return coeffs


def representation_residual(path: IncrementPath, k: int) -> int:
    """Max absolute defect of the sign-product expansion of T^k(path):
    position i should equal the prefix sum of P[j] * X_{j+k+1}. Zero when
    the telescoping identity holds (always)."""
    coeffs = sign_product_coefficients(path, k)
    expansion = np.zeros(len(path) - k + 1, dtype=np.int64)
    np.cumsum(coeffs * path.steps[k:].astype(np.int64), out=expansion[1:])
    actual = iterate(path, k).positions()
    return int(np.abs(actual - expansion).max())


def _martingale_replicate(cfg: ExperimentConfig, rep: int) -> list[ResultRecord]:
    t_start = time.perf_counter()
    seed = (cfg.master_seed, rep)
    n = cfg.n_values[0]
    k_max = max(cfg.k_values)
    length = math.ceil(n * cfg.t_probe - 1e-9) + k_max + 1
    walk = sample_srw(length, RngSpec(*seed))
    s1 = int(walk.steps[0])
    s1s2 = s1 * (s1 + int(walk.steps[1]))
    records = []
    for k in cfg.k_values:
        residual = representation_residual(walk, k)
        value = scaled_eval(iterate(walk, k), n, cfg.t_probe)
        wall = time.perf_counter() - t_start
        records.append(ResultRecord("martingale", n, k, rep, "repr_residual", float(residual), True, seed, wall))
        records.append(ResultRecord("martingale", n, k, rep, "s_times_g1", float(value), True, seed, wall))
        records.append(ResultRecord("martingale", n, k, rep, "s_times_s1", float(value * s1), True, seed, wall))
        if k >= 2:
            # S_1 * S_2 is known by the k-th hit only from k = 2 on
            records.append(
                ResultRecord("martingale", n, k, rep, "s_times_s1s2", float(value * s1s2), True, seed, wall)
            )
    return records


def martingale_check(config: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """Per replicate and iteration depth k: the exact sign-product
    expansion residual (always 0) and the products of the rescaled value at
    t_probe with test functionals of the first steps, whose means vanish.
    """
    if not config.k_values:
        raise ValueError("martingale check needs k_values")
    if max(config.k_values) < 0:
        raise ValueError("k_values must be nonnegative")
    batches = _run_replicates(lambda rep: _martingale_replicate(config, rep), config.replicates, workers)
    return [rec for batch in batches for rec in batch]


# ---------------------------------------------------------------------------
# Diagonal selection and statistical helpers
# ---------------------------------------------------------------------------

def diagonal_select(u, thresholds) -> np.ndarray:
    """Nondecreasing row selection along which a doubly indexed error table
    still vanishes.

    For each threshold index p, n_p is the first column from which row p
    stays below thresholds[p] for the rest of the table; construction stops
    at the first p with no such column (the selection saturates at the last
    achievable p). The output is column n -> largest p with n_p <= n, and
    n itself on the initial segment before n_0.
    """
    table = np.asarray(u, dtype=np.float64)
    if table.ndim != 2 or table.size == 0:
        raise ValueError("error table must be a nonempty 2-d array")
    rows, cols = table.shape
    settle = []
    for p, threshold in enumerate(thresholds):
        if p >= rows:
            break
        above = np.nonzero(~(table[p] < threshold))[0]
        if above.size == 0:
            settle.append(0)
        elif above[-1] == cols - 1:
            break
        else:
            settle.append(int(above[-1]) + 1)
    selection = np.empty(cols, dtype=np.int64)
    for n in range(cols):
        achieved = [p for p, n_p in enumerate(settle) if n_p <= n]
        selection[n] = max(achieved) if achieved else n
    return selection


def ks_statistic(sample) -> float:
    """Sup distance between the empirical CDF and the standard normal CDF."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("sample must be nonempty")
    cdf = _stats.norm.cdf(x)
    d_plus = float(np.max(np.arange(1, n + 1) / n - cdf))
    d_minus = float(np.max(cdf - np.arange(0, n) / n))
    return max(d_plus, d_minus)


def chi_square_independence(table: CountTable) -> float:
    """Chi-square statistic of a pair table against the product of its
    marginals. Requires every marginal positive."""
    if not table.counts:
        raise ValueError("empty table")
    rows: dict = {}
    cols: dict = {}
    for (a, b), count in table.counts.items():
        rows[a] = rows.get(a, 0) + count
        cols[b] = cols.get(b, 0) + count
    if any(v == 0 for v in rows.values()) or any(v == 0 for v in cols.values()):
        raise ValueError("zero marginal")
    total = table.total
    stat = 0.0
    for a in sorted(rows):
        for b in sorted(cols):
            expected = rows[a] * cols[b] / total
            observed = table.counts.get((a, b), 0)
            stat += (observed - expected) ** 2 / expected
    return float(stat)


def build_error_table(records: list[ResultRecord], k_values, n_values,
                      metric: str = "du_error") -> ErrorTable:
    """Mean per-(h, n) coupling error over valid records, clipped to [0, 1]."""
    k_values = tuple(int(k) for k in k_values)
    n_values = tuple(int(n) for n in n_values)
    u = np.zeros((len(k_values), len(n_values)))
    for i, k in enumerate(k_values):
        for j, n in enumerate(n_values):
            vals = [r.value for r in records
                    if r.metric == metric and r.h == k and r.n == n and r.valid]
            if not vals:
                raise ValueError(f"no valid records for (h={k}, n={n})")
            u[i, j] = min(1.0, float(np.mean(vals)))
    return ErrorTable(u, k_values, n_values)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _format_value(value: float) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_records_csv(records: list[ResultRecord], file) -> None:
    """Write records in the fixed column order; floats use shortest
    round-trip formatting so identical runs produce identical bytes."""
    close = False
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        fh = open(file, "w", newline="", encoding="ascii")
        close = True
    else:
        fh = file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow([
                rec.experiment,
                rec.n,
                rec.h,
                rec.replicate,
                rec.metric,
                _format_value(rec.value),
                "true" if rec.valid else "false",
            ])
    finally:
        if close:
            fh.close()
