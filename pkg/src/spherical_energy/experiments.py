"""Seeded sweeps over point families, jittered expectations and power-law fits."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .energy import (
    KernelSpec,
    coefficient_kernel,
    kernel_energy,
    kernel_energy_offdiag,
    riesz_energy,
    riesz_kernel,
    v_d,
)
from .geometry import PointSet, uniform_sphere
from .partition import Partition, eq_partition
from .pointsets import fibonacci_sphere, load_points, riesz_minimize
from .quality import (
    DEFAULT_TOL,
    design_defect,
    logspace_kernel,
    sobolev_kernel,
    wce_logspace,
    wce_sobolev,
)

__all__ = [
    "FAMILIES",
    "METRICS",
    "KERNELS",
    "TrialPlan",
    "SweepRow",
    "SweepTable",
    "FitResult",
    "CompareReport",
    "trial_rng",
    "jitter_expectation",
    "make_kernel",
    "run_sweep",
    "fit_exponent",
    "compare_report",
    "riesz_leading",
]

FAMILIES = ("jittered", "uniform-random", "fibonacci", "file-sequence", "minimizer")
METRICS = ("riesz", "kernel", "kernel-offdiag", "wce-sobolev", "wce-logspace", "defect")
KERNELS = ("sobolev", "logspace", "riesz", "const", "p1")
DETERMINISTIC = ("fibonacci", "file-sequence", "minimizer")


@dataclass(frozen=True)
class TrialPlan:
    d: int
    n_list: tuple[int, ...]
    trials: int = 1
    master_seed: int = 0
    family: str = "jittered"
    metric: str = "riesz"
    s: Optional[float] = None
    gamma: Optional[float] = None
    t: Optional[int] = None
    kernel: str = "sobolev"
    tol: float = DEFAULT_TOL
    minimizer_steps: int = 200
    manifest: dict = field(default_factory=dict)
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "manifest", {int(k): str(v) for k, v in self.manifest.items()})
        if not self.n_list:
            raise ValueError("empty N-list")
        if any(n < 1 for n in self.n_list):
            raise ValueError("every N must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if self.metric in ("kernel", "kernel-offdiag") and self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {KERNELS}")
        if self.family == "fibonacci" and self.d != 2:
            raise ValueError("the fibonacci family lives on S^2")
        if self.family == "file-sequence":
            missing = [n for n in self.n_list if n not in self.manifest]
            if missing:
                raise ValueError(f"file-sequence manifest has no entry for N={missing}")
        needs_s = self.metric in ("riesz", "wce-sobolev") or (
            self.metric in ("kernel", "kernel-offdiag") and self.kernel in ("sobolev", "riesz")
        )
        if needs_s and self.s is None:
            raise ValueError(f"metric {self.metric} needs s")
        if (self.metric == "wce-logspace" or self.kernel == "logspace" and self.metric.startswith("kernel")) and self.gamma is None:
            raise ValueError("log-space metrics need gamma")
        if self.metric == "defect" and not self.t:
            raise ValueError("metric defect needs t")
        if self.metric == "kernel" and self.kernel == "riesz":
            raise ValueError("the Riesz kernel is singular at 1; use kernel-offdiag")

    @property
    def deterministic(self) -> bool:
        return self.family in DETERMINISTIC

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_list"] = list(self.n_list)
        out["manifest"] = {str(k): v for k, v in self.manifest.items()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrialPlan":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown plan keys {sorted(unknown)}")
        return cls(**data)


def trial_rng(master_seed: int, N: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, keyed by ``(N, trial)`` and not by draw order."""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(N, trial)))


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _run_trials(evaluate: Callable[[int], float], trials: int, threads: int) -> list[float]:
    if threads > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(evaluate, range(trials)))
    return [evaluate(k) for k in range(trials)]


def jitter_expectation(
    kernel: KernelSpec,
    partition: Partition,
    trials: int,
    master_seed: int,
    offdiag: bool = False,
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the kernel energy of jittered samples."""
    if kernel.singular_at_1 and not offdiag:
        raise ValueError("singular kernels need offdiag=True")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    energy = kernel_energy_offdiag if offdiag else kernel_energy

    def one(k: int) -> float:
        pts = partition.sample_pointset(trial_rng(master_seed, partition.N, k))
        return energy(pts, kernel).value

    return _mean_stderr(_run_trials(one, trials, threads))


def make_kernel(plan: TrialPlan, L: int = 1024) -> KernelSpec:
    """Kernel named by ``plan.kernel``; series kernels keep their constant term ``a_0 = 1``."""
    d = plan.d
    if plan.kernel == "sobolev":
        return sobolev_kernel(d, plan.s, L, constant=1.0)
    if plan.kernel == "logspace":
        return logspace_kernel(d, plan.gamma, L, constant=1.0)
    if plan.kernel == "riesz":
        return riesz_kernel(plan.s, d)
    if plan.kernel == "const":
        return coefficient_kernel([1.0], d, label="const")
    return coefficient_kernel([0.0, 1.0], d, label="p1")


# -- sweeps -----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    N: int
    mean: float
    stderr: float
    trials: int


@dataclass
class SweepTable:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> np.ndarray:
        return np.array([r.N for r in self.rows], dtype=float)

    @property
    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.rows])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([r.stderr for r in self.rows])

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "metadata": self.metadata}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepTable":
        rows = [SweepRow(int(r["N"]), float(r["mean"]), float(r["stderr"]), int(r["trials"])) for r in data["rows"]]
        return cls(rows, dict(data.get("metadata", {})))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {json.dumps(self.metadata, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "mean", "stderr", "trials"])
        for r in self.rows:
            w.writerow([r.N, repr(r.mean), repr(r.stderr), r.trials])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepTable":
        meta: dict = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                try:
                    meta = json.loads(line[1:])
                except json.JSONDecodeError:
                    pass
            elif line.strip():
                body.append(line)
        reader = csv.DictReader(body)
        rows = [SweepRow(int(r["N"]), float(r["mean"]), float(r["stderr"]), int(r["trials"])) for r in reader]
        return cls(rows, meta)

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_json(indent=2) if path.suffix == ".json" else self.to_csv())

    @classmethod
    def load(cls, path) -> "SweepTable":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_dict(json.loads(text))
        return cls.from_csv(text)


def _points_factory(plan: TrialPlan, N: int) -> Callable[[int], PointSet]:
    d = plan.d
    if plan.family == "jittered":
        part = eq_partition(d, N)
        return lambda k: part.sample_pointset(trial_rng(plan.master_seed, N, k))
    if plan.family == "uniform-random":
        return lambda k: uniform_sphere(d, N, trial_rng(plan.master_seed, N, k))
    if plan.family == "fibonacci":
        pts = fibonacci_sphere(N)
        return lambda k: pts
    if plan.family == "file-sequence":
        pts = load_points(plan.manifest[N], d)
        if pts.N != N:
            raise ValueError(f"N={N}: {plan.manifest[N]} holds {pts.N} points")
        return lambda k: pts
    # minimizer: deterministic start, local descent on the Riesz energy
    start = fibonacci_sphere(N) if d == 2 else uniform_sphere(d, N, trial_rng(plan.master_seed, N, 0))
    s_min = plan.s if plan.s is not None and 0 < plan.s < d else d - 1
    pts = riesz_minimize(start, s_min, steps=plan.minimizer_steps).points if N > 1 else start
    return lambda k: pts


def _metric(plan: TrialPlan) -> Callable[[PointSet], float]:
    m = plan.metric
    if m == "riesz":
        return lambda X: riesz_energy(X, plan.s).value
    if m == "wce-sobolev":
        return lambda X: wce_sobolev(X, plan.s, plan.tol).wce_squared
    if m == "wce-logspace":
        return lambda X: wce_logspace(X, plan.gamma, plan.tol).wce_squared
    if m == "defect":
        return lambda X: math.fsum(design_defect(X, plan.t, plan.tol).defects)
    kernel = make_kernel(plan)
    if m == "kernel":
        return lambda X: kernel_energy(X, kernel).value
    return lambda X: kernel_energy_offdiag(X, kernel).value


def run_sweep(plan: TrialPlan, progress: Optional[Callable[[SweepRow], None]] = None) -> SweepTable:
    """One row per ``N``; deterministic families are evaluated once per row."""
    metric = _metric(plan)
    rows = []
    for N in sorted(set(plan.n_list)):
        try:
            factory = _points_factory(plan, N)
            trials = 1 if plan.deterministic else plan.trials
            with warnings.catch_warnings():
                # truncation notices are recorded in the metadata instead
                warnings.simplefilter("ignore", RuntimeWarning)
                values = _run_trials(lambda k: metric(factory(k)), trials, plan.threads)
        except (OSError, ValueError) as exc:
            raise type(exc)(f"row N={N}: {exc}") from exc
        mean, se = _mean_stderr(values)
        row = SweepRow(N, mean, se, trials)
        rows.append(row)
        if progress is not None:
            progress(row)
    meta = {"plan": plan.to_dict(), "version": __version__}
    return SweepTable(rows, meta)


# -- fits -------------------------------------------------------------------------

@dataclass
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    residuals: list[float]
    slope_stderr: float = 0.0
    n_used: list[int] = field(default_factory=list)
    excluded: list[int] = field(default_factory=list)
    transform: str = "raw"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def fit_exponent(
    table: SweepTable,
    transform: str = "raw",
    leading_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    scale_power: float = 0.0,
    log_power: float = 0.0,
    include_smallest: bool = False,
) -> FitResult:
    """Least-squares slope of ``ln|y|`` against ``ln N``.

    ``y = mean`` for ``transform="raw"`` and ``y = mean - leading_fn(N)`` for
    ``"subtract-leading"``; ``y`` is then multiplied by ``N^scale_power`` and
    divided by ``(ln N)^log_power``.  Rows with ``y == 0`` (or non-finite) are
    excluded and listed.  The smallest ``N`` is left out unless
    ``include_smallest`` is set.
    """
    N = table.n
    y = table.means.copy()
    if transform == "subtract-leading":
        if leading_fn is None:
            raise ValueError("subtract-leading needs leading_fn")
        y = y - np.asarray(leading_fn(N), dtype=float)
    elif transform != "raw":
        raise ValueError(f"unknown transform {transform!r}")
    y = y * N ** scale_power / np.log(N) ** log_power if log_power else y * N ** scale_power
    keep = np.isfinite(y) & (y != 0)
    if not include_smallest and N.size:
        keep &= N > N.min()
    excluded = [int(n) for n, k in zip(N, keep) if not k]
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 usable rows, have {int(keep.sum())}")
    lx, ly = np.log(N[keep]), np.log(np.abs(y[keep]))
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    ss_res = float(res @ res)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    dof = lx.size - 2
    sxx = float(((lx - lx.mean()) ** 2).sum())
    se = math.sqrt(ss_res / dof / sxx) if dof > 0 and sxx > 0 else 0.0
    return FitResult(
        float(coef[0]), float(coef[1]), r2, res.tolist(), se, [int(n) for n in N[keep]], excluded, transform
    )


# -- deterministic versus probabilistic ----------------------------------------------

@dataclass
class CompareReport:
    N: list[int]
    deterministic: list[float]
    probabilistic: list[float]
    ratio: list[float]
    fit_deterministic: FitResult
    fit_probabilistic: FitResult
    verdict: str
    band: tuple[float, float]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def text(self) -> str:
        lines = [f"{'N':>8} {'deterministic':>16} {'probabilistic':>16} {'ratio':>10}"]
        for n, a, b, r in zip(self.N, self.deterministic, self.probabilistic, self.ratio):
            lines.append(f"{n:>8d} {a:>16.8g} {b:>16.8g} {r:>10.4g}")
        fd, fp = self.fit_deterministic, self.fit_probabilistic
        lines.append(f"exponent deterministic {fd.slope:+.4f} +- {self.band[0]:.3f}")
        lines.append(f"exponent probabilistic {fp.slope:+.4f} +- {self.band[1]:.3f}")
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def _metric_key(table: SweepTable) -> tuple:
    plan = table.metadata.get("plan", {})
    return tuple(plan.get(k) for k in ("d", "metric", "s", "gamma", "t", "kernel"))


def compare_report(
    deterministic: SweepTable,
    probabilistic: SweepTable,
    transform: str = "raw",
    leading_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    min_halfwidth: float = 0.1,
    include_smallest: bool = False,
) -> CompareReport:
    """Side-by-side rows, fitted exponents and a verdict.

    A smaller exponent counts as better.  Each exponent carries a band of
    half-width ``max(1.96 * stderr, min_halfwidth)``; only disjoint bands give
    a non-"comparable" verdict.
    """
    if _metric_key(deterministic) != _metric_key(probabilistic):
        raise ValueError("tables were produced with different metrics")
    Na = [r.N for r in deterministic.rows]
    Nb = [r.N for r in probabilistic.rows]
    if Na != Nb:
        raise ValueError("tables have different N-lists")
    fa = fit_exponent(deterministic, transform, leading_fn, include_smallest=include_smallest)
    fb = fit_exponent(probabilistic, transform, leading_fn, include_smallest=include_smallest)
    ha = max(1.96 * fa.slope_stderr, min_halfwidth)
    hb = max(1.96 * fb.slope_stderr, min_halfwidth)
    if fa.slope + ha < fb.slope - hb:
        verdict = "deterministic better"
    elif fb.slope + hb < fa.slope - ha:
        verdict = "probabilistic better"
    else:
        verdict = "comparable"
    ma, mb = deterministic.means, probabilistic.means
    ratio = [float(a / b) if b != 0 else math.nan for a, b in zip(ma, mb)]
    return CompareReport(Na, ma.tolist(), mb.tolist(), ratio, fa, fb, verdict, (ha, hb))


def riesz_leading(s: float, d: int, per_pair: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    """Leading term of the Riesz energy: ``V_d(s) N^2 / 2``, or ``V_d(s)`` per pair mean."""
    V = v_d(s, d)
    if per_pair:
        return lambda N: np.full_like(np.asarray(N, dtype=float), V)
    return lambda N: 0.5 * V * np.asarray(N, dtype=float) ** 2
