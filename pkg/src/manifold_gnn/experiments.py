"""Convergence sweeps, Weyl scaling and the synthetic generalization-gap sweep.

Every sweep is a deterministic function of its :class:`SweepConfig`.  Each
``(N, seed)`` cell draws its points from ``SeedSequence([master_seed, stream,
N, seed])``, so cells are independent work items and can run in any order or
in parallel; records are merged by sorted key.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .fitting import FitError, LinearFit, loglog_fit
from .gnn import GnnModel, gnn_forward, loss_value
from .graphs import build_epsilon_graph, eigendecompose, epsilon_schedule, kernel_limit_factor
from .manifolds import (
    ManifoldModel,
    SpectralSignal,
    evaluate_signal,
    make_manifold,
    mnn_forward,
    sample_points,
)
from .training import TrainConfig, train

DEFAULT_C = {1: 1.5, 2: 1.0}
DEFAULT_SIGNAL = (1.0, 0.8, -0.6, 0.5, 0.4)
# constant term of the generated gap-sweep inputs; it keeps the teacher's
# pre-activations positive, so the ReLU does not clip the target
GAP_OFFSET = 2.5

# independent random streams per cell
STREAM_POINTS = 0
STREAM_RESAMPLE = 1
STREAM_INIT = 2


@dataclass(frozen=True)
class SweepConfig:
    """Parameters shared by every sweep.

    Fields irrelevant to a given sweep are ignored by it but still recorded in
    the manifest.
    """

    N_list: tuple[int, ...]
    seeds: int = 10
    manifold: str = "circle"
    M: int = 5
    K: int = 9
    taps: tuple[float, ...] = (0.0, 1.0)
    activation: str = "relu"
    c: float | None = None
    normalization: str = "consistent"
    master_seed: int = 0
    signal: tuple[float, ...] | None = None  # per-sweep default when None
    # generalization sweep
    features: int = 4
    task_seed: int = 123
    teacher_taps: tuple[float, ...] | None = None
    student_taps: int = 3
    student_low_pass: bool = True
    R: int = 50
    epochs: int = 3000
    lr: float = 0.01
    depth: int = 1
    quadrature: int | None = None

    def __post_init__(self):
        N_list = tuple(int(n) for n in self.N_list)
        if len(N_list) < 2:
            raise ValueError("N_list needs at least 2 entries")
        if any(b <= a for a, b in zip(N_list, N_list[1:])):
            raise ValueError("N_list must be strictly increasing")
        if N_list[0] < 2:
            raise ValueError("every N must be >= 2")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.features < 1 or self.student_taps < 1:
            raise ValueError("features and student_taps must be >= 1")
        if self.student_low_pass and self.student_taps < 2:
            raise ValueError("a low-pass student needs at least 2 taps")
        object.__setattr__(self, "N_list", N_list)
        for name in ("taps", "signal", "teacher_taps"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(v) for v in value))

    @property
    def d(self) -> int:
        return 1 if self.manifold == "circle" else 2

    @property
    def eps_constant(self) -> float:
        return DEFAULT_C[self.d] if self.c is None else float(self.c)

    def manifold_model(self) -> ManifoldModel:
        return make_manifold(self.manifold, self.M)

    def resolved(self, signal=DEFAULT_SIGNAL) -> "SweepConfig":
        """Copy with every default filled in, as recorded in reports and manifests."""
        return replace(self, c=self.eps_constant, signal=self.signal if self.signal is not None else signal)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["N_list"] = list(self.N_list)
        for name in ("taps", "signal", "teacher_taps"):
            if out[name] is not None:
                out[name] = list(out[name])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sweep parameters: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Record:
    N: int
    seed: int
    metric: str
    value: float


@dataclass(frozen=True)
class SummaryRow:
    N: int
    mean: float
    stderr: float


def summarize(records: Sequence[Record], metric: str) -> tuple[SummaryRow, ...]:
    """Per-N mean and standard error of one metric (stderr 0 for a single seed)."""
    by_N: dict[int, list[float]] = {}
    for r in records:
        if r.metric == metric:
            by_N.setdefault(r.N, []).append(r.value)
    rows = []
    for N in sorted(by_N):
        v = np.asarray(by_N[N])
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        rows.append(SummaryRow(N, math.fsum(v) / v.size, se))
    return tuple(rows)


@dataclass(frozen=True)
class ConvergenceReport:
    """Raw per-``(N, seed, metric)`` values, per-N summary and a log-log fit.

    ``summary`` and ``fit`` refer to ``metric``; every other metric can be
    summarized on demand with :meth:`summary_of`.
    """

    records: tuple[Record, ...]
    metric: str
    summary: tuple[SummaryRow, ...]
    fit: LinearFit
    config: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def summary_of(self, metric: str) -> tuple[SummaryRow, ...]:
        return summarize(self.records, metric)

    def fit_of(self, metric: str, use_abs: bool = False) -> LinearFit:
        rows = self.summary_of(metric)
        return _safe_fit([r.N for r in rows], [r.mean for r in rows], use_abs)

    def means(self, metric: str | None = None) -> np.ndarray:
        return np.array([r.mean for r in self.summary_of(metric or self.metric)])

    def is_consistent(self) -> bool:
        """Stored summary equals the one recomputed from raw records."""
        return self.summary == summarize(self.records, self.metric)


@dataclass(frozen=True)
class GapReport(ConvergenceReport):
    """A sweep whose primary metric is a generalization gap (fit on ``|gap|``)."""

    fits: dict = field(default_factory=dict)
    task: dict = field(default_factory=dict)

    @property
    def a(self) -> float:
        return self.fit.a

    @property
    def b(self) -> float:
        return self.fit.b

    @property
    def pearson(self):
        return self.fit.pearson


def _make_report(records, metric, config, warnings=(), cls=ConvergenceReport, use_abs=False, **extra):
    records = tuple(sorted(records, key=lambda r: (r.N, r.seed, r.metric)))
    summary = summarize(records, metric)
    fit = _safe_fit([r.N for r in summary], [r.mean for r in summary], use_abs)
    warnings = list(warnings)
    if fit.degenerate and fit.n_points < 2:
        warnings.append(f"log-log fit of {metric} undefined: {fit.n_dropped} nonpositive mean(s) dropped")
    return cls(records, metric, summary, fit, config, tuple(sorted(set(warnings))), **extra)


def _safe_fit(xs, ys, use_abs=False) -> LinearFit:
    """``loglog_fit``, or a degenerate zero-slope fit when too few points are usable."""
    try:
        return loglog_fit(xs, ys, use_abs=use_abs)
    except FitError:
        y = np.abs(ys) if use_abs else np.asarray(ys, dtype=float)
        usable = int(np.count_nonzero(np.asarray(y) > 0))
        domain = "log|y| vs log x" if use_abs else "log y vs log x"
        return LinearFit(0.0, 0.0, None, usable, len(ys) - usable, domain, degenerate=True)


def cell_seed(master: int, stream: int, N: int, seed: int) -> int:
    return int(np.random.SeedSequence([master, stream, N, seed]).generate_state(1)[0])


def _run_cells(fn: Callable, cells: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


def _cells(config: SweepConfig):
    return [(N, s) for N in config.N_list for s in range(config.seeds)]


def _sample_graph(config: SweepConfig, manifold: ManifoldModel, N: int, seed: int):
    points = sample_points(manifold, N, seed)
    eps = epsilon_schedule(N, manifold.d, config.eps_constant)
    return points, build_epsilon_graph(points, manifold.d, eps, config.normalization)


def _flatten(results):
    records, warnings = [], []
    for rec, warn in results:
        records.extend(rec)
        warnings.extend(warn)
    return records, warnings


# -- spectrum ---------------------------------------------------------------


def subspace_distance(A: np.ndarray, B: np.ndarray) -> float:
    """``||P_A - P_B||_2`` for the orthogonal projectors onto two equal-dimension column spans.

    Computed as the sine of the largest principal angle, so it is invariant to
    any sign flip or rotation of the columns inside either span.
    """
    Qa, _ = np.linalg.qr(A)
    Qb, _ = np.linalg.qr(B)
    # the residual of Qb off span(A) gives the sine without cancellation
    return float(np.linalg.norm(Qb - Qa @ (Qa.T @ Qb), 2))


def signed_distance(u: np.ndarray, v: np.ndarray) -> float:
    """``min over a in {-1, 1}`` of ``||a u - v||_N``."""
    plus = np.sqrt(np.mean((u - v) ** 2))
    minus = np.sqrt(np.mean((u + v) ** 2))
    return float(min(plus, minus))


def _spectrum_cell(config: SweepConfig, cell):
    N, s = cell
    manifold = make_manifold(config.manifold, config.K)
    groups = manifold.tied_groups(config.K)
    points, graph = _sample_graph(config, manifold, N, cell_seed(config.master_seed, STREAM_POINTS, N, s))
    dec = eigendecompose(graph.laplacian, config.K)
    target = kernel_limit_factor(manifold.d, config.normalization) * manifold.eigenvalues
    sampled = manifold.eigenfunctions(points.intrinsic_coords, config.K)
    rec = []
    for i in range(config.K):
        lam = dec.eigenvalues[i]
        rec.append(Record(N, s, f"lambda_{i + 1}", float(lam)))
        if target[i] > 0:
            rec.append(Record(N, s, f"relerr_{i + 1}", float(abs(target[i] - lam) / target[i])))
    for j, g in enumerate(groups):
        if len(g) == 1:
            dist = signed_distance(dec.eigenvectors[:, g[0]], sampled[:, g[0]])
        else:
            dist = subspace_distance(sampled[:, g], dec.eigenvectors[:, g])
        rec.append(Record(N, s, f"subspace_{j + 1}", dist))
        k = int(manifold.frequencies[g[0]])
        if k > 0:
            lap = manifold.eigenvalues[g[0]] / manifold.c_rho  # plain Laplace-Beltrami value
            ratio = float(np.mean(dec.eigenvalues[g]) / lap)
            rec.append(Record(N, s, f"ratio_{k}", ratio))
    return rec, graph.warnings


def run_spectrum_convergence(config: SweepConfig, jobs: int = 1) -> ConvergenceReport:
    """Relative eigenvalue errors and eigenspace distances over an N sweep.

    Metrics per cell: ``lambda_i``, ``relerr_i`` (nonzero analytic
    eigenvalues), ``subspace_j`` (tied group ``j``; singletons use the signed
    vector distance) and ``ratio_k`` (graph eigenvalue over the plain
    Laplace-Beltrami value of frequency ``k``, an estimate of ``c_rho``).
    The primary metric is ``relerr_2``.
    """
    config = config.resolved()
    if _splits_group(config.manifold, config.K):
        raise ValueError(f"K={config.K} splits a group of tied eigenvalues")
    results = _run_cells(partial(_spectrum_cell, config), _cells(config), jobs)
    records, warnings = _flatten(results)
    return _make_report(records, "relerr_2", config.to_dict(), warnings)


def _splits_group(kind: str, K: int) -> bool:
    freq = make_manifold(kind, K + 1).frequencies
    return bool(freq[K] == freq[K - 1])


# -- output convergence -----------------------------------------------------


def layered_model(taps, activation: str, depth: int) -> GnnModel:
    """``depth`` single-feature heat layers sharing the same taps."""
    H = np.asarray(taps, dtype=float).reshape(1, 1, -1)
    return GnnModel(tuple(H for _ in range(depth)), activation, "heat")


def _output_cell(config: SweepConfig, cell):
    N, s = cell
    manifold = config.manifold_model()
    f = SpectralSignal(manifold, config.signal)
    points, graph = _sample_graph(config, manifold, N, cell_seed(config.master_seed, STREAM_POINTS, N, s))
    x = evaluate_signal(f, points)
    rec = []
    for name, act in (("gnn", config.activation), ("filter", "identity")):
        model = layered_model(config.taps, act, config.depth)
        graph_out = gnn_forward(model, graph.laplacian, x)
        manifold_out = mnn_forward(model, f, points, config.quadrature)[:, 0]
        rec.append(Record(N, s, name, float(np.sqrt(np.mean((graph_out - manifold_out) ** 2)))))
    return rec, graph.warnings


def run_output_convergence(config: SweepConfig, depth: int | None = None, jobs: int = 1) -> ConvergenceReport:
    """``||Phi(H, L_N, P_N f) - P_N Phi(H, L_rho, f)||_N`` over an N sweep.

    Two metrics per cell: ``gnn`` (with the configured activation) and
    ``filter`` (same taps, no nonlinearity).  Depth 1 compares against the
    exact manifold network; deeper models use quadrature re-projection.
    """
    config = config.resolved()
    if depth is not None:
        config = replace(config, depth=depth)
    results = _run_cells(partial(_output_cell, config), _cells(config), jobs)
    records, warnings = _flatten(results)
    return _make_report(records, "gnn", config.to_dict(), warnings)


# -- sampling consistency ---------------------------------------------------


def _sampling_cell(config: SweepConfig, cell):
    N, s = cell
    manifold = config.manifold_model()
    f = SpectralSignal(manifold, config.signal)
    points = sample_points(manifold, N, cell_seed(config.master_seed, STREAM_POINTS, N, s))
    phi = manifold.eigenfunctions(points.intrinsic_coords)
    x = phi @ f.coeffs
    err = np.abs(phi.T @ x / N - f.coeffs)
    rec = [Record(N, s, f"ip_err_{i + 1}", float(e)) for i, e in enumerate(err)]
    rec.append(Record(N, s, "ip_err", float(np.mean(err))))
    return rec, ()


def run_sampling_consistency(config: SweepConfig, jobs: int = 1) -> ConvergenceReport:
    """``|<P_N f, P_N phi_i>_N - fhat_i|`` per index; the primary metric ``ip_err`` averages over i."""
    config = config.resolved()
    results = _run_cells(partial(_sampling_cell, config), _cells(config), jobs)
    records, _ = _flatten(results)
    return _make_report(records, "ip_err", config.to_dict())


# -- Weyl law ---------------------------------------------------------------


def check_weyl(manifold, count: int = 100) -> LinearFit:
    """Exponent of ``lambda_i ~ i^p`` fitted over ``i`` in ``[count/4, count]``.

    ``manifold`` is a kind (``"circle"``/``"sphere"``), a :class:`ManifoldModel`
    or a raw ascending eigenvalue sequence indexed from ``i = 1``.
    """
    if isinstance(manifold, str):
        lam = make_manifold(manifold, count).eigenvalues
    elif isinstance(manifold, ManifoldModel):
        lam = manifold.eigenvalues
    else:
        lam = np.asarray(manifold, dtype=float)
    if count > lam.size:
        raise ValueError(f"only {lam.size} eigenvalues available, asked for {count}")
    i = np.arange(1, count + 1)
    keep = i >= count / 4.0
    return loglog_fit(i[keep], lam[:count][keep])


# -- generalization gap -----------------------------------------------------


@dataclass
class _Task:
    graph: object
    inputs: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class GapProblem:
    """Input signals and the teacher network whose exact manifold output is the target."""

    manifold: ManifoldModel
    signals: tuple[SpectralSignal, ...]
    teacher: GnnModel

    def to_dict(self) -> dict:
        return {
            "signals": [[float(v) for v in s.coeffs] for s in self.signals],
            "teacher": self.teacher.to_dict(),
        }


def gap_problem(config: SweepConfig) -> GapProblem:
    """The regression task of the generalization sweep, fixed by ``config.task_seed``.

    Without an explicit ``signal`` each of the ``features`` inputs gets the
    constant term ``GAP_OFFSET`` plus N(0, 0.5) coefficients, and the teacher
    is a low-pass filter bank with taps drawn from U(0, 0.5).  An explicit
    ``signal`` or ``teacher_taps`` replaces the random draw (the teacher then
    filters each feature separately).
    """
    manifold = config.manifold_model()
    F, M = config.features, config.M
    rng = np.random.default_rng(config.task_seed)
    if config.signal is None:
        C = rng.normal(0.0, 0.5, (F, M))
        C[:, 0] = GAP_OFFSET
    elif F == 1:
        C = np.asarray([config.signal])
    else:
        raise ValueError("an explicit signal defines a one-feature task; set features=1")
    if config.teacher_taps is None:
        H = np.zeros((F, F, config.student_taps))
        H[:, :, 1:] = rng.uniform(0.0, 0.5, (F, F, config.student_taps - 1))
        teacher = GnnModel((H,), config.activation, "heat", low_pass=True)
    else:
        taps = np.asarray(config.teacher_taps)
        H = np.zeros((F, F, taps.size))
        H[np.arange(F), np.arange(F)] = taps
        teacher = GnnModel((H,), config.activation, "heat")
    return GapProblem(manifold, tuple(SpectralSignal(manifold, c) for c in C), teacher)


def _gap_task(config, problem: GapProblem, N, seed):
    points, graph = _sample_graph(config, problem.manifold, N, seed)
    x = np.column_stack([evaluate_signal(s, points) for s in problem.signals])
    return _Task(graph, x, mnn_forward(problem.teacher, list(problem.signals), points))


def student_init(config: SweepConfig, N: int, seed: int) -> GnnModel:
    """Single-layer student with taps from U(0, 0.3), so its ReLU units start alive."""
    rng = np.random.default_rng(cell_seed(config.master_seed, STREAM_INIT, N, seed))
    F, K = config.features, config.student_taps
    if config.student_low_pass:
        H = np.zeros((F, F, K))
        H[:, :, 1:] = rng.uniform(0.0, 0.3, (F, F, K - 1))
    else:
        H = rng.uniform(0.0, 0.3, (F, F, K))
    return GnnModel((H,), config.activation, "heat", low_pass=config.student_low_pass)


def _gap_N(config: SweepConfig, N: int):
    problem = gap_problem(config)
    rseeds = [cell_seed(config.master_seed, STREAM_RESAMPLE, N, r) for r in range(config.R)]
    resamples = [_gap_task(config, problem, N, s) for s in rseeds]
    tc = TrainConfig(lr=config.lr, epochs=config.epochs)
    rec, warnings = [], []
    for s in range(config.seeds):
        task = _gap_task(config, problem, N, cell_seed(config.master_seed, STREAM_POINTS, N, s))
        warnings.extend(task.graph.warnings)
        dec = eigendecompose(task.graph.laplacian, N)
        result = train(student_init(config, N, s), dec, task.inputs, task.targets, tc)
        losses = [
            loss_value(gnn_forward(result.model, t.graph.laplacian, t.inputs), t.targets) for t in resamples
        ]
        statistical = math.fsum(losses) / len(losses)
        rec += [
            Record(N, s, "empirical", result.final_loss),
            Record(N, s, "statistical", statistical),
            Record(N, s, "gap", statistical - result.final_loss),
        ]
    for t in resamples:
        warnings.extend(t.graph.warnings)
    return rec, warnings


def run_gap_sweep_synthetic(config: SweepConfig, jobs: int = 1) -> GapReport:
    """Train on one sampled graph per (N, seed), estimate the statistical risk on ``R`` fresh graphs.

    The task regresses the exact manifold output of a teacher network (see
    :func:`gap_problem`) from its sampled inputs with l2 loss.  The ``R``
    resample graphs at each N are shared by all training seeds.  The fit is
    ``log |mean gap|`` against ``log N``; ``report.task`` holds the generated
    signals and teacher.
    """
    results = _run_cells(partial(_gap_N, config), list(config.N_list), jobs)
    records, warnings = _flatten(results)
    config = config.resolved(None)
    return _make_report(
        records, "gap", config.to_dict(), warnings, cls=GapReport, use_abs=True,
        task=gap_problem(config).to_dict(),
    )


# -- output -----------------------------------------------------------------


def write_records_csv(report: ConvergenceReport, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["N", "seed", "metric", "value"])
        for r in report.records:
            out.writerow([r.N, r.seed, r.metric, repr(float(r.value))])


def write_summary_csv(rows: Sequence[SummaryRow], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["N", "mean", "stderr"])
        for r in rows:
            out.writerow([r.N, repr(float(r.mean)), repr(float(r.stderr))])


def write_fit_json(fit: LinearFit, path) -> None:
    Path(path).write_text(json.dumps(fit.sidecar(), indent=2) + "\n")


def read_records_csv(path) -> tuple[Record, ...]:
    with open(Path(path), newline="") as fh:
        return tuple(
            Record(int(row["N"]), int(row["seed"]), row["metric"], float(row["value"])) for row in csv.DictReader(fh)
        )


__all__ = [
    "ConvergenceReport",
    "GapProblem",
    "GapReport",
    "Record",
    "SummaryRow",
    "SweepConfig",
    "cell_seed",
    "check_weyl",
    "gap_problem",
    "layered_model",
    "read_records_csv",
    "run_gap_sweep_synthetic",
    "run_output_convergence",
    "run_sampling_consistency",
    "run_spectrum_convergence",
    "signed_distance",
    "subspace_distance",
    "summarize",
    "write_fit_json",
    "write_records_csv",
    "write_summary_csv",
]
