"""Empirical risk minimization, Monte-Carlo statistical risk and the generalization gap."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gnn import LOSSES, GnnModel, _as_matrix, _make_bank, gnn_forward, loss_and_gradient, loss_value
from .graphs import build_epsilon_graph, eigendecompose, epsilon_schedule
from .manifolds import ManifoldModel, SpectralSignal, evaluate_signal, sample_points


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, trace: np.ndarray):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.005
    epochs: int = 1000
    seed: int = 0
    loss: str = "l2"
    optimizer: str = "sgd"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.optimizer != "sgd":
            raise ValueError("only plain full-batch SGD is supported")


@dataclass(frozen=True)
class TrainResult:
    model: GnnModel
    losses: np.ndarray  # loss at the start of each epoch
    final_loss: float  # empirical risk at the returned (last) iterate


@dataclass(frozen=True)
class RiskReport:
    empirical: float
    statistical_estimate: float
    resample_losses: tuple[float, ...]
    resample_seeds: tuple[int, ...] = field(default=())

    @property
    def gap(self) -> float:
        return generalization_gap(self.empirical, self.statistical_estimate)

    @property
    def n_resamples(self) -> int:
        return len(self.resample_losses)


def train(model: GnnModel, shift, inputs, targets, config: TrainConfig, mask=None) -> TrainResult:
    """Full-batch gradient descent on every filter coefficient.

    Returns the last iterate and the per-epoch loss trace.  Raises
    :class:`TrainingDiverged` as soon as the loss stops being finite.
    """
    bank = _make_bank(model, shift)
    inputs, _ = _as_matrix(inputs, model.dims[0])  # one array object, so the bank reuses its input terms
    losses = np.empty(config.epochs)
    for epoch in range(config.epochs):
        value, grads = loss_and_gradient(model, shift, inputs, targets, config.loss, mask, bank=bank)
        if not math.isfinite(value):
            raise TrainingDiverged(f"loss became {value} at epoch {epoch}", losses[:epoch].copy())
        losses[epoch] = value
        model = model.with_coeffs([H - config.lr * g for H, g in zip(model.coeffs, grads)])
    final = loss_value(gnn_forward(model, shift, inputs), targets, config.loss, mask)
    if not math.isfinite(final):
        raise TrainingDiverged(f"loss became {final} after the last step", losses)
    return TrainResult(model, losses, final)


@dataclass(frozen=True)
class SampledTask:
    """One sampled graph with its input and target signals."""

    points: object
    graph: object
    inputs: np.ndarray
    targets: np.ndarray


def sample_task(
    manifold: ManifoldModel,
    f: SpectralSignal | Sequence[SpectralSignal],
    g: SpectralSignal | Sequence[SpectralSignal],
    N: int,
    seed: int,
    c: float,
    normalization: str = "consistent",
) -> SampledTask:
    points = sample_points(manifold, N, seed)
    graph = build_epsilon_graph(points, manifold.d, epsilon_schedule(N, manifold.d, c), normalization)
    fs = [f] if isinstance(f, SpectralSignal) else list(f)
    gs = [g] if isinstance(g, SpectralSignal) else list(g)
    x = np.column_stack([evaluate_signal(s, points) for s in fs])
    y = np.column_stack([evaluate_signal(s, points) for s in gs])
    return SampledTask(points, graph, x, y)


def resample_seeds(seed, R: int) -> tuple[int, ...]:
    """``R`` resample seeds derived from ``seed``, or ``seed`` itself when a sequence."""
    if isinstance(seed, (list, tuple, np.ndarray)):
        return tuple(int(s) for s in seed)
    if R < 1:
        raise ValueError("need at least one resample")
    state = np.random.SeedSequence(seed).generate_state(R, dtype=np.uint32)
    return tuple(int(s) for s in state)


def task_loss(model: GnnModel, task: SampledTask, loss: str = "l2", route: str = "spectral") -> float:
    """Loss of ``model`` on a freshly sampled graph.

    ``route="spectral"`` uses the full eigendecomposition; ``route="sparse"``
    applies the filters through sparse matrix functions, which gives the
    same numbers up to rounding.
    """
    shift = eigendecompose(task.graph.laplacian, task.graph.N) if route == "spectral" else task.graph.laplacian
    return loss_value(gnn_forward(model, shift, task.inputs), task.targets, loss)


def statistical_risk_mc(
    model: GnnModel,
    manifold: ManifoldModel,
    f,
    g,
    N: int,
    R: int = 50,
    seed=0,
    *,
    c: float = 1.5,
    normalization: str = "consistent",
    loss: str = "l2",
    route: str = "sparse",
    empirical: float = float("nan"),
) -> RiskReport:
    """Monte-Carlo estimate of the expected loss over fresh ``N``-point graphs.

    ``seed`` is either a base seed from which ``R`` resample seeds are drawn or
    an explicit sequence of resample seeds.  The mean is an exactly rounded sum,
    so it does not depend on the order of the resamples.
    """
    seeds = resample_seeds(seed, R)
    losses = []
    for s in seeds:
        task = sample_task(manifold, f, g, N, s, c, normalization)
        losses.append(task_loss(model, task, loss, route))
    mean = math.fsum(losses) / len(losses)
    return RiskReport(empirical, mean, tuple(losses), seeds)


def generalization_gap(empirical: float, statistical: float) -> float:
    """Signed ``statistical - empirical``."""
    return statistical - empirical


def write_loss_trace_csv(result: TrainResult, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["epoch", "loss"])
        for e, v in enumerate(result.losses):
            out.writerow([e, repr(float(v))])


def write_risk_report_csv(report: RiskReport, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["resample", "seed", "loss"])
        seeds = report.resample_seeds or (None,) * report.n_resamples
        for r, (s, v) in enumerate(zip(seeds, report.resample_losses)):
            out.writerow([r, "" if s is None else s, repr(float(v))])
        out.writerow([])
        out.writerow(["empirical", "statistical_estimate", "gap"])
        out.writerow([repr(report.empirical), repr(report.statistical_estimate), repr(report.gap)])
