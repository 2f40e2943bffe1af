"""Citation-network ingestion and the transductive generalization-gap sweep.

The loader reads the standard Cora file pair:

* ``cora.content``: ``<id>\\t<f_1>\\t...\\t<f_F>\\t<class-name>`` per node,
* ``cora.cites``: ``<cited>\\t<citing>`` per directed citation.

Edges are symmetrized; self loops and duplicates are dropped and counted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .experiments import GapReport, Record, _make_report, _run_cells, _safe_fit, cell_seed
from .gnn import GnnModel, gnn_forward, loss_value
from .training import TrainConfig, train

log = logging.getLogger(__name__)

FEATURE_NORMALIZATIONS = ("l1", "none")
MODES = ("induced", "masked")


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class NodeClassificationDataset:
    node_ids: tuple[str, ...]
    features: np.ndarray  # (n_nodes, n_features)
    labels: np.ndarray  # class index per node
    edges: np.ndarray  # (n_edges, 2), each undirected edge once with i < j
    class_names: tuple[str, ...]
    n_self_loops: int = 0
    n_duplicates: int = 0
    n_unknown: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]


@dataclass(frozen=True)
class TransductiveSplit:
    train: np.ndarray
    test: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if np.intersect1d(self.train, self.test).size:
            raise ValueError("train and test nodes overlap")


@dataclass(frozen=True)
class Subgraph:
    nodes: np.ndarray  # indices into the parent dataset
    edges: np.ndarray  # renumbered, i < j
    laplacian: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray


def load_cora(content_path, cites_path) -> NodeClassificationDataset:
    """Parse a Cora-layout file pair.

    Class names are mapped to indices in sorted order.  A malformed content
    row raises :class:`DatasetFormatError` with its line number; citations that
    mention an unknown paper id are skipped, counted and logged.
    """
    ids, rows, names = [], [], []
    index: dict[str, int] = {}
    n_feat = None
    with open(Path(content_path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise DatasetFormatError(f"{content_path}:{lineno}: expected id, features and class")
            if n_feat is None:
                n_feat = len(parts) - 2
            elif len(parts) - 2 != n_feat:
                raise DatasetFormatError(
                    f"{content_path}:{lineno}: {len(parts) - 2} features, earlier rows have {n_feat}"
                )
            try:
                feats = [float(v) for v in parts[1:-1]]
            except ValueError:
                raise DatasetFormatError(f"{content_path}:{lineno}: non-numeric feature value") from None
            if parts[0] in index:
                raise DatasetFormatError(f"{content_path}:{lineno}: duplicate node id {parts[0]!r}")
            index[parts[0]] = len(ids)
            ids.append(parts[0])
            rows.append(feats)
            names.append(parts[-1])
    if not ids:
        raise DatasetFormatError(f"{content_path}: no nodes")
    class_names = tuple(sorted(set(names)))
    class_index = {c: i for i, c in enumerate(class_names)}
    labels = np.array([class_index[c] for c in names], dtype=int)

    pairs, unknown, self_loops = [], 0, 0
    with open(Path(cites_path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DatasetFormatError(f"{cites_path}:{lineno}: expected two paper ids")
            a, b = (index.get(p) for p in parts)
            if a is None or b is None:
                unknown += 1
                continue
            if a == b:
                self_loops += 1
                continue
            pairs.append((min(a, b), max(a, b)))
    raw = np.array(pairs, dtype=int).reshape(-1, 2)
    edges = np.unique(raw, axis=0) if raw.size else raw
    duplicates = raw.shape[0] - edges.shape[0]
    if unknown:
        log.warning("skipped %d citation(s) with unknown paper ids", unknown)
    if self_loops or duplicates:
        log.info("removed %d self loop(s) and %d duplicate edge(s)", self_loops, duplicates)
    return NodeClassificationDataset(
        tuple(ids), np.asarray(rows), labels, edges, class_names, self_loops, duplicates, unknown
    )


def normalize_features(X: np.ndarray, kind: str = "l1") -> np.ndarray:
    """Scale rows to unit l1 norm (all-zero rows stay zero)."""
    if kind == "none":
        return np.asarray(X, dtype=float)
    if kind != "l1":
        raise ValueError(f"unknown feature normalization {kind!r}")
    X = np.asarray(X, dtype=float)
    s = np.abs(X).sum(axis=1, keepdims=True)
    return X / np.where(s == 0, 1.0, s)


def unit_laplacian(edges: np.ndarray, n: int, normalized: bool = False) -> sp.csr_matrix:
    """Laplacian of the unit-weight graph; ``normalized`` gives ``I - D^-1/2 A D^-1/2`` (isolated rows zero)."""
    e = np.asarray(edges, dtype=int).reshape(-1, 2)
    A = sp.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
    deg = np.asarray(A.sum(axis=1)).ravel()
    if not normalized:
        return (sp.diags(deg) - A).tocsr()
    inv = np.zeros(n)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    Dm = sp.diags(inv)
    return (sp.diags((deg > 0).astype(float)) - Dm @ A @ Dm).tocsr()


def induced_subgraph(dataset: NodeClassificationDataset, nodes, normalized: bool = False) -> Subgraph:
    """Keep the edges with both endpoints in ``nodes`` and renumber them by position in ``nodes``."""
    nodes = np.asarray(nodes, dtype=int).reshape(-1)
    if nodes.size == 0:
        raise ValueError("empty node selection")
    if np.unique(nodes).size != nodes.size:
        raise ValueError("node selection has duplicates")
    if nodes.min() < 0 or nodes.max() >= dataset.n_nodes:
        raise ValueError("node index out of range")
    pos = np.full(dataset.n_nodes, -1)
    pos[nodes] = np.arange(nodes.size)
    e = pos[dataset.edges]
    keep = (e >= 0).all(axis=1)
    e = np.sort(e[keep], axis=1)
    e = e[np.lexsort((e[:, 1], e[:, 0]))]
    L = unit_laplacian(e, nodes.size, normalized)
    return Subgraph(nodes, e, L, dataset.features[nodes], dataset.labels[nodes])


def sample_split(n_nodes: int, N: int, seed: int) -> TransductiveSplit:
    """``N`` training nodes uniformly without replacement; every other node is held out."""
    if not 1 <= N < n_nodes:
        raise ValueError(f"need 1 <= N < {n_nodes}, got {N}")
    rng = np.random.default_rng(seed)
    train_nodes = np.sort(rng.choice(n_nodes, size=N, replace=False))
    test_nodes = np.setdiff1d(np.arange(n_nodes), train_nodes)
    return TransductiveSplit(train_nodes, test_nodes, seed)


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Percentage of nodes whose arg-max class matches the label."""
    return 100.0 * float(np.mean(np.argmax(logits, axis=1) == labels))


@dataclass(frozen=True)
class DatasetModelSpec:
    layers: int = 2
    hidden: int = 16
    taps: int = 2
    basis: str = "polynomial"
    activation: str = "relu"
    features: str = "l1"
    normalized_laplacian: bool = False
    mode: str = "induced"

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.taps < 1:
            raise ValueError("layers, hidden and taps must be positive")
        if self.features not in FEATURE_NORMALIZATIONS:
            raise ValueError(f"unknown feature normalization {self.features!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    def dims(self, n_features: int, n_classes: int) -> tuple[int, ...]:
        return (n_features,) + (self.hidden,) * (self.layers - 1) + (n_classes,)


def _trial(dataset, X, spec, config, master_seed, predictions_dir, cell):
    N, trial = cell
    split = sample_split(dataset.n_nodes, N, cell_seed(master_seed, 0, N, trial))
    init_rng = cell_seed(master_seed, 2, N, trial)
    model = GnnModel.random(
        spec.dims(dataset.n_features, dataset.n_classes),
        spec.taps,
        basis=spec.basis,
        activation=spec.activation,
        rng=init_rng,
        linear_readout=True,
    )
    if spec.mode == "induced":
        tr = induced_subgraph(dataset, split.train, spec.normalized_laplacian)
        te = induced_subgraph(dataset, split.test, spec.normalized_laplacian)
        result = train(model, tr.laplacian, X[split.train], tr.labels, config)
        train_logits = gnn_forward(result.model, tr.laplacian, X[split.train])
        test_logits = gnn_forward(result.model, te.laplacian, X[split.test])
    else:
        L = unit_laplacian(dataset.edges, dataset.n_nodes, spec.normalized_laplacian)
        result = train(model, L, X, dataset.labels, config, mask=split.train)
        logits = gnn_forward(result.model, L, X)
        train_logits, test_logits = logits[split.train], logits[split.test]
    y_train, y_test = dataset.labels[split.train], dataset.labels[split.test]
    if predictions_dir is not None:
        np.savez(
            Path(predictions_dir) / f"pred_N{N}_t{trial}.npz",
            train_nodes=split.train,
            test_nodes=split.test,
            train_logits=train_logits,
            test_logits=test_logits,
            train_labels=y_train,
            test_labels=y_test,
        )
    return _trial_records(N, trial, train_logits, test_logits, y_train, y_test)


def _trial_records(N, trial, train_logits, test_logits, y_train, y_test):
    tl = loss_value(train_logits, y_train, "cross_entropy")
    sl = loss_value(test_logits, y_test, "cross_entropy")
    ta = accuracy(train_logits, y_train)
    sa = accuracy(test_logits, y_test)
    return [
        Record(N, trial, "train_loss", tl),
        Record(N, trial, "test_loss", sl),
        Record(N, trial, "train_acc", ta),
        Record(N, trial, "test_acc", sa),
        Record(N, trial, "loss_gap", sl - tl),
        Record(N, trial, "acc_gap", ta - sa),
    ]


def gaps_from_predictions(path) -> tuple[float, float]:
    """Recompute ``(loss_gap, acc_gap)`` from a persisted prediction file."""
    z = np.load(Path(path))
    rec = _trial_records(0, 0, z["train_logits"], z["test_logits"], z["train_labels"], z["test_labels"])
    values = {r.metric: r.value for r in rec}
    return values["loss_gap"], values["acc_gap"]


def geometric_grid(lo: int, hi: int, count: int) -> tuple[int, ...]:
    """``count`` integers spaced geometrically from ``lo`` to ``hi`` (duplicates removed)."""
    grid = np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))
    return tuple(int(n) for n in grid)


def run_gap_sweep_dataset(
    dataset: NodeClassificationDataset,
    N_list: Sequence[int],
    trials: int = 10,
    spec: DatasetModelSpec = DatasetModelSpec(),
    config: TrainConfig = TrainConfig(loss="cross_entropy"),
    master_seed: int = 0,
    jobs: int = 1,
    predictions_dir=None,
) -> GapReport:
    """Train on ``N`` random nodes, test on the rest, for every ``N`` and trial.

    ``spec.mode="induced"`` trains on the subgraph induced by the training
    nodes and evaluates on the subgraph induced by the held-out nodes.
    ``"masked"`` propagates over the full graph and restricts the loss.  The
    gaps are ``test - train`` for the loss and ``train - test`` for the
    accuracy (in percent).  The primary fit is ``log |acc_gap|``; the loss fit
    is in ``fits["loss_gap"]``.
    """
    N_list = tuple(int(n) for n in N_list)
    if max(N_list) >= dataset.n_nodes:
        raise ValueError(f"max(N_list) = {max(N_list)} must be below {dataset.n_nodes} nodes")
    if config.loss != "cross_entropy":
        raise ValueError("dataset sweeps train with cross-entropy")
    if predictions_dir is not None:
        Path(predictions_dir).mkdir(parents=True, exist_ok=True)
    X = normalize_features(dataset.features, spec.features)
    cells = [(N, t) for N in N_list for t in range(trials)]
    fn = partial(_trial, dataset, X, spec, config, master_seed, predictions_dir)
    records = [r for rec in _run_cells(fn, cells, jobs) for r in rec]
    report = _make_report(records, "acc_gap", {}, cls=GapReport, use_abs=True)
    loss_rows = report.summary_of("loss_gap")
    fits = {
        "acc_gap": report.fit,
        "loss_gap": _safe_fit([r.N for r in loss_rows], [r.mean for r in loss_rows], use_abs=True),
    }
    config_dict = {
        "N_list": list(N_list),
        "trials": trials,
        "master_seed": master_seed,
        "spec": spec.__dict__.copy(),
        "train": config.__dict__.copy(),
    }
    return GapReport(report.records, report.metric, report.summary, report.fit, config_dict, report.warnings, fits)


# -- synthetic fixture ----------------------------------------------------------


def write_synthetic_cora(
    directory,
    n_nodes: int = 300,
    n_features: int = 50,
    n_classes: int = 4,
    p_in: float = 0.05,
    p_out: float = 0.005,
    seed: int = 0,
    p_word: float = 0.3,
    p_background: float = 0.02,
) -> tuple[Path, Path]:
    """Write a planted-partition citation graph in the Cora file layout.

    Class ``c`` papers switch on words from a class-specific block with high
    probability and background words with low probability.  Returns the
    content and cites paths.
    """
    rng = np.random.default_rng(seed)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    labels = rng.integers(0, n_classes, n_nodes)
    block = max(1, n_features // n_classes)
    ids = [str(1000 + 7 * i) for i in range(n_nodes)]
    content = directory / "cora.content"
    with open(content, "w") as fh:
        for i in range(n_nodes):
            p = np.full(n_features, p_background)
            p[labels[i] * block : (labels[i] + 1) * block] = p_word
            words = (rng.random(n_features) < p).astype(int)
            fh.write("\t".join([ids[i], *map(str, words), f"class_{labels[i]}"]) + "\n")
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    iu = np.triu_indices(n_nodes, k=1)
    hit = rng.random(iu[0].size) < prob[iu]
    cites = directory / "cora.cites"
    with open(cites, "w") as fh:
        for a, b in zip(iu[0][hit], iu[1][hit]):
            fh.write(f"{ids[a]}\t{ids[b]}\n")
    return content, cites


__all__ = [
    "DatasetFormatError",
    "DatasetModelSpec",
    "NodeClassificationDataset",
    "Subgraph",
    "TransductiveSplit",
    "accuracy",
    "gaps_from_predictions",
    "geometric_grid",
    "induced_subgraph",
    "load_cora",
    "normalize_features",
    "run_gap_sweep_dataset",
    "sample_split",
    "unit_laplacian",
    "write_synthetic_cora",
]
