"""Multiclass gradient-boosted regression trees, from scratch.

Softmax cross-entropy objective, one depth-limited regression tree per class
per round, exact greedy variance-reduction splits with midpoint thresholds,
and Newton leaf values.  Training is deterministic given the sample order
and config, so saved models are byte-identical across runs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptModel, DimensionMismatch, EmptyDataset, UnsupportedVersion
from .features import N_FEATURES
from .hands import CLASS_ORDER, GestureClass

MODEL_MAGIC = b"GBDT"
MODEL_VERSION = 1
N_CLASSES = len(CLASS_ORDER)
LEAF_DENOM_FLOOR = 1e-12
PRIOR_FLOOR = 1e-12


@dataclass
class TrainConfig:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.rounds <= 0 or self.max_depth <= 0 or self.min_samples_leaf <= 0:
            raise ValueError("rounds, max_depth and min_samples_leaf must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature >= 0) or leaf (feature == -1)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True)
class RegressionTree:
    root: TreeNode

    def predict_one(self, x: np.ndarray) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def depth(self) -> int:
        def walk(node, d):
            if node.is_leaf:
                return d
            return max(walk(node.left, d + 1), walk(node.right, d + 1))

        return walk(self.root, 0)


@dataclass
class Ensemble:
    class_order: tuple[GestureClass, ...]
    learning_rate: float
    base_scores: np.ndarray  # (K,), log class priors
    trees: list[list[RegressionTree]]  # rounds x classes
    train_losses: tuple[float, ...] = ()
    _packed: dict | None = field(default=None, repr=False, compare=False)

    @property
    def n_classes(self) -> int:
        return len(self.class_order)

    @property
    def rounds(self) -> int:
        return len(self.trees)


# --- tree fitting -----------------------------------------------------------


def _newton_leaf(g: np.ndarray, n_classes: int) -> float:
    denom = float(np.sum(np.abs(g) * (1.0 - np.abs(g))))
    denom = max(denom, LEAF_DENOM_FLOOR)
    return (n_classes - 1) / n_classes * float(np.sum(g)) / denom


def _best_split(
    X: np.ndarray, g: np.ndarray, order: np.ndarray, min_leaf: int
) -> tuple[int, float] | None:
    """Best (feature, threshold) by squared-error reduction, or None.

    ``order`` holds, per column, the node's absolute sample indices sorted by
    that column's value.  Ties in the total-SSE objective resolve to the
    lowest feature index, then the lowest threshold.
    """
    n = order.shape[0]
    if n < 2 * min_leaf:
        return None
    xs = np.take_along_axis(X, order, axis=0)
    gs = g[order]
    csum = np.cumsum(gs, axis=0)
    total = csum[-1, 0]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    s_left = csum[:-1, :]
    s_right = total - s_left
    # Maximizing sum of per-child (sum^2 / count) minimizes total child SSE.
    score = s_left * s_left / n_left + s_right * s_right / (n - n_left)
    valid = xs[1:, :] > xs[:-1, :]
    if min_leaf > 1:
        pos = np.arange(1, n)[:, None]
        valid = valid & (pos >= min_leaf) & ((n - pos) >= min_leaf)
    score = np.where(valid, score, -np.inf)
    best = float(score.max())
    if not np.isfinite(best) or best <= total * total / n + 1e-12:
        return None
    # Distinct features routinely induce identical partitions on small nodes,
    # so the objective ties up to summation rounding; resolve near-ties to the
    # lowest feature index, then the lowest threshold.
    tie_tol = 1e-9 * (1.0 + abs(best))
    flat = np.argmax((score >= best - tie_tol).T)  # feature-major scan
    feature, pos = divmod(int(flat), n - 1)
    lo = xs[pos, feature]
    hi = xs[pos + 1, feature]
    threshold = (lo + hi) / 2.0
    if threshold >= hi:  # midpoint rounded up onto the right value
        threshold = lo
    return feature, float(threshold)


def _filter_order(order: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Restrict per-column sort orders to rows where ``member`` is True."""
    keep = member[order]  # (n, d) bool
    n_child = int(np.count_nonzero(member))
    return order.T[keep.T].reshape(order.shape[1], n_child).T


def fit_tree(
    X: np.ndarray,
    g: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    n_classes: int = N_CLASSES,
    root_order: np.ndarray | None = None,
) -> tuple[RegressionTree, np.ndarray]:
    """Fit one regression tree to residuals g; returns (tree, train predictions)."""
    n = X.shape[0]
    if root_order is None:
        root_order = np.argsort(X, axis=0, kind="stable")
    pred = np.empty(n)

    def build(order: np.ndarray, depth: int) -> TreeNode:
        idx = order[:, 0]
        if depth >= max_depth:
            split = None
        else:
            split = _best_split(X, g, order, min_samples_leaf)
        if split is None:
            value = _newton_leaf(g[idx], n_classes)
            pred[idx] = value
            return TreeNode(value=value)
        feature, threshold = split
        member_left = np.zeros(n, dtype=bool)
        left_rows = idx[X[idx, feature] <= threshold]
        member_left[left_rows] = True
        left_order = _filter_order(order, member_left)
        member_right = np.zeros(n, dtype=bool)
        member_right[idx] = True
        member_right[left_rows] = False
        right_order = _filter_order(order, member_right)
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=build(left_order, depth + 1),
            right=build(right_order, depth + 1),
        )

    return RegressionTree(root=build(root_order, 0)), pred


# --- training ---------------------------------------------------------------


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _as_matrix(vectors) -> np.ndarray:
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise DimensionMismatch(
            f"feature matrix shape {X.shape}, expected (*, {N_FEATURES})"
        )
    return X


def cross_entropy(scores: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under softmax scores."""
    p = _softmax(scores)
    picked = p[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def train(samples, config: TrainConfig | None = None) -> Ensemble:
    """Train on (feature_vector, GestureClass) pairs.

    Standard multiclass boosting: per round, softmax probabilities from the
    current scores, residuals (one-hot minus probabilities), one tree per
    class fit to its residual column, scores bumped by learning_rate times
    the tree output.
    """
    config = config or TrainConfig()
    config.validate()
    samples = list(samples)
    if not samples:
        raise EmptyDataset("no training samples")
    X = _as_matrix([fv for fv, _ in samples])
    y = np.array([CLASS_ORDER.index(label) for _, label in samples], dtype=np.intp)
    n = len(y)

    counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    priors = np.maximum(counts / n, PRIOR_FLOOR)
    base_scores = np.log(priors)

    scores = np.tile(base_scores, (n, 1))
    onehot = np.zeros((n, N_CLASSES))
    onehot[np.arange(n), y] = 1.0

    root_order = np.argsort(X, axis=0, kind="stable")
    trees: list[list[RegressionTree]] = []
    losses = [cross_entropy(scores, y)]
    for _ in range(config.rounds):
        p = _softmax(scores)
        residuals = onehot - p
        round_trees = []
        for k in range(N_CLASSES):
            tree, pred = fit_tree(
                X,
                residuals[:, k],
                config.max_depth,
                config.min_samples_leaf,
                root_order=root_order,
            )
            scores[:, k] += config.learning_rate * pred
            round_trees.append(tree)
        trees.append(round_trees)
        losses.append(cross_entropy(scores, y))
    return Ensemble(
        class_order=CLASS_ORDER,
        learning_rate=config.learning_rate,
        base_scores=base_scores,
        trees=trees,
        train_losses=tuple(losses),
    )


# --- prediction -------------------------------------------------------------


def _pack(model: Ensemble) -> dict:
    """Flatten all trees into padded arrays for vectorized traversal."""
    all_trees = [t for rnd in model.trees for t in rnd]
    if not all_trees:
        return {"empty": True}
    flat_nodes = []
    for tree in all_trees:
        nodes = []

        def index(node) -> int:
            i = len(nodes)
            nodes.append(node)
            if not node.is_leaf:
                li = index(node.left)
                ri = index(node.right)
                nodes[i] = (node, li, ri)
            else:
                nodes[i] = (node, i, i)
            return i

        index(tree.root)
        flat_nodes.append(nodes)
    width = max(len(nodes) for nodes in flat_nodes)
    t = len(flat_nodes)
    feature = np.zeros((t, width), dtype=np.intp)
    threshold = np.zeros((t, width))
    left = np.zeros((t, width), dtype=np.intp)
    right = np.zeros((t, width), dtype=np.intp)
    value = np.zeros((t, width))
    is_leaf = np.ones((t, width), dtype=bool)
    depth = 0
    for ti, nodes in enumerate(flat_nodes):
        depth = max(depth, all_trees[ti].depth())
        for ni, (node, li, ri) in enumerate(nodes):
            feature[ti, ni] = max(node.feature, 0)
            threshold[ti, ni] = node.threshold
            left[ti, ni] = li
            right[ti, ni] = ri
            value[ti, ni] = node.value
            is_leaf[ti, ni] = node.is_leaf
    return {
        "feature": feature,
        "threshold": threshold,
        "left": left,
        "right": right,
        "value": value,
        "is_leaf": is_leaf,
        "depth": depth,
        "tree_rows": np.arange(t),
    }


def _raw_scores(model: Ensemble, x: np.ndarray) -> np.ndarray:
    if model._packed is None:
        model._packed = _pack(model)
    packed = model._packed
    scores = model.base_scores.copy()
    if packed.get("empty"):
        return scores
    rows = packed["tree_rows"]
    cur = np.zeros(len(rows), dtype=np.intp)
    for _ in range(packed["depth"]):
        leaf = packed["is_leaf"][rows, cur]
        go_left = x[packed["feature"][rows, cur]] <= packed["threshold"][rows, cur]
        nxt = np.where(go_left, packed["left"][rows, cur], packed["right"][rows, cur])
        cur = np.where(leaf, cur, nxt)
    values = packed["value"][rows, cur].reshape(model.rounds, model.n_classes)
    return scores + model.learning_rate * values.sum(axis=0)


def predict_proba(model: Ensemble, fv: np.ndarray) -> np.ndarray:
    """Class probabilities for one 288-entry feature vector."""
    x = np.asarray(fv, dtype=np.float64).reshape(-1)
    if x.shape[0] != N_FEATURES:
        raise DimensionMismatch(f"vector length {x.shape[0]}, expected {N_FEATURES}")
    return _softmax(_raw_scores(model, x))


def predict(model: Ensemble, fv: np.ndarray) -> GestureClass:
    """Argmax class; exact ties resolve to the lowest class index."""
    proba = predict_proba(model, fv)
    return model.class_order[int(np.argmax(proba))]


def evaluate(model: Ensemble, samples) -> dict:
    """Accuracy plus a 4x4 confusion matrix (rows true, cols predicted)."""
    samples = list(samples)
    if not samples:
        raise EmptyDataset("no evaluation samples")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.intp)
    for fv, label in samples:
        pred = predict(model, fv)
        confusion[CLASS_ORDER.index(label), CLASS_ORDER.index(pred)] += 1
    accuracy = float(np.trace(confusion)) / len(samples)
    return {"accuracy": accuracy, "confusion": confusion}


# --- model file -------------------------------------------------------------


def _tree_to_list(node: TreeNode):
    if node.is_leaf:
        return [node.value]
    return [node.feature, node.threshold, _tree_to_list(node.left), _tree_to_list(node.right)]


def _tree_from_list(data) -> TreeNode:
    if not isinstance(data, list):
        raise CorruptModel("tree node is not a list")
    if len(data) == 1:
        value = data[0]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise CorruptModel("leaf value is not a number")
        return TreeNode(value=float(value))
    if len(data) != 4:
        raise CorruptModel(f"tree node arity {len(data)}")
    feature, threshold, left, right = data
    if not isinstance(feature, int) or not 0 <= feature < N_FEATURES:
        raise CorruptModel(f"feature index {feature!r} out of range")
    if not isinstance(threshold, (int, float)) or isinstance(threshold, bool):
        raise CorruptModel("threshold is not a number")
    return TreeNode(
        feature=feature,
        threshold=float(threshold),
        left=_tree_from_list(left),
        right=_tree_from_list(right),
    )


def save_model(model: Ensemble) -> bytes:
    """Serialize: magic, big-endian u32 version, canonical JSON body."""
    body = {
        "class_order": [c.value for c in model.class_order],
        "learning_rate": model.learning_rate,
        "base_scores": [float(v) for v in model.base_scores],
        "trees": [[_tree_to_list(t.root) for t in rnd] for rnd in model.trees],
    }
    payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return MODEL_MAGIC + struct.pack(">I", MODEL_VERSION) + payload


def load_model(data: bytes) -> Ensemble:
    if len(data) < 8 or data[:4] != MODEL_MAGIC:
        raise CorruptModel("bad magic")
    (version,) = struct.unpack(">I", data[4:8])
    if version != MODEL_VERSION:
        raise UnsupportedVersion(f"model version {version}")
    try:
        body = json.loads(data[8:].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"bad body: {exc}") from None
    try:
        class_order = tuple(GestureClass(v) for v in body["class_order"])
        learning_rate = float(body["learning_rate"])
        base_scores = np.array([float(v) for v in body["base_scores"]])
        trees = [
            [RegressionTree(root=_tree_from_list(t)) for t in rnd]
            for rnd in body["trees"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"bad body: {exc}") from None
    if class_order != CLASS_ORDER:
        raise CorruptModel(f"unexpected class order {class_order}")
    if len(base_scores) != N_CLASSES or any(len(rnd) != N_CLASSES for rnd in trees):
        raise CorruptModel("wrong class arity")
    return Ensemble(
        class_order=class_order,
        learning_rate=learning_rate,
        base_scores=base_scores,
        trees=trees,
    )
