"""Random forest baseline: CART trees with Gini impurity, bootstrap
sampling and sqrt-feature subsampling, built from scratch.

Split thresholds sit on observed training values (rule: x <= value goes
left), so predictions are invariant under any strictly monotone per-feature
transform applied consistently to train and test data.
"""

from dataclasses import dataclass, field

import numpy as np

from ..data import Normalizer, apply_normalizer, modality_columns
from ..util import derive_rng


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 11
    max_depth: int | None = None
    min_samples_leaf: int = 2
    max_features: str | int | None = "sqrt"  # per-split subsampling
    bootstrap: bool = True
    modalities: tuple | None = None
    threshold: float = 0.5

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("forest needs at least one tree")

    def n_split_features(self, d: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.floor(np.sqrt(d))))
        if self.max_features is None:
            return d
        return min(int(self.max_features), d)


@dataclass
class TreeNode:
    feature: int = -1          # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    leaf_value: int = 0        # majority class at the leaf


def _gini(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    p = y.mean()
    return 2.0 * p * (1.0 - p)


def _best_split(x, y, feature_ids, min_leaf):
    parent = _gini(y)
    n = y.size
    best = (None, None, 1e-12)  # feature, threshold, gain
    for f in feature_ids:
        order = np.argsort(x[:, f], kind="stable")
        xs, ys = x[order, f], y[order]
        for value in np.unique(xs)[:-1]:  # x <= max would leave right empty
            left = xs <= value
            n_left = int(left.sum())
            if n_left < min_leaf or n - n_left < min_leaf:
                continue
            gain = parent - (n_left * _gini(ys[left]) +
                             (n - n_left) * _gini(ys[~left])) / n
            if gain > best[2]:
                best = (int(f), float(value), gain)
    return best[0], best[1]


def _grow(x, y, config: ForestConfig, rng, depth: int) -> TreeNode:
    n, d = x.shape
    pure = np.all(y == y[0])
    depth_stop = config.max_depth is not None and depth >= config.max_depth
    if pure or depth_stop or n < 2 * config.min_samples_leaf:
        return TreeNode(leaf_value=int(y.sum() * 2 > n))
    k = config.n_split_features(d)
    feature_ids = np.sort(rng.choice(d, size=k, replace=False))
    feature, threshold = _best_split(x, y, feature_ids, config.min_samples_leaf)
    if feature is None:
        return TreeNode(leaf_value=int(y.sum() * 2 > n))
    mask = x[:, feature] <= threshold
    left = _grow(x[mask], y[mask], config, rng, depth + 1)
    right = _grow(x[~mask], y[~mask], config, rng, depth + 1)
    return TreeNode(feature=feature, threshold=threshold, left=left, right=right)


def _tree_vote(node: TreeNode, row: np.ndarray) -> int:
    while node.feature != -1:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.leaf_value


@dataclass
class Forest:
    trees: list
    config: ForestConfig
    seed: int
    normalizer: Normalizer | None = None

    def vote_fraction(self, row: np.ndarray) -> float:
        return sum(_tree_vote(t, row) for t in self.trees) / len(self.trees)


def train_rf(x, y, config: ForestConfig = ForestConfig(), seed: int = 0) -> Forest:
    """Fit the ensemble on feature rows `x` (windows reduced upstream to
    time-mean vectors) and binary labels `y`."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("x must be (n, d) with one label per row")
    if np.unique(y).size < 2:
        raise ValueError("training data contains a single class")
    trees = []
    n = x.shape[0]
    for t in range(config.n_trees):
        rng = derive_rng(seed, "tree", t)
        if config.bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(_grow(x[idx], y[idx], config, rng, 0))
    return Forest(trees, config, seed)


def rf_predict(forest: Forest, x) -> np.ndarray | float:
    """Fraction of trees voting positive: values on the grid k/n_trees."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return forest.vote_fraction(x)
    return np.array([forest.vote_fraction(row) for row in x])


def window_features(windows, modalities=None) -> np.ndarray:
    """Stack per-window time-mean vectors (the forest's input space)."""
    rows = np.stack([np.asarray(w.features, dtype=np.float64).mean(axis=0)
                     for w in windows])
    if modalities:
        rows = rows[:, modality_columns(modalities)]
    return rows


# ---------------------------------------------------------------------------
# Textual persistence: preorder `feature,threshold,left,right,leaf_value`
# ---------------------------------------------------------------------------

def _serialize_tree(root: TreeNode) -> list:
    nodes = []

    def visit(node) -> int:
        my_idx = len(nodes)
        nodes.append(None)
        if node.feature == -1:
            nodes[my_idx] = f"-1,0,-1,-1,{node.leaf_value}"
        else:
            left = visit(node.left)
            right = visit(node.right)
            nodes[my_idx] = f"{node.feature},{node.threshold:.17g},{left},{right},"
        return my_idx

    visit(root)
    return nodes


def save_forest(forest: Forest, path, metadata: dict | None = None) -> None:
    lines = ["RPNET-FOREST v1"]
    meta = {"family": "rf", "n_trees": forest.config.n_trees, "seed": forest.seed}
    meta.update(metadata or {})
    for key, value in meta.items():
        lines.append(f"# {key} {value}")
    for t, tree in enumerate(forest.trees):
        nodes = _serialize_tree(tree)
        lines.append(f"tree {t} {len(nodes)}")
        lines.extend(nodes)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_forest(path, config: ForestConfig | None = None) -> Forest:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != "RPNET-FOREST v1":
        raise ValueError(f"not an RPNET-FOREST v1 file: {path}")
    i = 1
    meta = {}
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition(" ")
        meta[key] = value
        i += 1
    trees = []
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        _, _, count = lines[i].split()
        count = int(count)
        raw = [lines[i + 1 + k].split(",") for k in range(count)]
        nodes = [TreeNode() for _ in range(count)]
        for k, parts in enumerate(raw):
            feature = int(parts[0])
            if feature == -1:
                nodes[k].leaf_value = int(parts[4])
            else:
                nodes[k].feature = feature
                nodes[k].threshold = float(parts[1])
                nodes[k].left = nodes[int(parts[2])]
                nodes[k].right = nodes[int(parts[3])]
        trees.append(nodes[0])
        i += 1 + count
    cfg = config or ForestConfig(n_trees=int(meta.get("n_trees", len(trees))))
    return Forest(trees, cfg, int(meta.get("seed", 0)))
