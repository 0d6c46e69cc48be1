"""Random forest conditional density estimation (CDE).

Trees are grown with a split criterion that minimizes the CDE loss of a
cosine-basis expansion of the response. A query density is a Gaussian
kernel mixture over the training responses, weighted by how often each
training point shares a leaf with the query.
"""

from __future__ import annotations

import io
import json
import warnings
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid
from scipy.special import ndtr

from .errors import (
    ConfigInvalid,
    DegenerateResponse,
    EmptyHoldout,
    EmptyWeights,
    TooFewPoints,
)

FORMAT_VERSION = "tradeflag-cdeforest/1"
SILVERMAN = 1.06
_SQRT2PI = np.sqrt(2.0 * np.pi)
# pairs (queries x support) handled per chunk in batched queries
_CHUNK_NNZ = 4_000_000


@dataclass(frozen=True)
class CdeForestParams:
    n_trees: int = 100
    min_leaf_size: int = 50
    n_basis: int = 15
    mtry: int | None = None
    bootstrap: bool = True
    bandwidth: float | None = None  # None selects the weighted Silverman rule
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigInvalid("n_trees must be >= 1")
        if self.min_leaf_size < 2:
            raise ConfigInvalid("min_leaf_size must be >= 2")
        if self.n_basis < 1:
            raise ConfigInvalid("n_basis must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigInvalid("mtry must be >= 1")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigInvalid("fixed bandwidth must be > 0")

    @property
    def bandwidth_rule(self) -> str:
        return "WeightedSilverman" if self.bandwidth is None else f"Fixed({self.bandwidth})"


def cosine_basis(u: np.ndarray, n_basis: int) -> np.ndarray:
    """Orthonormal cosine basis sqrt(2) cos(j pi u), j = 1..n_basis, on [0, 1]."""
    j = np.arange(1, n_basis + 1)
    return np.sqrt(2.0) * np.cos(np.pi * np.outer(u, j))


def _best_split(xcol, basis_rows, min_leaf):
    """Best threshold on one feature. Returns (score, threshold) or None."""
    m = xcol.shape[0]
    order = np.argsort(xcol, kind="stable")
    xs = xcol[order]
    cs = np.cumsum(basis_rows[order], axis=0)
    total = cs[-1]
    s = np.arange(min_leaf, m - min_leaf + 1)
    if s.size == 0:
        return None
    # only between distinct covariate values
    s = s[xs[s - 1] < xs[s]]
    if s.size == 0:
        return None
    left = cs[s - 1]
    right = total - left
    score = (np.sum(left * left, axis=1) / s
             + np.sum(right * right, axis=1) / (m - s))
    k = int(np.argmax(score))
    pos = s[k]
    return float(score[k]), 0.5 * (xs[pos - 1] + xs[pos])


class _TreeBuilder:
    def __init__(self, x, basis, params, rng):
        self.x = x
        self.basis = basis
        self.params = params
        self.rng = rng
        self.feature, self.threshold, self.left, self.right, self.leaf = [], [], [], [], []
        self.leaves = []  # list of arrays of sample positions (with repeats)

    def _new_node(self):
        for arr in (self.feature, self.left, self.right, self.leaf):
            arr.append(-1)
        self.threshold.append(np.nan)
        return len(self.feature) - 1

    def _make_leaf(self, node, idx):
        self.leaf[node] = len(self.leaves)
        self.leaves.append(idx)

    def grow(self, idx):
        d = self.x.shape[1]
        min_leaf = self.params.min_leaf_size
        mtry = d if self.params.mtry is None else min(self.params.mtry, d)
        root = self._new_node()
        stack = [(root, idx)]
        while stack:
            node, idx = stack.pop()
            m = idx.shape[0]
            if self.basis is None or m < 2 * min_leaf:
                self._make_leaf(node, idx)
                continue
            rows = self.basis[idx]
            total = rows.sum(axis=0)
            parent = float(total @ total) / m
            feats = np.arange(d) if mtry == d else np.sort(self.rng.choice(d, mtry, replace=False))
            best = None
            for f in feats:
                res = _best_split(self.x[idx, f], rows, min_leaf)
                if res is not None and (best is None or res[0] > best[0]):
                    best = (res[0], res[1], f)
            if best is None or best[0] - parent <= 1e-12 * max(parent, 1.0):
                self._make_leaf(node, idx)
                continue
            _, thr, f = best
            go_left = self.x[idx, f] <= thr
            lnode, rnode = self._new_node(), self._new_node()
            self.feature[node] = int(f)
            self.threshold[node] = thr
            self.left[node], self.right[node] = lnode, rnode
            # push right first so the left subtree is numbered first
            stack.append((rnode, idx[~go_left]))
            stack.append((lnode, idx[go_left]))


@dataclass
class CdeForest:
    params: CdeForestParams
    x_train: np.ndarray
    z_train: np.ndarray
    z_min: float
    z_max: float
    tree_root: np.ndarray
    node_feature: np.ndarray
    node_threshold: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_leaf: np.ndarray
    leaf_ptr: np.ndarray
    leaf_members: np.ndarray
    leaf_counts: np.ndarray
    _leaf_matrix: sp.csr_matrix | None = field(default=None, repr=False, compare=False)
    _inbag: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_trees(self) -> int:
        return int(self.tree_root.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(self.leaf_ptr.shape[0] - 1)

    @property
    def leaf_size(self) -> np.ndarray:
        return np.add.reduceat(self.leaf_counts, self.leaf_ptr[:-1]) if self.n_leaves else np.zeros(0)

    def tree_nodes(self, t: int) -> np.ndarray:
        """Global node ids belonging to tree ``t``."""
        start = self.tree_root[t]
        stop = self.tree_root[t + 1] if t + 1 < self.n_trees else self.node_feature.shape[0]
        return np.arange(start, stop)

    def root_split(self, t: int = 0) -> tuple[int, float] | None:
        r = self.tree_root[t]
        if self.node_feature[r] < 0:
            return None
        return int(self.node_feature[r]), float(self.node_threshold[r])

    def leaf_matrix(self) -> sp.csr_matrix:
        """Sparse (n_leaves, n_train) matrix of in-bag counts over leaf size."""
        if self._leaf_matrix is None:
            sizes = self.leaf_size
            per_entry = np.repeat(sizes, np.diff(self.leaf_ptr))
            data = self.leaf_counts / per_entry
            self._leaf_matrix = sp.csr_matrix(
                (data, self.leaf_members, self.leaf_ptr),
                shape=(self.n_leaves, self.z_train.shape[0]))
        return self._leaf_matrix

    def apply(self, xq) -> np.ndarray:
        """Global leaf id reached in every tree: array of shape (n_queries, n_trees)."""
        xq = _as_2d(xq, self.x_train.shape[1])
        node = np.broadcast_to(self.tree_root, (xq.shape[0], self.n_trees)).copy()
        rows = np.broadcast_to(np.arange(xq.shape[0])[:, None], node.shape)
        while True:
            feat = self.node_feature[node]
            active = feat >= 0
            if not active.any():
                break
            na = node[active]
            go_left = xq[rows[active], feat[active]] <= self.node_threshold[na]
            node[active] = np.where(go_left, self.node_left[na], self.node_right[na])
        return self.node_leaf[node]

    def inbag(self) -> np.ndarray:
        """Boolean (n_train, n_trees) matrix: point i was drawn for tree t."""
        if self._inbag is None:
            node_tree = np.zeros(self.node_feature.shape[0], dtype=np.int64)
            for t in range(self.n_trees):
                node_tree[self.tree_nodes(t)] = t
            leaf_tree = np.zeros(self.n_leaves, dtype=np.int64)
            is_leaf = self.node_leaf >= 0
            leaf_tree[self.node_leaf[is_leaf]] = node_tree[is_leaf]
            entry_tree = np.repeat(leaf_tree, np.diff(self.leaf_ptr))
            bag = np.zeros((self.z_train.shape[0], self.n_trees), dtype=bool)
            bag[self.leaf_members, entry_tree] = True
            self._inbag = bag
        return self._inbag

    def _weights(self, leaves: np.ndarray, use: np.ndarray | None = None) -> sp.csr_matrix:
        """Normalized weight rows; ``use`` masks which trees count per query."""
        nq = leaves.shape[0]
        if use is None:
            indicator = sp.csr_matrix(
                (np.ones(leaves.size), leaves.ravel(), np.arange(0, leaves.size + 1, self.n_trees)),
                shape=(nq, self.n_leaves))
        else:
            per_row = use.sum(axis=1)
            indptr = np.concatenate([[0], np.cumsum(per_row)])
            indicator = sp.csr_matrix((np.ones(int(indptr[-1])), leaves[use], indptr),
                                      shape=(nq, self.n_leaves))
        W = (indicator @ self.leaf_matrix()).tocsr()
        W.sum_duplicates()
        W.sort_indices()
        row_sum = np.asarray(W.sum(axis=1)).ravel()
        if np.any(row_sum <= 0):
            raise EmptyWeights("query matched only empty leaves")
        W = sp.diags(1.0 / row_sum) @ W
        return W.tocsr()

    def _bandwidths(self, W: sp.csr_matrix) -> np.ndarray:
        if self.params.bandwidth is not None:
            return np.full(W.shape[0], float(self.params.bandwidth))
        rowid = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
        zi = self.z_train[W.indices]
        w = W.data
        mean = np.bincount(rowid, w * zi, minlength=W.shape[0])
        var = np.bincount(rowid, w * (zi - mean[rowid]) ** 2, minlength=W.shape[0])
        n_eff = 1.0 / np.bincount(rowid, w * w, minlength=W.shape[0])
        sd = np.sqrt(np.maximum(var, 0.0))
        h = SILVERMAN * sd * n_eff ** (-0.2)
        bad = ~(h > 0)
        if bad.any():
            h[bad] = self._fallback_bandwidth(n_eff[bad], mean[bad])
        return h

    def _fallback_bandwidth(self, n_eff, center):
        sd = float(np.std(self.z_train))
        if sd > 0:
            return SILVERMAN * sd * n_eff ** (-0.2)
        return 1e-3 * np.maximum(1.0, np.abs(center))

    def _oob_mask(self, train_index) -> np.ndarray:
        train_index = np.asarray(train_index, dtype=np.int64).ravel()
        use = np.ones((train_index.shape[0], self.n_trees), dtype=bool)
        known = train_index >= 0
        if known.any():
            oob = ~self.inbag()[train_index[known]]
            # a point drawn by every tree falls back to the full forest
            oob[~oob.any(axis=1)] = True
            use[known] = oob
        return use

    def _batches(self, xq, train_index=None):
        """Yield (weights, bandwidths, query positions, row of each query in weights).

        Without ``train_index`` queries sharing a leaf signature share one
        weight row. With it, rows whose index is >= 0 are scored out-of-bag:
        only trees that did not draw that training point contribute.
        """
        leaves = self.apply(xq)
        approx_nnz = max(1, self.n_trees * int(np.mean(self.leaf_size)) if self.n_leaves else 1)
        step = max(1, _CHUNK_NNZ // approx_nnz)
        if train_index is not None:
            use = self._oob_mask(train_index)
            if use.shape[0] != leaves.shape[0]:
                raise ConfigInvalid("train_index must align with the queries")
            for start in range(0, leaves.shape[0], step):
                stop = min(start + step, leaves.shape[0])
                W = self._weights(leaves[start:stop], use[start:stop])
                yield W, self._bandwidths(W), np.arange(start, stop), np.arange(stop - start)
            return
        uniq, inverse = np.unique(leaves, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(uniq.shape[0] + 1))
        for start in range(0, uniq.shape[0], step):
            stop = min(start + step, uniq.shape[0])
            W = self._weights(uniq[start:stop])
            h = self._bandwidths(W)
            qpos = order[bounds[start]:bounds[stop]]
            yield W, h, qpos, inverse[qpos] - start

    def predict_density(self, x_query, train_index: int = -1) -> "DensityEstimate":
        return predict_density(self, x_query, train_index)

    def tail_probabilities(self, xq, t, train_index=None) -> np.ndarray:
        """Upper-tail probability Pr[z > t_i | x_i] for many queries at once."""
        xq = _as_2d(xq, self.x_train.shape[1])
        t = np.broadcast_to(np.asarray(t, dtype=float), (xq.shape[0],))
        return self._mixture_eval(xq, t, upper=True, train_index=train_index)

    def cdf(self, xq, z, train_index=None) -> np.ndarray:
        xq = _as_2d(xq, self.x_train.shape[1])
        z = np.broadcast_to(np.asarray(z, dtype=float), (xq.shape[0],))
        return self._mixture_eval(xq, z, upper=False, train_index=train_index)

    def pdf(self, xq, z, train_index=None) -> np.ndarray:
        xq = _as_2d(xq, self.x_train.shape[1])
        z = np.broadcast_to(np.asarray(z, dtype=float), (xq.shape[0],))
        out = np.empty(xq.shape[0])
        for W, h, qpos, local in self._batches(xq, train_index):
            Wq = W[local]
            rowid = np.repeat(np.arange(Wq.shape[0]), np.diff(Wq.indptr))
            hh = h[local][rowid]
            u = (z[qpos][rowid] - self.z_train[Wq.indices]) / hh
            vals = Wq.data * np.exp(-0.5 * u * u) / (_SQRT2PI * hh)
            out[qpos] = np.bincount(rowid, vals, minlength=Wq.shape[0])
        return out

    def _mixture_eval(self, xq, t, upper, train_index=None):
        out = np.empty(xq.shape[0])
        for W, h, qpos, local in self._batches(xq, train_index):
            Wq = W[local]
            rowid = np.repeat(np.arange(Wq.shape[0]), np.diff(Wq.indptr))
            u = (self.z_train[Wq.indices] - t[qpos][rowid]) / h[local][rowid]
            if not upper:
                u = -u
            out[qpos] = np.bincount(rowid, Wq.data * ndtr(u), minlength=Wq.shape[0])
        return np.clip(out, 0.0, 1.0)

    def quantiles(self, xq, q, iterations: int = 80, train_index=None) -> np.ndarray:
        """Quantile ``q`` of each query's density, by vectorized bisection."""
        xq = _as_2d(xq, self.x_train.shape[1])
        q = np.broadcast_to(np.asarray(q, dtype=float), (xq.shape[0],))
        out = np.empty(xq.shape[0])
        for W, h, qpos, local in self._batches(xq, train_index):
            Wq = W[local]
            rowid = np.repeat(np.arange(Wq.shape[0]), np.diff(Wq.indptr))
            zi = self.z_train[Wq.indices]
            hq = h[local]
            lo = np.full(Wq.shape[0], self.z_min) - 12 * hq
            hi = np.full(Wq.shape[0], self.z_max) + 12 * hq
            target = q[qpos]
            for _ in range(iterations):
                mid = 0.5 * (lo + hi)
                cdf = np.bincount(rowid, Wq.data * ndtr((mid[rowid] - zi) / hq[rowid]),
                                  minlength=Wq.shape[0])
                below = cdf < target
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            out[qpos] = 0.5 * (lo + hi)
        return out

    # -- serialization -------------------------------------------------

    _ARRAYS = ("x_train", "z_train", "tree_root", "node_feature", "node_threshold",
               "node_left", "node_right", "node_leaf", "leaf_ptr", "leaf_members", "leaf_counts")

    def save(self, path) -> None:
        """Write a deterministic zip archive (fixed timestamps) of the forest."""
        meta = {"format": FORMAT_VERSION, "params": asdict(self.params),
                "z_min": self.z_min, "z_max": self.z_max}
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            zf.writestr(_zipinfo("meta.json"), json.dumps(meta, sort_keys=True, indent=2))
            for name in self._ARRAYS:
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(getattr(self, name)),
                                          allow_pickle=False)
                zf.writestr(_zipinfo(name + ".npy"), buf.getvalue())

    @classmethod
    def load(cls, path) -> "CdeForest":
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != FORMAT_VERSION:
                raise ConfigInvalid(f"unsupported forest format {meta.get('format')!r}")
            arrays = {name: np.lib.format.read_array(io.BytesIO(zf.read(name + ".npy")),
                                                     allow_pickle=False)
                      for name in cls._ARRAYS}
        return cls(params=CdeForestParams(**meta["params"]), z_min=meta["z_min"],
                   z_max=meta["z_max"], **arrays)


def _zipinfo(name):
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


def _as_2d(x, d=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if d in (None, 1) else x.reshape(1, -1)
    if d is not None and x.shape[1] != d:
        raise ConfigInvalid(f"query has {x.shape[1]} covariates, forest expects {d}")
    return x


def fit_forest(x, z, params: CdeForestParams | None = None) -> CdeForest:
    """Grow a CDE forest on covariates ``x`` and responses ``z``.

    Parameters
    ----------
    x : array of shape (n,) or (n, d)
    z : array of shape (n,)
    params : CdeForestParams, optional

    Notes
    -----
    Responses are rescaled to [0, 1] with the training min/max before the
    cosine basis is applied. Candidate thresholds are midpoints between
    consecutive distinct covariate values, and a split must leave at least
    ``min_leaf_size`` in-bag draws on each side.
    """
    params = params or CdeForestParams()
    x = _as_2d(x)
    z = np.asarray(z, dtype=float).ravel()
    n = z.shape[0]
    if x.shape[0] != n:
        raise ConfigInvalid(f"x has {x.shape[0]} rows, z has {n}")
    if n < 2 * params.min_leaf_size:
        raise TooFewPoints(f"{n} points < 2 * min_leaf_size = {2 * params.min_leaf_size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ConfigInvalid("covariates and responses must be finite")

    z_min, z_max = float(z.min()), float(z.max())
    if z_max > z_min:
        basis = cosine_basis((z - z_min) / (z_max - z_min), params.n_basis)
    else:
        warnings.warn("all responses are equal; trees will be single leaves", DegenerateResponse)
        basis = None

    seeds = np.random.SeedSequence(params.rng_seed).spawn(params.n_trees)
    feature, threshold, left, right, leaf_of_node, roots = [], [], [], [], [], []
    leaf_ptr, members, counts = [0], [], []
    n_nodes = n_leaves = 0
    for t in range(params.n_trees):
        rng = np.random.default_rng(seeds[t])
        idx = rng.integers(0, n, n) if params.bootstrap else np.arange(n)
        builder = _TreeBuilder(x, basis, params, rng)
        builder.grow(idx)
        roots.append(n_nodes)
        f = np.asarray(builder.feature, dtype=np.int64)
        lch = np.asarray(builder.left, dtype=np.int64)
        rch = np.asarray(builder.right, dtype=np.int64)
        lf = np.asarray(builder.leaf, dtype=np.int64)
        internal = f >= 0
        lch[internal] += n_nodes
        rch[internal] += n_nodes
        lf[~internal] += n_leaves
        feature.append(f)
        threshold.append(np.asarray(builder.threshold, dtype=float))
        left.append(lch)
        right.append(rch)
        leaf_of_node.append(lf)
        for leaf_idx in builder.leaves:
            u, c = np.unique(leaf_idx, return_counts=True)
            members.append(u)
            counts.append(c)
            leaf_ptr.append(leaf_ptr[-1] + u.shape[0])
        n_nodes += f.shape[0]
        n_leaves += len(builder.leaves)

    return CdeForest(
        params=params,
        x_train=x,
        z_train=z,
        z_min=z_min,
        z_max=z_max,
        tree_root=np.asarray(roots, dtype=np.int64),
        node_feature=np.concatenate(feature),
        node_threshold=np.concatenate(threshold),
        node_left=np.concatenate(left),
        node_right=np.concatenate(right),
        node_leaf=np.concatenate(leaf_of_node),
        leaf_ptr=np.asarray(leaf_ptr, dtype=np.int64),
        leaf_members=np.concatenate(members).astype(np.int64),
        leaf_counts=np.concatenate(counts).astype(float),
    )


@dataclass(frozen=True)
class DensityEstimate:
    """Gaussian kernel mixture sum_i w_i N(z_i, h^2) for one query."""

    x: np.ndarray
    support: np.ndarray  # training indices with nonzero weight
    weights: np.ndarray
    z: np.ndarray
    bandwidth: float

    def padded_range(self, pad: float = 6.0) -> tuple[float, float]:
        return (float(self.z.min() - pad * self.bandwidth),
                float(self.z.max() + pad * self.bandwidth))

    def pdf(self, grid) -> np.ndarray:
        g = np.asarray(grid, dtype=float)
        u = (g[..., None] - self.z) / self.bandwidth
        return np.exp(-0.5 * u * u) @ self.weights / (_SQRT2PI * self.bandwidth)

    def cdf(self, t) -> np.ndarray | float:
        tt = np.asarray(t, dtype=float)
        out = ndtr((tt[..., None] - self.z) / self.bandwidth) @ self.weights
        return float(np.clip(out, 0, 1)) if out.ndim == 0 else np.clip(out, 0, 1)

    def tail_probability(self, t) -> float:
        return tail_probability(self, t)

    def quantile(self, q: float, iterations: int = 100) -> float:
        lo, hi = self.padded_range(12.0)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def grid(self, n_points: int = 10_000, pad: float = 6.0):
        lo, hi = self.padded_range(pad)
        g = np.linspace(lo, hi, n_points)
        return g, self.pdf(g)

    def grid_integral(self, n_points: int = 10_000, pad: float = 6.0) -> float:
        g, f = self.grid(n_points, pad)
        return float(trapezoid(f, g))


def predict_density(forest: CdeForest, x_query, train_index: int = -1) -> DensityEstimate:
    """Leaf-weighted kernel density of the response at one covariate value.

    Pass ``train_index`` >= 0 to score a training point out-of-bag.
    """
    xq = _as_2d(x_query, forest.x_train.shape[1])
    if xq.shape[0] != 1:
        raise ConfigInvalid("predict_density takes a single query; use CdeForest methods for batches")
    use = forest._oob_mask([train_index]) if train_index >= 0 else None
    W = forest._weights(forest.apply(xq), use)
    h = forest._bandwidths(W)[0]
    support = W.indices.copy()
    return DensityEstimate(x=xq[0].copy(), support=support, weights=W.data.copy(),
                           z=forest.z_train[support], bandwidth=float(h))


def tail_probability(density: DensityEstimate, t: float) -> float:
    """Exact upper tail Pr[r > t] of the kernel mixture."""
    p = float(density.weights @ ndtr((density.z - t) / density.bandwidth))
    return min(max(p, 0.0), 1.0)


def _self_overlap(density: DensityEstimate) -> float:
    # integral of f^2: sum_ij w_i w_j N(z_i - z_j; 0, 2 h^2)
    s2 = 2.0 * density.bandwidth ** 2
    d = density.z[:, None] - density.z[None, :]
    k = np.exp(-0.5 * d * d / s2) / np.sqrt(2 * np.pi * s2)
    return float(density.weights @ k @ density.weights)


def cde_loss(forest: CdeForest, x_held, z_held, densities=None) -> float:
    """Held-out CDE loss: mean of int f^2 minus twice the mean density at the pair.

    ``densities`` may supply precomputed estimates (one per held-out row).
    """
    x_held = _as_2d(x_held, forest.x_train.shape[1])
    z_held = np.asarray(z_held, dtype=float).ravel()
    if z_held.shape[0] == 0:
        raise EmptyHoldout("held-out set is empty")
    if densities is None:
        densities = [predict_density(forest, xi) for xi in x_held]
    first = np.mean([_self_overlap(d) for d in densities])
    second = np.mean([float(d.pdf(zi)) for d, zi in zip(densities, z_held)])
    return float(first - 2.0 * second)
