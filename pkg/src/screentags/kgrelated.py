"""Related-tag expansion over a knowledge graph.

All relations collapse to a single directed ``related_to`` edge.  A small
convolutional scorer learns entity/relation embeddings jointly with its
weights: the (head, relation, tail) embeddings are stacked into a 3 x d
matrix, ``f`` filters of shape 3 x 3 slide along the embedding axis, each
filter's responses are max-pooled, and a fully-connected layer followed by a
logistic squash yields the plausibility score in (0, 1).  Training is plain
SGD on binary cross-entropy with one corrupted triplet per positive.
"""

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import numkernel
from .errors import ConfigError, EntityNotFound, FormatError, InvalidInputError, ParseError, SamplingError

RELATED_TO = "related_to"
MODEL_MAGIC = b"TKGM"
MODEL_VERSION = 1


class Triplet(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class KnowledgeGraph:
    entities: List[str]
    relations: List[str]
    triplets: List[Triplet]
    _by_name: Dict[str, int] = field(init=False, repr=False, compare=False)
    _by_folded: Dict[str, int] = field(init=False, repr=False, compare=False)
    _set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._by_name = {n: i for i, n in enumerate(self.entities)}
        self._by_folded = {}
        for i, n in enumerate(self.entities):
            self._by_folded.setdefault(n.casefold(), i)
        self._set = frozenset(self.triplets)

    @property
    def directed(self):
        return True

    def __contains__(self, t):
        return tuple(t) in self._set

    def find(self, name):
        """Entity id by name: exact match first, then case-insensitive."""
        if name in self._by_name:
            return self._by_name[name]
        key = name.strip().casefold()
        if key in self._by_folded:
            return self._by_folded[key]
        raise EntityNotFound(name)

    def named(self, t):
        return self.entities[t.head], self.relations[t.relation], self.entities[t.tail]

    def named_triplets(self):
        return [self.named(t) for t in self.triplets]


def _rows(source):
    if isinstance(source, KnowledgeGraph):
        yield from ((0, row) for row in source.named_triplets())
        return
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source
    for n, line in enumerate(lines, start=1):
        if isinstance(line, (tuple, list)):
            if len(line) != 3:
                raise ParseError("expected (head, relation, tail)", n)
            yield n, tuple(str(v) for v in line)
            continue
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise ParseError("expected head<TAB>relation<TAB>tail", n)
        yield n, tuple(p.strip() for p in parts)


def load_and_collapse(source, allow_self_loops=False):
    """Read triplets (TSV path, iterable of lines/tuples, or a graph) and map
    every relation to ``related_to``, keeping direction and dropping duplicates."""
    entities, ids, seen, triplets = [], {}, set(), []

    def eid(name):
        if name not in ids:
            ids[name] = len(entities)
            entities.append(name)
        return ids[name]

    for _, (h, _rel, t) in _rows(source):
        if h == t and not allow_self_loops:
            continue
        trip = Triplet(eid(h), 0, eid(t))
        if trip not in seen:
            seen.add(trip)
            triplets.append(trip)
    return KnowledgeGraph(entities, [RELATED_TO], triplets)


def negative_sample(s, g, rng, max_tries=10):
    """Corrupt exactly one endpoint of ``s`` with a uniformly chosen other entity.

    Draws that land on a known triplet are redrawn (same side) up to
    ``max_tries`` times, after which the last draw is accepted.
    """
    n = len(g.entities)
    if n < 2:
        raise SamplingError("negative sampling needs at least two entities")
    corrupt_head = rng.random() < 0.5
    original = s.head if corrupt_head else s.tail
    for _ in range(max_tries):
        e = int(rng.integers(n - 1))
        e += e >= original
        cand = Triplet(e, s.relation, s.tail) if corrupt_head else Triplet(s.head, s.relation, e)
        if cand not in g:
            break
    return cand


# -- model -------------------------------------------------------------------

def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass
class TripletModel:
    entity_embeddings: np.ndarray  # E x d
    relation_embeddings: np.ndarray  # L x d
    conv_weights: np.ndarray  # f x 3 x 3
    conv_bias: np.ndarray  # f
    fc_weights: np.ndarray  # f
    fc_bias: float
    entity_names: List[str] = field(default_factory=list)
    relation_names: List[str] = field(default_factory=lambda: [RELATED_TO])

    PARAMS = ("entity_embeddings", "relation_embeddings", "conv_weights", "conv_bias", "fc_weights", "fc_bias")

    @property
    def dim(self):
        return self.entity_embeddings.shape[1]

    @property
    def n_filters(self):
        return self.conv_weights.shape[0]

    def params(self):
        return {k: np.asarray(getattr(self, k)) for k in self.PARAMS}

    def astype(self, dtype):
        kw = {k: np.asarray(v, dtype=dtype) for k, v in self.params().items()}
        kw["fc_bias"] = dtype(kw["fc_bias"])
        return TripletModel(**kw, entity_names=list(self.entity_names), relation_names=list(self.relation_names))

    def _check_ids(self, heads, rels, tails):
        E, L = len(self.entity_embeddings), len(self.relation_embeddings)
        for arr, limit, what in ((heads, E, "entity"), (tails, E, "entity"), (rels, L, "relation")):
            if arr.size and (arr.min() < 0 or arr.max() >= limit):
                raise EntityNotFound(f"{what} id out of range")

    def score_batch(self, heads, rels, tails):
        """f32 scores via the vector kernels; one score per (h, l, t) row."""
        heads, rels, tails = (np.atleast_1d(np.asarray(a, dtype=np.int64)) for a in (heads, rels, tails))
        heads, rels, tails = np.broadcast_arrays(heads, rels, tails)
        self._check_ids(heads, rels, tails)
        ent = np.asarray(self.entity_embeddings, dtype=np.float32)
        rel = np.asarray(self.relation_embeddings, dtype=np.float32)
        X = np.stack([ent[heads], rel[rels], ent[tails]], axis=1)  # B x 3 x d
        B, _, d = X.shape
        patches = sliding_window_view(X, 3, axis=2).transpose(0, 2, 1, 3).reshape(B * (d - 2), 9)
        W = np.asarray(self.conv_weights, dtype=np.float32).reshape(-1, 9)
        bias = np.asarray(self.conv_bias, dtype=np.float32)
        pooled = np.empty((B, len(W)), dtype=np.float32)
        for k in range(len(W)):
            conv = numkernel.matvec(patches, W[k]) + bias[k]
            pooled[:, k] = conv.reshape(B, d - 2).max(axis=1)
        z = numkernel.matvec(pooled, np.asarray(self.fc_weights, dtype=np.float32)) + np.float32(self.fc_bias)
        return _sigmoid(z.astype(np.float64)).astype(np.float32)

    def score(self, t):
        return float(self.score_batch([t[0]], [t[1]], [t[2]])[0])

    # -- persistence: little-endian header, names, then f32 blocks
    def to_bytes(self):
        out = io.BytesIO()
        E, d = self.entity_embeddings.shape
        L = self.relation_embeddings.shape[0]
        out.write(MODEL_MAGIC)
        out.write(struct.pack("<BIIII", MODEL_VERSION, E, L, d, self.n_filters))
        for name in list(self.entity_names) + list(self.relation_names):
            raw = name.encode("utf-8")
            out.write(struct.pack("<H", len(raw)))
            out.write(raw)
        for key in self.PARAMS:
            out.write(np.asarray(getattr(self, key), dtype="<f4").tobytes())
        return out.getvalue()

    @classmethod
    def from_bytes(cls, data):
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(data):
                raise FormatError("truncated model file", pos)
            chunk = data[pos : pos + n]
            pos += n
            return chunk

        if take(4) != MODEL_MAGIC:
            raise FormatError("bad magic, not a triplet model", 0)
        version, E, L, d, f = struct.unpack("<BIIII", take(17))
        if version != MODEL_VERSION:
            raise FormatError(f"unsupported model version {version} (expected {MODEL_VERSION})", 4)
        if d < 3 or f < 1:
            raise FormatError(f"invalid dimensions d={d} f={f}", 5)
        names = []
        for _ in range(E + L):
            (n,) = struct.unpack("<H", take(2))
            try:
                names.append(take(n).decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise FormatError("invalid entity name", pos) from exc
        shapes = [(E, d), (L, d), (f, 3, 3), (f,), (f,), ()]
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape)) if shape else 1
            arrays.append(np.frombuffer(take(4 * count), dtype="<f4").astype(np.float32).reshape(shape))
        if pos != len(data):
            raise FormatError("trailing bytes after parameters", pos)
        arrays[-1] = np.float32(arrays[-1])
        return cls(*arrays, entity_names=names[:E], relation_names=names[E:])

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def init_model(n_entities, n_relations, dim=50, n_filters=32, seed=0, entity_names=(), relation_names=(RELATED_TO,)):
    if dim < 3 or n_filters < 1 or n_entities < 1 or n_relations < 1:
        raise ConfigError(f"invalid model shape: dim={dim} filters={n_filters}")
    rng = np.random.default_rng(seed)
    bound = 0.5 / math.sqrt(dim)
    return TripletModel(
        entity_embeddings=rng.uniform(-bound, bound, (n_entities, dim)),
        relation_embeddings=rng.uniform(-bound, bound, (n_relations, dim)),
        conv_weights=rng.uniform(-bound, bound, (n_filters, 3, 3)),
        conv_bias=np.zeros(n_filters),
        fc_weights=rng.uniform(-bound, bound, n_filters),
        fc_bias=0.0,
        entity_names=list(entity_names),
        relation_names=list(relation_names),
    )


def forward_backward(m, heads, rels, tails, labels):
    """Mean binary cross-entropy over the batch and its gradients (float64)."""
    ent, rel = m.entity_embeddings, m.relation_embeddings
    W = np.asarray(m.conv_weights, dtype=np.float64).reshape(-1, 9)
    X = np.stack([ent[heads], rel[rels], ent[tails]], axis=1).astype(np.float64)
    B, _, d = X.shape
    P = sliding_window_view(X, 3, axis=2).transpose(0, 2, 1, 3).reshape(B, d - 2, 9)
    C = P @ W.T + m.conv_bias  # B x (d-2) x f
    arg = C.argmax(axis=1)  # B x f
    pooled = np.take_along_axis(C, arg[:, None, :], axis=1)[:, 0, :]
    z = pooled @ m.fc_weights + m.fc_bias
    y = np.asarray(labels, dtype=np.float64)
    # softplus(z) - y z, written to stay finite for large |z|
    loss = float(np.mean(np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z))) - y * z))

    dz = (_sigmoid(z) - y) / B
    grads = {"fc_weights": pooled.T @ dz, "fc_bias": float(dz.sum())}
    dpooled = dz[:, None] * m.fc_weights[None, :]
    dC = np.zeros_like(C)
    np.put_along_axis(dC, arg[:, None, :], dpooled[:, None, :], axis=1)
    grads["conv_weights"] = np.einsum("bjf,bjn->fn", dC, P).reshape(-1, 3, 3)
    grads["conv_bias"] = dC.sum(axis=(0, 1))
    dP = (dC @ W).reshape(B, d - 2, 3, 3)  # [b, j, row, w]
    dX = np.zeros_like(X)
    for w in range(3):
        dX[:, :, w : w + d - 2] += dP[:, :, :, w].transpose(0, 2, 1)
    d_ent = np.zeros_like(ent, dtype=np.float64)
    d_rel = np.zeros_like(rel, dtype=np.float64)
    np.add.at(d_ent, heads, dX[:, 0])
    np.add.at(d_rel, rels, dX[:, 1])
    np.add.at(d_ent, tails, dX[:, 2])
    grads["entity_embeddings"] = d_ent
    grads["relation_embeddings"] = d_rel
    return loss, grads


class TrainResult(NamedTuple):
    model: TripletModel
    losses: List[float]


def train(g, dim=50, n_filters=32, lr=0.5, epochs=200, seed=0, batch_size=16):
    """SGD on positives from ``g`` plus one negative each; returns the f32 model
    and the per-epoch mean loss.  Identical arguments give identical traces."""
    if not g.triplets:
        raise ConfigError("graph has no triplets to train on")
    if lr <= 0 or epochs < 0 or batch_size < 1:
        raise ConfigError(f"invalid hyperparameters lr={lr} epochs={epochs} batch_size={batch_size}")
    m = init_model(len(g.entities), len(g.relations), dim, n_filters, seed, g.entities, g.relations)
    rng = np.random.default_rng([seed, 1])
    pos = np.array(g.triplets, dtype=np.int64)
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(pos))
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = pos[order[start : start + batch_size]]
            neg = np.array([negative_sample(Triplet(*t), g, rng) for t in batch], dtype=np.int64)
            both = np.concatenate([batch, neg])
            labels = np.concatenate([np.ones(len(batch)), np.zeros(len(neg))])
            loss, grads = forward_backward(m, both[:, 0], both[:, 1], both[:, 2], labels)
            total += loss * len(both)
            for key, grad in grads.items():
                setattr(m, key, getattr(m, key) - lr * grad)
        losses.append(total / (2 * len(pos)))
        if not all(np.isfinite(v).all() for v in m.params().values()):
            raise FloatingPointError("non-finite parameters after training epoch")
    return TrainResult(m.astype(np.float32), losses)


# -- evaluation and retrieval ---------------------------------------------------

class LinkPredictionReport(NamedTuple):
    mean_rank: float
    hits_at_10: float
    n_ranks: int
    protocol: str = "raw"


def pessimistic_rank(scores, true_index):
    """Count of candidates, the true one included, scoring at least as high as it."""
    return int(np.sum(scores >= scores[true_index]))


def link_prediction_eval(m, test, g=None):
    """Raw-setting mean rank and hits@10 over head and tail replacement."""
    test = list(test)
    if not test:
        raise InvalidInputError("empty test set")
    n = len(m.entity_embeddings)
    everyone = np.arange(n)
    ranks = []
    for h, l, t in test:
        tails = m.score_batch(h, l, everyone)
        ranks.append(pessimistic_rank(tails, t))
        heads = m.score_batch(everyone, l, t)
        ranks.append(pessimistic_rank(heads, h))
    ranks = np.array(ranks)
    return LinkPredictionReport(float(ranks.mean()), float(100.0 * np.mean(ranks <= 10)), len(ranks))


def related_tags(m, g, entity, k=10, both_directions=False):
    """Top-k entities x by score of (entity, related_to, x); ties by name."""
    if k <= 0:
        return []
    graph = g if g is not None else KnowledgeGraph(list(m.entity_names), list(m.relation_names), [])
    e = graph.find(entity)
    rel = graph.relations.index(RELATED_TO) if RELATED_TO in graph.relations else 0
    everyone = np.arange(len(m.entity_embeddings))
    scores = m.score_batch(e, rel, everyone).astype(np.float64)
    if both_directions:
        scores = np.maximum(scores, m.score_batch(everyone, rel, e).astype(np.float64))
    names = graph.entities
    ranked = sorted((i for i in everyone if i != e), key=lambda i: (-scores[i], names[i]))
    return [(names[i], float(scores[i])) for i in ranked[:k]]


def clustered_graph(n_entities=50, n_triplets=200, n_clusters=10, noise=0.1, seed=0):
    """Synthetic graph: mostly intra-cluster edges plus a fraction of random ones."""
    rng = np.random.default_rng(seed)
    cluster = np.arange(n_entities) % n_clusters
    names = [f"e{i:03d}" for i in range(n_entities)]
    intra = [(h, t) for h in range(n_entities) for t in range(n_entities) if h != t and cluster[h] == cluster[t]]
    inter = [(h, t) for h in range(n_entities) for t in range(n_entities) if cluster[h] != cluster[t]]
    n_noise = int(round(noise * n_triplets))
    n_intra = min(n_triplets - n_noise, len(intra))
    pick_intra = rng.choice(len(intra), n_intra, replace=False)
    pick_inter = rng.choice(len(inter), n_triplets - n_intra, replace=False)
    pairs = [intra[i] for i in sorted(pick_intra)] + [inter[i] for i in sorted(pick_inter)]
    rows = [(names[h], "linked", names[t]) for h, t in pairs]
    return load_and_collapse(rows), cluster


def split_graph(g, n_test, seed=0):
    """Hold out ``n_test`` triplets whose endpoints still appear in training."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(g.triplets))
    degree = np.zeros(len(g.entities), dtype=np.int64)
    for t in g.triplets:
        degree[t.head] += 1
        degree[t.tail] += 1
    test, train_rows = [], []
    for i in order:
        t = g.triplets[i]
        if len(test) < n_test and degree[t.head] > 1 and degree[t.tail] > 1:
            test.append(t)
            degree[t.head] -= 1
            degree[t.tail] -= 1
        else:
            train_rows.append(t)
    train_rows.sort()
    return KnowledgeGraph(list(g.entities), list(g.relations), train_rows), test
