"""Three-tier attention memory: affinity core, sensory GRU state, bounded
working memory, and long-term memory with prototype selection/potentiation.

A bank is owned by exactly one propagation session; affinity and readout
are pure functions. Queries are matched against a single concatenated key
matrix (working entries first, long-term prototypes after), and usage is
accumulated only on working entries.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .grids import FeatureGrid, FlatKeySet

SNAPSHOT_MAGIC = b"MEMSEGBK"
SNAPSHOT_VERSION = 1


# ---------------------------------------------------------------------------
# affinity and readout
# ---------------------------------------------------------------------------

def _as_key_matrix(keys) -> np.ndarray:
    if isinstance(keys, FlatKeySet):
        return np.asarray(keys.data)
    if isinstance(keys, FeatureGrid):
        return keys.data.reshape(keys.channels, -1)
    arr = np.asarray(keys, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("keys must be a (channels x columns) matrix")
    return arr


def _similarities(memory_keys, queries, similarity: str) -> np.ndarray:
    """(n_query, n_mem) similarity matrix; the transposed layout keeps the
    per-query reductions contiguous."""
    k = _as_key_matrix(memory_keys)
    q = _as_key_matrix(queries)
    if k.shape[1] == 0:
        raise ValueError("empty memory")
    if k.shape[0] != q.shape[0]:
        raise ValueError("key channel mismatch")
    if similarity == "l2":
        k2 = (k * k).sum(axis=0)
        q2 = (q * q).sum(axis=0)
        sims = 2.0 * (q.T @ k)
        sims -= q2[:, None]
        sims -= k2[None, :]
        return sims
    if similarity == "dot":
        return np.ascontiguousarray(q.T @ k)
    raise ValueError(f"unknown similarity '{similarity}'")


def affinity_topk(memory_keys, queries, top_k: int | None = None,
                  similarity: str = "l2") -> tuple[np.ndarray, np.ndarray]:
    """Sparse affinity: per-query match indices and softmax weights.

    Returns (idx, vals), both (n_query, k) with k = min(top_k, n_mem);
    vals rows are nonnegative and sum to 1. Equivalent to the nonzero
    entries of :func:`affinity` (selection on ties is deterministic).
    """
    sims = _similarities(memory_keys, queries, similarity)
    n_mem = sims.shape[1]
    if top_k is not None and 0 < top_k < n_mem:
        idx = np.argpartition(sims, n_mem - top_k, axis=1)[:, n_mem - top_k:]
        vals = np.take_along_axis(sims, idx, axis=1)
    else:
        idx = np.broadcast_to(np.arange(n_mem), sims.shape)
        vals = sims
    vals = vals - vals.max(axis=1, keepdims=True)
    np.exp(vals, out=vals)
    vals /= vals.sum(axis=1, keepdims=True)
    return idx, vals


def affinity(memory_keys, queries, top_k: int | None = None,
             similarity: str = "l2") -> np.ndarray:
    """Per-query probability distribution over memory columns.

    Similarity is the negative squared Euclidean distance (or the dot
    product with ``similarity="dot"``). With ``top_k`` set, exactly
    min(top_k, N_mem) similarities per query column survive to the softmax
    (deterministic selection on ties). Every returned column is
    nonnegative and sums to 1.
    """
    idx, vals = affinity_topk(memory_keys, queries, top_k=top_k,
                              similarity=similarity)
    n_mem = _as_key_matrix(memory_keys).shape[1]
    if vals.shape[1] == n_mem:
        return vals.T  # dense case: every column survived
    w = np.zeros((vals.shape[0], n_mem))
    np.put_along_axis(w, idx, vals, axis=1)
    return w.T


def readout_topk(values, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Memory read from a sparse affinity; equals readout(values, W) for
    the scattered dense W."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    return np.einsum("cqk,qk->cq", v[:, idx], vals)


def readout(values, w: np.ndarray, shape: tuple[int, int] | None = None):
    """Memory read F = values @ W; each output column is a convex
    combination of value columns. With ``shape`` the result is reshaped to
    a FeatureGrid of that (height, width)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.shape[1] != w.shape[0]:
        raise ValueError("value/affinity dimension mismatch")
    f = v @ w
    if shape is None:
        return f
    return FeatureGrid(f.reshape(f.shape[0], *shape))


# ---------------------------------------------------------------------------
# memory stores
# ---------------------------------------------------------------------------

@dataclass
class MemoryEntry:
    """One stored (key, value, usage) column with frame/position provenance."""

    key: np.ndarray
    value: np.ndarray
    usage: float
    origin: tuple[int, int]


@dataclass
class FrameGroup:
    """All entries appended from one memory frame."""

    keys: np.ndarray      # (key_channels, n)
    values: np.ndarray    # (value_channels, n)
    usage: np.ndarray     # (n,)
    origin: np.ndarray    # (n, 2) of (frame index, position)
    frame_index: int

    @property
    def size(self) -> int:
        return self.keys.shape[1]


class WorkingMemory:
    """Exact key/value store bounded between t_min and t_max frame groups.

    Group 0 (the annotated frame) is never evicted.
    """

    def __init__(self, t_min: int = 5, t_max: int = 10, r: int = 5):
        if not (1 <= t_min < t_max):
            raise ValueError("need 1 <= t_min < t_max")
        if r < 1:
            raise ValueError("r must be >= 1")
        self.t_min = t_min
        self.t_max = t_max
        self.r = r
        self.frames: list[FrameGroup] = []

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def entry_count(self) -> int:
        return sum(g.size for g in self.frames)

    def key_matrix(self) -> np.ndarray:
        return np.concatenate([g.keys for g in self.frames], axis=1)

    def value_matrix(self) -> np.ndarray:
        return np.concatenate([g.values for g in self.frames], axis=1)

    def usage_vector(self) -> np.ndarray:
        return np.concatenate([g.usage for g in self.frames])

    def entries(self) -> list[MemoryEntry]:
        out = []
        for g in self.frames:
            for j in range(g.size):
                out.append(MemoryEntry(g.keys[:, j].copy(), g.values[:, j].copy(),
                                       float(g.usage[j]), tuple(g.origin[j])))
        return out


class LongTermMemory:
    """Compact prototype store; grows by at most P entries per
    consolidation and never exceeds its capacity (lowest-usage prototypes
    are dropped first on overflow, ties toward the oldest)."""

    def __init__(self, capacity: int = 512, num_prototypes: int = 32):
        if capacity < 1 or num_prototypes < 1:
            raise ValueError("capacity and num_prototypes must be >= 1")
        self.capacity = capacity
        self.num_prototypes = num_prototypes
        self.keys = None      # (key_channels, n) or None while empty
        self.values = None
        self.usage = np.zeros(0)
        self.origin = np.zeros((0, 2), dtype=np.int64)

    @property
    def entry_count(self) -> int:
        return 0 if self.keys is None else self.keys.shape[1]

    def add(self, keys: np.ndarray, values: np.ndarray, usage: np.ndarray,
            origin: np.ndarray) -> None:
        if keys.shape[1] == 0:
            return
        if self.keys is None:
            self.keys, self.values = keys.copy(), values.copy()
            self.usage, self.origin = usage.copy(), origin.copy()
        else:
            self.keys = np.concatenate([self.keys, keys], axis=1)
            self.values = np.concatenate([self.values, values], axis=1)
            self.usage = np.concatenate([self.usage, usage])
            self.origin = np.concatenate([self.origin, origin], axis=0)
        excess = self.entry_count - self.capacity
        if excess > 0:
            drop_order = np.argsort(self.usage, kind="stable")[:excess]
            keep = np.setdiff1d(np.arange(self.entry_count), drop_order)
            self.keys = self.keys[:, keep]
            self.values = self.values[:, keep]
            self.usage = self.usage[keep]
            self.origin = self.origin[keep]

    def entries(self) -> list[MemoryEntry]:
        return [MemoryEntry(self.keys[:, j].copy(), self.values[:, j].copy(),
                            float(self.usage[j]), tuple(self.origin[j]))
                for j in range(self.entry_count)]


def record_usage(bank: WorkingMemory, w: np.ndarray) -> None:
    """Accumulate per-entry usage from an affinity matrix.

    Row i adds (sum_j W_ij) / N_query to entry i; rows must align with the
    bank's current entries (call before appending the frame that produced
    the queries).
    """
    if w.shape[0] != bank.entry_count:
        raise ValueError("affinity rows do not align with working memory entries")
    inc = w.sum(axis=1) / w.shape[1]
    at = 0
    for g in bank.frames:
        g.usage += inc[at:at + g.size]
        at += g.size


def record_usage_topk(bank: WorkingMemory, idx: np.ndarray,
                      vals: np.ndarray) -> None:
    """Accumulate usage from a sparse affinity (see affinity_topk).

    Indices at or beyond the bank's entry count are ignored, so the pair
    may span working entries concatenated with long-term rows.
    """
    n_query = idx.shape[0]
    flat_idx = idx.ravel()
    flat_vals = vals.ravel()
    keep = flat_idx < bank.entry_count
    inc = np.bincount(flat_idx[keep], weights=flat_vals[keep],
                      minlength=bank.entry_count) / n_query
    at = 0
    for g in bank.frames:
        g.usage += inc[at:at + g.size]
        at += g.size


def append_frame(bank: WorkingMemory, keys, values, frame_index: int,
                 ltm: LongTermMemory | None = None) -> int:
    """Append one frame group (usage 0), consolidating first if the bank
    is at t_max. Returns the number of prototypes consolidated (0 if no
    consolidation ran)."""
    moved = 0
    if bank.frame_count >= bank.t_max:
        if ltm is None:
            raise ValueError("bank at capacity and no long-term memory provided")
        moved = consolidate(bank, ltm)
    k = _as_key_matrix(keys)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 3:
        v = v.reshape(v.shape[0], -1)
    if isinstance(keys, FlatKeySet):
        origin = np.asarray(keys.origin).copy()
        origin[:, 0] = frame_index
    else:
        origin = np.stack([np.full(k.shape[1], frame_index, dtype=np.int64),
                           np.arange(k.shape[1], dtype=np.int64)], axis=1)
    bank.frames.append(FrameGroup(keys=k.copy(), values=v.copy(),
                                  usage=np.zeros(k.shape[1]), origin=origin,
                                  frame_index=frame_index))
    return moved


def prototype_select(candidates, p: int) -> np.ndarray:
    """Indices of the min(P, n) highest-usage candidates, usage-descending,
    ties broken toward the lower original index.

    ``candidates`` is a usage vector or a list of :class:`MemoryEntry`.
    """
    if p < 1:
        raise ValueError("P must be >= 1")
    if isinstance(candidates, (list, tuple)) and candidates and \
            isinstance(candidates[0], MemoryEntry):
        candidates = [e.usage for e in candidates]
    u = np.asarray(candidates, dtype=np.float64)
    if u.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-u, kind="stable")
    return order[:min(p, u.size)].astype(np.int64)


def potentiate(candidate_keys, candidate_values, prototype_keys) -> np.ndarray:
    """Prototype values as affinity-weighted blends of candidate values.

    W is the plain affinity (top_k disabled) with candidates as memory and
    prototypes as queries; every prototype value lies in the componentwise
    convex hull of the candidate values.
    """
    pk = _as_key_matrix(prototype_keys)
    if pk.shape[1] == 0:
        cv = np.asarray(candidate_values, dtype=np.float64)
        return np.zeros((cv.shape[0] if cv.ndim == 2 else 1, 0))
    w = affinity(candidate_keys, pk, top_k=None)
    return readout(candidate_values, w)


def consolidate(bank: WorkingMemory, ltm: LongTermMemory) -> int:
    """Move all frames except the first and the most recent t_min - 1 into
    long-term memory via prototype selection and potentiation.

    Afterwards the bank holds exactly t_min groups (group 0 plus the most
    recent t_min - 1). Returns the number of prototypes stored.
    """
    if bank.frame_count != bank.t_max:
        raise ValueError("not at capacity")
    tail = bank.frames[bank.t_max - (bank.t_min - 1):]
    candidates = bank.frames[1:bank.t_max - (bank.t_min - 1)]
    ck = np.concatenate([g.keys for g in candidates], axis=1)
    cv = np.concatenate([g.values for g in candidates], axis=1)
    cu = np.concatenate([g.usage for g in candidates])
    co = np.concatenate([g.origin for g in candidates], axis=0)
    sel = prototype_select(cu, ltm.num_prototypes)
    pk = ck[:, sel]
    pv = potentiate(ck, cv, pk)
    ltm.add(pk, pv, cu[sel], co[sel])
    bank.frames = [bank.frames[0]] + tail
    return int(sel.size)


def combined_key_matrix(bank: WorkingMemory, ltm: LongTermMemory) -> np.ndarray:
    """Working entries first, long-term prototypes after."""
    if ltm.entry_count == 0:
        return bank.key_matrix()
    return np.concatenate([bank.key_matrix(), ltm.keys], axis=1)


def combined_value_matrix(bank: WorkingMemory, ltm: LongTermMemory) -> np.ndarray:
    if ltm.entry_count == 0:
        return bank.value_matrix()
    return np.concatenate([bank.value_matrix(), ltm.values], axis=1)


# ---------------------------------------------------------------------------
# sensory memory (GRU)
# ---------------------------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class GruParams:
    """Per-position linear maps over [input; hidden] for the three gates."""

    wz: np.ndarray
    wr: np.ndarray
    wh: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bh: np.ndarray

    def __post_init__(self):
        mats = {"wz": self.wz, "wr": self.wr, "wh": self.wh}
        vecs = {"bz": self.bz, "br": self.br, "bh": self.bh}
        hidden = np.asarray(self.wz).shape[0]
        for name, m in mats.items():
            m = np.asarray(m, dtype=np.float64)
            if m.ndim != 2 or m.shape != np.asarray(self.wz).shape:
                raise ValueError(f"{name} shape inconsistent")
            if not np.isfinite(m).all():
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, m)
        for name, v in vecs.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (hidden,):
                raise ValueError(f"{name} must have length {hidden}")
            if not np.isfinite(v).all():
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def hidden_channels(self) -> int:
        return self.wz.shape[0]

    @property
    def input_channels(self) -> int:
        return self.wz.shape[1] - self.wz.shape[0]

    @staticmethod
    def smoothing(input_channels: int, hidden_channels: int = 1,
                  update_rate: float = 0.3, gain: float = 2.0,
                  input_channel: int = 0) -> "GruParams":
        """Untrained default: constant update gate (z = update_rate) and a
        candidate reading one probability-like input channel, making hidden
        channel 0 an exponential smoother of tanh(gain * (2x - 1)).

        The affine input map keeps x = 0.5 neutral (candidate 0): an
        uncertain label neither reinforces nor erases the hidden state.
        """
        if not 0.0 < update_rate < 1.0:
            raise ValueError("update_rate must be in (0, 1)")
        h, i = hidden_channels, input_channels
        wz = np.zeros((h, i + h))
        wr = np.zeros((h, i + h))
        wh = np.zeros((h, i + h))
        wh[0, input_channel] = 2.0 * gain
        bh = np.zeros(h)
        bh[0] = -gain
        bz = np.full(h, float(np.log(update_rate / (1.0 - update_rate))))
        return GruParams(wz=wz, wr=wr, wh=wh, bz=bz, br=np.zeros(h), bh=bh)


def gru_step(params: GruParams, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Standard GRU update; output stays in (-1, 1) whenever h does."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.shape[0] != params.input_channels or h.shape[0] != params.hidden_channels:
        raise ValueError("gru input/hidden channel mismatch")
    if x.shape[1:] != h.shape[1:]:
        raise ValueError("gru spatial shape mismatch")
    trail = x.shape[1:]
    xf = x.reshape(x.shape[0], -1)
    hf = h.reshape(h.shape[0], -1)
    xh = np.concatenate([xf, hf], axis=0)
    z = _sigmoid(params.wz @ xh + params.bz[:, None])
    rho = _sigmoid(params.wr @ xh + params.br[:, None])
    xrh = np.concatenate([xf, rho * hf], axis=0)
    cand = np.tanh(params.wh @ xrh + params.bh[:, None])
    out = (1.0 - z) * hf + z * cand
    return out.reshape((params.hidden_channels, *trail))


class SensoryState:
    """Per-position hidden state updated every frame (fast GRU) and on
    memory frames (deep GRU); hidden channel 0 is the label plane read by
    the decoder."""

    def __init__(self, shape: tuple[int, int], gru_fast: GruParams,
                 gru_deep: GruParams):
        if gru_fast.hidden_channels != gru_deep.hidden_channels:
            raise ValueError("fast/deep hidden size mismatch")
        self.gru_fast = gru_fast
        self.gru_deep = gru_deep
        self.h = np.zeros((gru_fast.hidden_channels, *shape))

    @property
    def label_plane(self) -> np.ndarray:
        return self.h[0]

    def update(self, decoder_feats: FeatureGrid | np.ndarray) -> None:
        x = decoder_feats.data if isinstance(decoder_feats, FeatureGrid) else decoder_feats
        self.h = gru_step(self.gru_fast, x, self.h)

    def deep_update(self, value: FeatureGrid | np.ndarray) -> None:
        x = value.data if isinstance(value, FeatureGrid) else value
        self.h = gru_step(self.gru_deep, x, self.h)


def sensory_update(state: SensoryState, decoder_feats) -> None:
    """Fast per-frame update of the sensory hidden state."""
    state.update(decoder_feats)


def sensory_deep_update(state: SensoryState, value) -> None:
    """Deep update from the value encoder, applied on memory frames."""
    state.deep_update(value)


# ---------------------------------------------------------------------------
# snapshot serialization (pause/resume)
# ---------------------------------------------------------------------------
# Layout (all integers little-endian):
#   8 bytes  magic "MEMSEGBK"
#   u32      version (currently 1)
#   u32      header length in bytes
#   header   UTF-8 JSON: scalar fields plus an ordered array manifest,
#            each entry {name, dtype, shape}
#   payload  the manifest arrays, raw little-endian, back to back
# Full description in docs/snapshot-format.md.

def _write_arrays(fh, manifest: list, scalars: dict, arrays: list[np.ndarray]) -> None:
    header = json.dumps({"scalars": scalars, "arrays": manifest}).encode("utf-8")
    fh.write(SNAPSHOT_MAGIC)
    fh.write(struct.pack("<II", SNAPSHOT_VERSION, len(header)))
    fh.write(header)
    for arr in arrays:
        fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def save_memory_snapshot(path, bank: WorkingMemory, ltm: LongTermMemory,
                         sensory: SensoryState | None = None) -> None:
    """Serialize one bank (working + long-term + optional sensory state)."""
    manifest = []
    arrays = []

    def put(name: str, arr: np.ndarray, dtype: str) -> None:
        arr = np.asarray(arr).astype(dtype)
        manifest.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        arrays.append(arr)

    for i, g in enumerate(bank.frames):
        put(f"wm/{i}/keys", g.keys, "<f8")
        put(f"wm/{i}/values", g.values, "<f8")
        put(f"wm/{i}/usage", g.usage, "<f8")
        put(f"wm/{i}/origin", g.origin, "<i8")
    if ltm.entry_count:
        put("ltm/keys", ltm.keys, "<f8")
        put("ltm/values", ltm.values, "<f8")
        put("ltm/usage", ltm.usage, "<f8")
        put("ltm/origin", ltm.origin, "<i8")
    if sensory is not None:
        put("sensory/h", sensory.h, "<f8")
        for tier, params in (("fast", sensory.gru_fast), ("deep", sensory.gru_deep)):
            for pname in ("wz", "wr", "wh", "bz", "br", "bh"):
                put(f"sensory/{tier}/{pname}", getattr(params, pname), "<f8")
    scalars = {
        "t_min": bank.t_min, "t_max": bank.t_max, "r": bank.r,
        "frame_indices": [g.frame_index for g in bank.frames],
        "ltm_capacity": ltm.capacity, "ltm_prototypes": ltm.num_prototypes,
        "has_sensory": sensory is not None,
    }
    if hasattr(path, "write"):
        _write_arrays(path, manifest, scalars, arrays)
    else:
        with open(path, "wb") as fh:
            _write_arrays(fh, manifest, scalars, arrays)


def load_memory_snapshot(path):
    """Inverse of :func:`save_memory_snapshot`.

    Returns (WorkingMemory, LongTermMemory, SensoryState | None).
    """
    if hasattr(path, "read"):
        data = path.read()
    else:
        with open(path, "rb") as fh:
            data = fh.read()
    buf = io.BytesIO(data)
    magic = buf.read(8)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a memory snapshot file")
    version, hlen = struct.unpack("<II", buf.read(8))
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    header = json.loads(buf.read(hlen).decode("utf-8"))
    tensors = {}
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        raw = buf.read(count * dt.itemsize)
        tensors[spec["name"]] = np.frombuffer(raw, dtype=dt).reshape(spec["shape"]).copy()
    s = header["scalars"]
    bank = WorkingMemory(t_min=s["t_min"], t_max=s["t_max"], r=s["r"])
    for i, frame_index in enumerate(s["frame_indices"]):
        bank.frames.append(FrameGroup(
            keys=tensors[f"wm/{i}/keys"], values=tensors[f"wm/{i}/values"],
            usage=tensors[f"wm/{i}/usage"],
            origin=tensors[f"wm/{i}/origin"].astype(np.int64),
            frame_index=int(frame_index)))
    ltm = LongTermMemory(capacity=s["ltm_capacity"], num_prototypes=s["ltm_prototypes"])
    if "ltm/keys" in tensors:
        ltm.add(tensors["ltm/keys"], tensors["ltm/values"], tensors["ltm/usage"],
                tensors["ltm/origin"].astype(np.int64))
    sensory = None
    if s.get("has_sensory"):
        def params(tier: str) -> GruParams:
            return GruParams(**{p: tensors[f"sensory/{tier}/{p}"]
                                for p in ("wz", "wr", "wh", "bz", "br", "bh")})
        h = tensors["sensory/h"]
        sensory = SensoryState(shape=h.shape[1:], gru_fast=params("fast"),
                               gru_deep=params("deep"))
        sensory.h = h
    return bank, ltm, sensory
