"""Edit-operation scoring network.

A pluggable encoder (trainable embedding table with an optional single
self-attention + feed-forward mixer block, or imported per-token
contextual vectors) feeds per-operation linear projections. Query/key
vectors are rotated by position (rotary embedding) before the dot
product, so scores depend only on relative position. Training minimizes
a pairwise log-sum-exp loss that pushes labeled cells above zero and the
rest below, with hand-derived reverse-mode gradients and bias-corrected
Adam.

Parameters are kept at float32 precision (stored in float64 arrays,
quantized after every update) so checkpoints round-trip bit-exactly;
all arithmetic runs in float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .datamodel import END_TOKEN, UNK_TOKEN, Dialogue, InputSequence
from .supervision import EditMatrix, EditOp

UNK_ID = 0

MODE_TRAINABLE = "trainable"
MODE_IMPORTED = "imported"


class TrainingDiverged(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class MixerParams:
    """Single pre-softmax self-attention block plus a two-layer relu FFN,
    both with residual connections (no layer norm)."""

    wq: np.ndarray  # (d, d)
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray  # (d, d_ff)
    b1: np.ndarray  # (d_ff,)
    w2: np.ndarray  # (d_ff, d)
    b2: np.ndarray  # (d,)


@dataclass
class EncoderParams:
    vocab: dict[str, int]
    embedding: np.ndarray  # (|V|, d_model)
    mixer: Optional[MixerParams] = None
    mode: str = MODE_TRAINABLE
    imported: Optional[dict[str, np.ndarray]] = None

    def __post_init__(self):
        d = self.embedding.shape[1]
        if d <= 0 or d % 2:
            raise ValueError("d_model must be positive and even")
        if not np.all(np.isfinite(self.embedding)):
            raise ValueError("embedding table must be finite")

    @property
    def d_model(self) -> int:
        return self.embedding.shape[1]

    def token_ids(self, texts: Sequence[str]) -> np.ndarray:
        return np.array([self.vocab.get(t, UNK_ID) for t in texts], dtype=np.intp)


@dataclass
class OpHead:
    """Separate q-side and k-side affine projections for one edit operation."""

    wq: np.ndarray  # (d_out, d_model)
    bq: np.ndarray  # (d_out,)
    wk: np.ndarray
    bk: np.ndarray


@dataclass
class HeadParams:
    per_op: dict[EditOp, OpHead]

    @property
    def d_out(self) -> int:
        return next(iter(self.per_op.values())).wq.shape[0]


@dataclass
class ModelParams:
    encoder: EncoderParams
    head: HeadParams
    heads: int = 1  # attention-style head count; outputs are concatenated

    @property
    def d_head(self) -> int:
        return self.head.d_out // self.heads


@dataclass
class ScoreGrid:
    op: EditOp
    values: np.ndarray  # (n_rows, n_cols)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("score grid must be finite")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 16
    epochs: int = 1
    theta: float = 0.1  # 0.1 preset; 0.05 for the longer-context presets
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("learning_rate/batch_size must be positive, epochs >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1 and self.eps > 0):
            raise ValueError("invalid Adam hyperparameters")


@dataclass(frozen=True)
class TrainExample:
    input: InputSequence
    gold: EditMatrix
    example_id: str = ""
    dialogue: Optional[Dialogue] = None


@dataclass
class TrainingLog:
    epoch_losses: list[float] = field(default_factory=list)
    dev_em: list[float] = field(default_factory=list)
    start_epoch: int = 0

    def to_json(self) -> str:
        return json.dumps({"start_epoch": self.start_epoch,
                           "epoch_losses": self.epoch_losses,
                           "dev_em": self.dev_em})


# ---------------------------------------------------------------------------
# initialization

def _q32(a: np.ndarray) -> np.ndarray:
    """Quantize to float32 values held in a float64 array (see module note)."""
    return a.astype(np.float32).astype(np.float64)


def build_vocab(inputs: Iterable[InputSequence]) -> dict[str, int]:
    reserved = [UNK_TOKEN, END_TOKEN, "[COREF]", "[ELLIP]"]
    seen = set(reserved)
    extra = sorted({t.text for inp in inputs for t in inp.tokens} - seen)
    return {t: i for i, t in enumerate(reserved + extra)}


def init_model(vocab: dict[str, int], d_model: int, d_head: int, heads: int = 1,
               seed: int = 0, mixer: bool = False, d_ff: Optional[int] = None
               ) -> ModelParams:
    """Uniform init scaled by 1/sqrt(d_model); biases zero; seed-controlled."""
    if d_head <= 0 or d_head % 2:
        raise ValueError("d_head must be positive and even")
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(d_model)
    d_out = heads * d_head

    def u(*shape):
        return _q32(rng.uniform(-s, s, size=shape))

    embedding = u(len(vocab), d_model)
    mix = None
    if mixer:
        d_ff = d_ff or 2 * d_model
        mix = MixerParams(wq=u(d_model, d_model), wk=u(d_model, d_model),
                          wv=u(d_model, d_model), wo=u(d_model, d_model),
                          w1=u(d_model, d_ff), b1=np.zeros(d_ff),
                          w2=u(d_ff, d_model), b2=np.zeros(d_model))
    per_op = {}
    for op in (EditOp.SUBSTITUTE, EditOp.PRE_INSERT):
        per_op[op] = OpHead(wq=u(d_out, d_model), bq=np.zeros(d_out),
                            wk=u(d_out, d_model), bk=np.zeros(d_out))
    enc = EncoderParams(vocab=dict(vocab), embedding=embedding, mixer=mix)
    return ModelParams(encoder=enc, head=HeadParams(per_op), heads=heads)


def params_items(model: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Trainable tensors in a fixed order (the declared serialization order)."""
    items: list[tuple[str, np.ndarray]] = []
    if model.encoder.mode == MODE_TRAINABLE:
        items.append(("emb", model.encoder.embedding))
        mix = model.encoder.mixer
        if mix is not None:
            for name in ("wq", "wk", "wv", "wo", "w1", "b1", "w2", "b2"):
                items.append((f"mixer.{name}", getattr(mix, name)))
    for op in sorted(model.head.per_op, key=lambda o: o.value):
        h = model.head.per_op[op]
        for name in ("wq", "bq", "wk", "bk"):
            items.append((f"head.{op.value}.{name}", getattr(h, name)))
    return items


# ---------------------------------------------------------------------------
# forward pieces


def rope_rotate(v: np.ndarray, pos) -> np.ndarray:
    """Rotate consecutive pairs (2m, 2m+1) by angle pos * 10000^(-2m/d).

    ``pos`` may be a scalar or an array matching the leading shape of ``v``;
    negative positions undo the corresponding forward rotation.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[-1]
    if d % 2:
        raise ValueError("rotary dimension must be even")
    omega = 10000.0 ** (-2.0 * np.arange(d // 2) / d)
    ang = np.multiply.outer(np.asarray(pos, dtype=np.float64), omega)
    cos, sin = np.cos(ang), np.sin(ang)
    even, odd = v[..., 0::2], v[..., 1::2]
    out = np.empty_like(v)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


def _mixer_forward(x: np.ndarray, p: MixerParams):
    d = x.shape[1]
    q, k, v = x @ p.wq, x @ p.wk, x @ p.wv
    z = q @ k.T / np.sqrt(d)
    z -= z.max(axis=1, keepdims=True)
    a = np.exp(z)
    a /= a.sum(axis=1, keepdims=True)
    av = a @ v
    x1 = x + av @ p.wo
    pre = x1 @ p.w1 + p.b1
    f = np.maximum(pre, 0.0)
    x2 = x1 + f @ p.w2 + p.b2
    cache = (x, q, k, v, a, av, x1, pre, f)
    return x2, cache


def _mixer_backward(dx2: np.ndarray, p: MixerParams, cache, grads: dict, prefix="mixer."):
    x, q, k, v, a, av, x1, pre, f = cache
    d = x.shape[1]
    grads[prefix + "w2"] += f.T @ dx2
    grads[prefix + "b2"] += dx2.sum(axis=0)
    dpre = (dx2 @ p.w2.T) * (pre > 0)
    grads[prefix + "w1"] += x1.T @ dpre
    grads[prefix + "b1"] += dpre.sum(axis=0)
    dx1 = dx2 + dpre @ p.w1.T
    grads[prefix + "wo"] += av.T @ dx1
    dav = dx1 @ p.wo.T
    da = dav @ v.T
    dv = a.T @ dav
    dz = a * (da - (da * a).sum(axis=1, keepdims=True))
    dq = dz @ k / np.sqrt(d)
    dk = dz.T @ q / np.sqrt(d)
    grads[prefix + "wq"] += x.T @ dq
    grads[prefix + "wk"] += x.T @ dk
    grads[prefix + "wv"] += x.T @ dv
    return dx1 + dq @ p.wq.T + dk @ p.wk.T + dv @ p.wv.T


def encode(input: InputSequence, params: EncoderParams,
           example_id: Optional[str] = None) -> np.ndarray:
    """One d_model vector per token, sentinel included."""
    if params.mode == MODE_IMPORTED:
        if params.imported is None or example_id not in params.imported:
            raise ValueError(f"no imported vectors for example {example_id!r}")
        h = np.asarray(params.imported[example_id], dtype=np.float64)
        if h.shape != (len(input.tokens), params.d_model):
            raise ValueError(
                f"imported vectors for {example_id!r} have shape {h.shape}, "
                f"expected {(len(input.tokens), params.d_model)}")
        return h
    ids = params.token_ids(input.texts())
    h = params.embedding[ids]
    if params.mixer is not None:
        h, _ = _mixer_forward(h, params.mixer)
    return h


def project(h: np.ndarray, params: HeadParams, op: EditOp
            ) -> tuple[np.ndarray, np.ndarray]:
    """Affine q-side and k-side projections of every vector in ``h``."""
    head = params.per_op[op]
    return h @ head.wq.T + head.bq, h @ head.wk.T + head.bk


def score_grid(q: np.ndarray, k: np.ndarray, row_positions, col_positions,
               op: EditOp) -> ScoreGrid:
    """Rotated dot products: values[i][j] = <R(p_i) q_i, R(p_j) k_j>."""
    rq = rope_rotate(q, np.asarray(row_positions))
    rk = rope_rotate(k, np.asarray(col_positions))
    return ScoreGrid(op=op, values=rq @ rk.T)


def _row_col_indices(input: InputSequence) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(input.context_length)
    cols = np.array(list(range(*input.incomplete_range)) + [input.sentinel_index])
    return rows, cols


def score_all(input: InputSequence, model: ModelParams,
              example_id: Optional[str] = None) -> dict[EditOp, ScoreGrid]:
    """Both operations' grids for one input (rows = context, cols =
    incomplete positions + sentinel; positions are absolute indices)."""
    h = encode(input, model.encoder, example_id)
    rows, cols = _row_col_indices(input)
    grids = {}
    for op in model.head.per_op:
        q, k = project(h, model.head, op)
        grids[op] = score_grid(q[rows], k[cols], rows, cols, op)
    return grids


# ---------------------------------------------------------------------------
# loss and gradients


def _op_loss_grad(s: np.ndarray, pos_mask: np.ndarray) -> tuple[float, np.ndarray]:
    """log(1 + sum_pos e^-s) + log(1 + sum_neg e^s) and d/ds, overflow-safe."""
    sp = s[pos_mask]
    sn = s[~pos_mask]
    t_pos = np.logaddexp.reduce(np.concatenate(([0.0], -sp))) if sp.size else 0.0
    t_neg = np.logaddexp.reduce(np.concatenate(([0.0], sn))) if sn.size else 0.0
    ds = np.zeros_like(s)
    if sp.size:
        ds[pos_mask] = -np.exp(-sp - t_pos)
    if sn.size:
        ds[~pos_mask] = np.exp(sn - t_neg)
    return float(t_pos + t_neg), ds


def circle_loss(grids: dict[EditOp, ScoreGrid], gold: EditMatrix) -> float:
    """Total loss over both operations; labeled cells are the positives,
    every other in-range cell is a negative."""
    total = 0.0
    for op, grid in grids.items():
        s = np.asarray(grid.values, dtype=np.float64)
        if s.shape != (gold.n_rows, gold.n_cols):
            raise ValueError(f"grid shape {s.shape} does not match gold "
                             f"{(gold.n_rows, gold.n_cols)}")
        mask = np.zeros(s.shape, dtype=bool)
        for r, c in gold.cells_of(op):
            mask[r, c] = True
        loss, _ = _op_loss_grad(s, mask)
        total += loss
    return total


def _zero_grads(model: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params_items(model)}


def _example_loss_grad(model: ModelParams, ex: TrainExample,
                       grads: dict[str, np.ndarray]) -> float:
    """Forward + backward for one example; accumulates into ``grads``."""
    enc = model.encoder
    trainable = enc.mode == MODE_TRAINABLE
    cache = None
    if trainable:
        ids = enc.token_ids(ex.input.texts())
        e = enc.embedding[ids]
        if enc.mixer is not None:
            h, cache = _mixer_forward(e, enc.mixer)
        else:
            h = e
    else:
        h = encode(ex.input, enc, ex.example_id)
    rows, cols = _row_col_indices(ex.input)
    dh = np.zeros_like(h)
    loss = 0.0
    for op in sorted(model.head.per_op, key=lambda o: o.value):
        head = model.head.per_op[op]
        hq, hk = h[rows], h[cols]
        q = hq @ head.wq.T + head.bq
        k = hk @ head.wk.T + head.bk
        rq = rope_rotate(q, rows)
        rk = rope_rotate(k, cols)
        s = rq @ rk.T
        mask = np.zeros(s.shape, dtype=bool)
        for r, c in ex.gold.cells_of(op):
            mask[r, c] = True
        l_op, ds = _op_loss_grad(s, mask)
        loss += l_op
        # backward: score -> rotated vectors -> projections -> hidden states
        drq = ds @ rk
        drk = ds.T @ rq
        dq = rope_rotate(drq, -rows)  # rotations are orthogonal: R^T = R(-pos)
        dk = rope_rotate(drk, -cols)
        pre = f"head.{op.value}."
        grads[pre + "wq"] += dq.T @ hq
        grads[pre + "bq"] += dq.sum(axis=0)
        grads[pre + "wk"] += dk.T @ hk
        grads[pre + "bk"] += dk.sum(axis=0)
        dh[rows] += dq @ head.wq
        dh[cols] += dk @ head.wk
    if trainable:
        de = _mixer_backward(dh, enc.mixer, cache, grads) if cache is not None else dh
        np.add.at(grads["emb"], ids, de)
    return loss


def grad(model: ModelParams, batch: Sequence[TrainExample]
         ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss over the batch and exact gradients for every trainable
    parameter. Raises on a non-finite loss, naming the example."""
    grads = _zero_grads(model)
    total = 0.0
    for ex in batch:
        loss = _example_loss_grad(model, ex, grads)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss on example {ex.example_id!r}")
        total += loss
    n = len(batch)
    for g in grads.values():
        g /= n
    return total / n, grads


# ---------------------------------------------------------------------------
# training


@dataclass
class AdamState:
    step: int = 0
    epochs_done: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_model(cls, model: ModelParams) -> "AdamState":
        return cls(step=0,
                   m={n: np.zeros_like(a) for n, a in params_items(model)},
                   v={n: np.zeros_like(a) for n, a in params_items(model)})


def _adam_step(model: ModelParams, grads: dict[str, np.ndarray],
               state: AdamState, cfg: TrainConfig) -> None:
    state.step += 1
    t = state.step
    for name, p in params_items(model):
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m[...] = cfg.beta1 * m + (1 - cfg.beta1) * g
        v[...] = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
        p[...] = _q32(p)
        m[...] = _q32(m)
        v[...] = _q32(v)


def decode_example(model: ModelParams, ex: TrainExample, theta: float):
    """Full decode of one prepared example (no query rebuilding)."""
    from .rewrite import (apply_edits, cells_to_spans, decode_labels,
                          merge_matrices, resolve_conflicts)

    grids = score_all(ex.input, model, ex.example_id)
    matrix = merge_matrices([decode_labels(g, theta) for g in grids.values()])
    spans = resolve_conflicts(cells_to_spans(matrix, grids))
    return apply_edits(ex.dialogue.incomplete, spans, ex.input)


def train_em(model: ModelParams, examples: Sequence[TrainExample],
             theta: float) -> float:
    hits = 0
    for ex in examples:
        out = decode_example(model, ex, theta)
        hits += out.texts() == ex.dialogue.rewritten.texts()
    return hits / len(examples)


def train(dataset: Sequence[TrainExample], config: TrainConfig,
          model: ModelParams, dev: Optional[Sequence[TrainExample]] = None,
          start_epoch: int = 0, opt_state: Optional[AdamState] = None
          ) -> tuple[TrainingLog, AdamState]:
    """Adam over shuffled batches; shuffle order is keyed by (seed, epoch)
    so a run resumed from a checkpoint retraces the uninterrupted one."""
    state = opt_state or AdamState.for_model(model)
    log = TrainingLog(start_epoch=start_epoch)
    for epoch in range(start_epoch, config.epochs):
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        n_batches = 0
        for b0 in range(0, len(order), config.batch_size):
            batch = [dataset[i] for i in order[b0:b0 + config.batch_size]]
            try:
                loss, grads = grad(model, batch)
            except TrainingDiverged as exc:
                raise TrainingDiverged(
                    f"epoch {epoch}, batch {n_batches}: {exc}") from exc
            _adam_step(model, grads, state, config)
            epoch_loss += loss
            n_batches += 1
        log.epoch_losses.append(epoch_loss / max(n_batches, 1))
        state.epochs_done = epoch + 1
        if dev:
            log.dev_em.append(train_em(model, dev, config.theta))
    return log, state


# ---------------------------------------------------------------------------
# persistence


def save_model(path: str | Path, model: ModelParams,
               opt_state: Optional[AdamState] = None) -> None:
    """Versioned JSON header line + float32 little-endian tensors in the
    order declared by the header."""
    items = list(params_items(model))
    if opt_state is not None:
        for n, _ in list(items):
            items.append((f"adam.m.{n}", opt_state.m[n]))
            items.append((f"adam.v.{n}", opt_state.v[n]))
    vocab_list = [t for t, _ in sorted(model.encoder.vocab.items(), key=lambda kv: kv[1])]
    mix = model.encoder.mixer
    header = {
        "format": "iurkit-model", "version": 1,
        "mode": model.encoder.mode,
        "d_model": model.encoder.d_model,
        "d_out": model.head.d_out,
        "heads": model.heads,
        "has_mixer": mix is not None,
        "d_ff": int(mix.b1.shape[0]) if mix is not None else None,
        "optimizer": ({"step": opt_state.step, "epochs_done": opt_state.epochs_done}
                      if opt_state is not None else None),
        "vocab": vocab_list,
        "tensors": [[n, list(a.shape)] for n, a in items],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False).encode("utf-8") + b"\n")
        for _, a in items:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_model(path: str | Path) -> tuple[ModelParams, Optional[AdamState]]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != "iurkit-model" or header.get("version") != 1:
            raise ValueError(f"{path}: not an iurkit model file")
        tensors = {}
        for name, shape in header["tensors"]:
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(4 * n)
            if len(buf) != 4 * n:
                raise ValueError(f"{path}: truncated tensor {name}")
            tensors[name] = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
    vocab = {t: i for i, t in enumerate(header["vocab"])}
    d_model = header["d_model"]
    if header["mode"] == MODE_TRAINABLE:
        embedding = tensors["emb"]
    else:
        embedding = np.zeros((len(vocab), d_model))
    mix = None
    if header["has_mixer"]:
        mix = MixerParams(**{n: tensors[f"mixer.{n}"]
                             for n in ("wq", "wk", "wv", "wo", "w1", "b1", "w2", "b2")})
    per_op = {}
    for op in (EditOp.PRE_INSERT, EditOp.SUBSTITUTE):
        per_op[op] = OpHead(**{n: tensors[f"head.{op.value}.{n}"]
                               for n in ("wq", "bq", "wk", "bk")})
    enc = EncoderParams(vocab=vocab, embedding=embedding, mixer=mix, mode=header["mode"])
    model = ModelParams(encoder=enc, head=HeadParams(per_op), heads=header["heads"])
    opt_state = None
    if header.get("optimizer") is not None:
        opt_state = AdamState(step=header["optimizer"]["step"],
                              epochs_done=header["optimizer"].get("epochs_done", 0),
                              m={n: tensors[f"adam.m.{n}"] for n, _ in params_items(model)},
                              v={n: tensors[f"adam.v.{n}"] for n, _ in params_items(model)})
    return model, opt_state


def write_ctxvec(path: str | Path, d_model: int,
                 records: dict[str, np.ndarray]) -> None:
    """Imported-vector sidecar: JSON header line {d_model, count}, then per
    record: u32 id length, UTF-8 id, u32 position count, float32 LE vectors."""
    with open(path, "wb") as fh:
        fh.write(json.dumps({"d_model": d_model, "count": len(records)}).encode() + b"\n")
        for ex_id in sorted(records):
            vecs = np.ascontiguousarray(records[ex_id], dtype="<f4")
            if vecs.ndim != 2 or vecs.shape[1] != d_model:
                raise ValueError(f"record {ex_id!r}: expected (n, {d_model}) vectors")
            raw = ex_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)) + raw)
            fh.write(struct.pack("<I", vecs.shape[0]))
            fh.write(vecs.tobytes())


def read_ctxvec(path: str | Path) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        d_model = header["d_model"]
        records: dict[str, np.ndarray] = {}
        for _ in range(header["count"]):
            (id_len,) = struct.unpack("<I", fh.read(4))
            ex_id = fh.read(id_len).decode("utf-8")
            (n,) = struct.unpack("<I", fh.read(4))
            buf = fh.read(4 * n * d_model)
            records[ex_id] = np.frombuffer(buf, dtype="<f4").astype(np.float64) \
                .reshape(n, d_model)
    return d_model, records


def with_imported_vectors(model: ModelParams,
                          records: dict[str, np.ndarray]) -> ModelParams:
    """A copy of ``model`` whose encoder serves the given contextual vectors."""
    enc = EncoderParams(vocab=model.encoder.vocab,
                        embedding=model.encoder.embedding,
                        mixer=None, mode=MODE_IMPORTED, imported=records)
    return ModelParams(encoder=enc, head=model.head, heads=model.heads)
