"""Layout-position transformer encoder.

Per-token input embeddings are the sum of eight learned tables: word identity,
1D position, and six quantized-geometry tables (x1, y1, x2, y2, width,
height). A single layer norm follows the sum, then a stack of post-norm
transformer encoder layers with GELU feed-forwards produces the per-token
hidden states the fusion heads consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ielab.docstream import COORD_VOCAB, ModelInput
from ielab.errors import ConfigError, ContractError
from ielab.tensorcore import engine, ops
from ielab.tensorcore.engine import ShapeError, Tensor

COORD_TABLES = ("x1", "y1", "x2", "y2", "w", "h")


@dataclass(frozen=True)
class EncoderConfig:
    word_vocab: int
    label_count: int
    hidden: int = 64
    layers: int = 2
    heads: int = 2
    ff_dim: int | None = None        # defaults to 4*hidden
    max_seq_len: int = 512
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ConfigError(
                f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        if self.max_seq_len < 1:
            raise ConfigError("max_seq_len must be >= 1")
        if self.word_vocab < 2 or self.label_count < 1:
            raise ConfigError("word_vocab needs PAD/UNK and label_count >= 1")

    @property
    def ff(self) -> int:
        return self.ff_dim if self.ff_dim is not None else 4 * self.hidden

    def to_json(self) -> dict:
        return {"word_vocab": self.word_vocab, "label_count": self.label_count,
                "hidden": self.hidden, "layers": self.layers,
                "heads": self.heads, "ff_dim": self.ff_dim,
                "max_seq_len": self.max_seq_len, "init_std": self.init_std,
                "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "EncoderConfig":
        return cls(**obj)


class EncoderParameters:
    """Named encoder tensors; iteration order is the (sorted) name order."""

    def __init__(self, config: EncoderConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def items(self):
        return self.tensors.items()


def init_parameters(config: EncoderConfig) -> EncoderParameters:
    """Seeded N(0, init_std^2) weights, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng([config.seed, 0])
    h, ff = config.hidden, config.ff

    def weight(*shape):
        return engine.parameter(rng.normal(0.0, config.init_std, size=shape))

    def zeros(*shape):
        return engine.parameter(np.zeros(shape))

    def ones(*shape):
        return engine.parameter(np.ones(shape))

    t: dict[str, Tensor] = {}
    t["word_table"] = weight(config.word_vocab, h)
    t["pos1d"] = weight(config.max_seq_len, h)
    for name in COORD_TABLES:
        t[f"pos2d.{name}"] = weight(COORD_VOCAB, h)
    t["embed_ln.gain"] = ones(h)
    t["embed_ln.bias"] = zeros(h)
    for i in range(config.layers):
        pre = f"layer.{i}."
        for part in ("q", "k", "v", "o"):
            t[pre + f"attn.{part}"] = weight(h, h)
            t[pre + f"attn.{part}_bias"] = zeros(h)
        t[pre + "ln1.gain"] = ones(h)
        t[pre + "ln1.bias"] = zeros(h)
        t[pre + "ff.w1"] = weight(h, ff)
        t[pre + "ff.b1"] = zeros(ff)
        t[pre + "ff.w2"] = weight(ff, h)
        t[pre + "ff.b2"] = zeros(h)
        t[pre + "ln2.gain"] = ones(h)
        t[pre + "ln2.bias"] = zeros(h)
    return EncoderParameters(config, t)


def embed_tokens(inp: ModelInput, params: EncoderParameters) -> Tensor:
    """Eight-table additive embedding; chunking must happen before this."""
    cfg = params.config
    if inp.length > cfg.max_seq_len:
        raise ContractError(
            f"sequence of {inp.length} tokens exceeds max_seq_len "
            f"{cfg.max_seq_len}; chunk the document first")
    tables = [params["word_table"], params["pos1d"]]
    ids = [inp.word_ids, inp.pos1d_ids]
    coord_ids = (inp.x1_ids, inp.y1_ids, inp.x2_ids, inp.y2_ids,
                 inp.w_ids, inp.h_ids)
    for name, cid in zip(COORD_TABLES, coord_ids):
        tables.append(params[f"pos2d.{name}"])
        ids.append(cid)
    return ops.embedding_sum(tables, ids)


_MASK_BIAS = -1e9  # drives masked keys' attention weight to exact zero


def block_attention_bias(lengths: list[int], masks=None) -> np.ndarray:
    """(T, T) additive score bias confining attention to same-block tokens.

    Used to run several chunks as one concatenated sequence; optional per-block
    padding masks additionally silence masked keys.
    """
    T = sum(lengths)
    bias = np.full((T, T), _MASK_BIAS)
    pos = 0
    for bi, n in enumerate(lengths):
        bias[pos:pos + n, pos:pos + n] = 0.0
        if masks is not None:
            key_mask = np.asarray(masks[bi], dtype=bool)
            bias[pos:pos + n, pos:pos + n][:, ~key_mask] = _MASK_BIAS
        pos += n
    return bias


def encoder_forward(hidden_in: Tensor, mask, params: EncoderParameters,
                    training: bool = False,
                    rng: np.random.Generator | None = None,
                    attn_bias: np.ndarray | None = None) -> Tensor:
    """Post-norm transformer stack over the summed embeddings.

    `training`/`rng` are accepted for interface symmetry with the heads; the
    stack itself is deterministic (the protocol puts dropout in the classifier
    only). `attn_bias` overrides the mask-derived additive score bias, e.g.
    with a block-diagonal matrix when batching chunks into one sequence.
    """
    del training, rng
    cfg = params.config
    T = hidden_in.data.shape[0]
    msk = np.asarray(mask, dtype=bool)
    if msk.shape != (T,):
        raise ShapeError(f"mask length {msk.shape} does not match T={T}")
    bias = np.where(msk, 0.0, _MASK_BIAS)[None, :] if attn_bias is None \
        else attn_bias

    h = ops.layer_norm(hidden_in, params["embed_ln.gain"], params["embed_ln.bias"])
    for i in range(cfg.layers):
        pre = f"layer.{i}."
        q = ops.linear(h, params[pre + "attn.q"], params[pre + "attn.q_bias"])
        k = ops.linear(h, params[pre + "attn.k"], params[pre + "attn.k_bias"])
        v = ops.linear(h, params[pre + "attn.v"], params[pre + "attn.v_bias"])
        ctx = ops.attention(q, k, v, bias, cfg.heads)
        attn_out = ops.linear(ctx, params[pre + "attn.o"], params[pre + "attn.o_bias"])
        h = ops.layer_norm(ops.add(h, attn_out),
                           params[pre + "ln1.gain"], params[pre + "ln1.bias"])
        inner = ops.gelu(ops.linear(h, params[pre + "ff.w1"], params[pre + "ff.b1"]))
        ff_out = ops.linear(inner, params[pre + "ff.w2"], params[pre + "ff.b2"])
        h = ops.layer_norm(ops.add(h, ff_out),
                           params[pre + "ln2.gain"], params[pre + "ln2.bias"])
    return h


def attention_rows(hidden_in: Tensor, mask, params: EncoderParameters,
                   head: int = 0) -> np.ndarray:
    """First-layer attention matrix for inspection/tests (forward only)."""
    cfg = params.config
    msk = np.asarray(mask, dtype=bool)
    key_bias = np.where(msk, 0.0, _MASK_BIAS)
    dh = cfg.hidden // cfg.heads
    h = ops.layer_norm(hidden_in, params["embed_ln.gain"], params["embed_ln.bias"])
    pre = "layer.0."
    q = ops.linear(h, params[pre + "attn.q"], params[pre + "attn.q_bias"])
    k = ops.linear(h, params[pre + "attn.k"], params[pre + "attn.k_bias"])
    lo, hi = head * dh, (head + 1) * dh
    qj = ops.slice_cols(q, lo, hi)
    kj = ops.slice_cols(k, lo, hi)
    scores = ops.scale(ops.matmul(qj, ops.transpose2d(kj)), 1.0 / math.sqrt(dh))
    return ops.softmax_rows(ops.add_const(scores, key_bias)).data
