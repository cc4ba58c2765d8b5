"""Token tagger assembly: encoder + one fusion mode + classifier head.

Construction is seed-structured so that models differing only in fusion mode
share bitwise-identical encoder initializations: the encoder draws from
stream (seed, 0), style tables from (seed, 1), the image path from (seed, 2),
and the head from (seed, 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ielab import layoutcore
from ielab.docstream import STYLE_FEATURES, ModelInput
from ielab.errors import CheckpointMismatchError, ConfigError
from ielab.layoutcore import EncoderConfig, EncoderParameters
from ielab.stylefuse.fusion import (
    ClassifierHead,
    FusionMode,
    StyleTables,
    classify,
    fuse_style_concat,
    fuse_style_sum,
    head_logits,
)
from ielab.stylefuse.image import ImagePathConfig, image_embed_and_fuse
from ielab.tensorcore import checkpoint as ckpt
from ielab.tensorcore import engine
from ielab.tensorcore.engine import Tensor


@dataclass(frozen=True)
class TaggerSpec:
    """Everything needed to construct a model, JSON-serializable."""

    encoder: EncoderConfig
    fusion: FusionMode
    style_vocab_sizes: tuple[int, ...] = ()   # V_m per STYLE_FEATURES entry
    style_dim: int = 64                       # table width for STYLE_CONCAT
    style_features: tuple[str, ...] = STYLE_FEATURES
    image: ImagePathConfig | None = None
    dropout_rate: float = 0.3

    def __post_init__(self):
        # corpus-dependent sizes may still be unresolved here; build() checks
        if self.fusion in (FusionMode.STYLE_SUM, FusionMode.STYLE_CONCAT) \
                and not self.style_features:
            raise ConfigError("style modes need at least one active feature")
        if self.fusion is FusionMode.IMAGE and self.image is None:
            raise ConfigError("IMAGE fusion needs an ImagePathConfig")

    @property
    def style_width(self) -> int:
        return self.encoder.hidden if self.fusion is FusionMode.STYLE_SUM \
            else self.style_dim

    @property
    def head_in_dim(self) -> int:
        if self.fusion is FusionMode.STYLE_CONCAT:
            return self.encoder.hidden + len(self.style_features) * self.style_dim
        return self.encoder.hidden

    def to_json(self) -> dict:
        return {"encoder": self.encoder.to_json(), "fusion": self.fusion.value,
                "style_vocab_sizes": list(self.style_vocab_sizes),
                "style_dim": self.style_dim,
                "style_features": list(self.style_features),
                "image": self.image.to_json() if self.image else None,
                "dropout_rate": self.dropout_rate}

    @classmethod
    def from_json(cls, obj: dict) -> "TaggerSpec":
        return cls(
            encoder=EncoderConfig.from_json(obj["encoder"]),
            fusion=FusionMode(obj["fusion"]),
            style_vocab_sizes=tuple(obj["style_vocab_sizes"]),
            style_dim=obj["style_dim"],
            style_features=tuple(obj["style_features"]),
            image=ImagePathConfig.from_json(obj["image"]) if obj.get("image")
            else None,
            dropout_rate=obj.get("dropout_rate", 0.3))


@dataclass
class TokenTagger:
    spec: TaggerSpec
    encoder_params: EncoderParameters
    style: StyleTables | None = None
    image_params: dict = field(default_factory=dict)
    head: ClassifierHead | None = None

    @classmethod
    def build(cls, spec: TaggerSpec) -> "TokenTagger":
        seed = spec.encoder.seed
        std = spec.encoder.init_std
        enc = layoutcore.init_parameters(spec.encoder)

        style = None
        if spec.fusion in (FusionMode.STYLE_SUM, FusionMode.STYLE_CONCAT):
            if len(spec.style_vocab_sizes) != len(STYLE_FEATURES):
                raise ConfigError(
                    "style modes need a vocab size per style feature; "
                    "resolve the spec against a corpus first")
            rng = np.random.default_rng([seed, 1])
            tables = {}
            for f in spec.style_features:
                v = spec.style_vocab_sizes[STYLE_FEATURES.index(f)]
                tables[f] = engine.parameter(
                    rng.normal(0.0, std, size=(v, spec.style_width)))
            style = StyleTables(features=spec.style_features, tables=tables,
                                dim=spec.style_width)

        image_params: dict = {}
        if spec.fusion is FusionMode.IMAGE:
            rng = np.random.default_rng([seed, 2])
            icfg = spec.image
            c_in = icfg.raster_channels
            k = icfg.kernel_size
            for i, c_out in enumerate(icfg.backbone_channels):
                image_params[f"image.backbone.{i}.kernel"] = engine.parameter(
                    rng.normal(0.0, std, size=(c_out, c_in, k, k)))
                image_params[f"image.backbone.{i}.bias"] = engine.parameter(
                    np.zeros(c_out))
                c_in = c_out
            image_params["image.proj.weight"] = engine.parameter(
                rng.normal(0.0, std, size=(icfg.roi_width, spec.encoder.hidden)))
            image_params["image.proj.bias"] = engine.parameter(
                np.zeros(spec.encoder.hidden))

        rng = np.random.default_rng([seed, 3])
        head = ClassifierHead(
            weight=engine.parameter(rng.normal(
                0.0, std, size=(spec.head_in_dim, spec.encoder.label_count))),
            bias=engine.parameter(np.zeros(spec.encoder.label_count)),
            dropout_rate=spec.dropout_rate)
        return cls(spec=spec, encoder_params=enc, style=style,
                   image_params=image_params, head=head)

    def parameters(self) -> dict[str, Tensor]:
        out = dict(self.encoder_params.tensors)
        if self.style is not None:
            for f in self.style.features:
                out[f"style.{f}"] = self.style.tables[f]
        out.update(self.image_params)
        out["head.weight"] = self.head.weight
        out["head.bias"] = self.head.bias
        return out

    def fused_output(self, inp: ModelInput, rasters=None) -> Tensor:
        """Encoder output enriched per the fusion mode (pre-head)."""
        e = layoutcore.embed_tokens(inp, self.encoder_params)
        L = layoutcore.encoder_forward(e, inp.mask, self.encoder_params)
        mode = self.spec.fusion
        if mode is FusionMode.BASELINE:
            return L
        if mode is FusionMode.STYLE_SUM:
            return fuse_style_sum(L, inp.style_ids, self.style)
        if mode is FusionMode.STYLE_CONCAT:
            return fuse_style_concat(L, inp.style_ids, self.style)
        if rasters is None:
            raise ConfigError("IMAGE fusion needs page rasters")
        boxes = np.stack([inp.x1_ids, inp.y1_ids, inp.x2_ids, inp.y2_ids],
                         axis=1).astype(np.float64)
        return image_embed_and_fuse(L, boxes, inp.page_ids, rasters,
                                    self.image_params, self.spec.image)

    def forward_logits(self, inp: ModelInput, rasters=None,
                       training: bool = False,
                       rng: np.random.Generator | None = None) -> Tensor:
        return head_logits(self.fused_output(inp, rasters), self.head,
                           training, rng)

    def forward_logits_batch(self, inputs: list[ModelInput],
                             training: bool = False,
                             rng: np.random.Generator | None = None) -> Tensor:
        """One forward over several chunks concatenated into one sequence.

        Equivalent to per-chunk forwards: a block-diagonal attention bias
        keeps chunks from attending to each other, and every remaining stage
        is per-token. Not available for IMAGE fusion (per-document rasters).
        """
        if self.spec.fusion is FusionMode.IMAGE:
            raise ConfigError("IMAGE fusion predicts per chunk, not batched")
        if len(inputs) == 1:
            return self.forward_logits(inputs[0], None, training, rng)
        from ielab.tensorcore import ops

        embeds = [layoutcore.embed_tokens(inp, self.encoder_params)
                  for inp in inputs]
        x = ops.concat_rows(embeds)
        bias = layoutcore.block_attention_bias(
            [inp.length for inp in inputs], [inp.mask for inp in inputs])
        mask = np.concatenate([inp.mask for inp in inputs])
        L = layoutcore.encoder_forward(x, mask, self.encoder_params,
                                       attn_bias=bias)
        mode = self.spec.fusion
        if mode is FusionMode.STYLE_SUM or mode is FusionMode.STYLE_CONCAT:
            style_ids = np.concatenate([inp.style_ids for inp in inputs], axis=1)
            fuse = fuse_style_sum if mode is FusionMode.STYLE_SUM \
                else fuse_style_concat
            e = fuse(L, style_ids, self.style)
        else:
            e = L
        return head_logits(e, self.head, training, rng)

    def predict_probs(self, inp: ModelInput, rasters=None) -> np.ndarray:
        """Inference-mode class probabilities, (T, label_count)."""
        return classify(self.fused_output(inp, rasters), self.head).data

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.parameters().items()}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(arrays) != set(params):
            missing = set(params) ^ set(arrays)
            raise CheckpointMismatchError(
                f"parameter names do not match the model: {sorted(missing)}")
        for name, arr in arrays.items():
            if params[name].data.shape != arr.shape:
                raise CheckpointMismatchError(
                    f"parameter {name!r}: shape {arr.shape} does not match "
                    f"model shape {params[name].data.shape}")
            params[name].data[...] = arr

    def save(self, path, extra_config: dict | None = None) -> None:
        config = {"spec": self.spec.to_json()}
        if extra_config:
            config.update(extra_config)
        ckpt.save_checkpoint(path, config, self.parameters())

    @classmethod
    def load(cls, path) -> tuple["TokenTagger", dict]:
        config, arrays = ckpt.load_checkpoint(path)
        spec = TaggerSpec.from_json(config["spec"])
        model = cls.build(spec)
        model.restore(arrays)
        return model, config


def with_resolved_sizes(spec: TaggerSpec, word_vocab: int, label_count: int,
                        style_vocab_sizes) -> TaggerSpec:
    """Fill corpus-dependent sizes into a spec template."""
    return replace(spec,
                   encoder=replace(spec.encoder, word_vocab=word_vocab,
                                   label_count=label_count),
                   style_vocab_sizes=tuple(style_vocab_sizes))
