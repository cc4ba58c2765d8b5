"""Fine-tuning protocol: epochs, augmentation, model selection, k-fold CV.

Each optimizer step consumes one batch of documents (their chunks pooled into
a token-weighted cross-entropy), runs one tape backward, and applies Adam at
a constant learning rate. After every epoch the validation split is scored
with entity-level weighted F1 (no augmentation, no dropout) and the best
epoch's parameters are kept, earlier epochs winning ties.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ielab.docstream import (
    BucketingConfig,
    DocumentRecord,
    Vocabularies,
    build_vocabularies,
    encode_document,
)
from ielab.errors import ConfigError
from ielab.evalsuite.accounting import count_parameters
from ielab.evalsuite.scoring import ClassReport, entity_scores
from ielab.stylefuse.model import TaggerSpec, TokenTagger, with_resolved_sizes
from ielab.tensorcore import AdamState, Tape, adam_step, backward, ops
from ielab.trainloop.augment import augment_bboxes, augment_tokens
from ielab.trainloop.chunking import chunk_document, predict_tags


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-5
    batch_size: int = 2
    epochs: int = 20
    token_replace_rate: float = 0.10
    bbox_shift_max: int = 10
    bbox_scale_range: tuple = (0.95, 1.05)
    max_seq_len: int = 512
    chunk_overlap: int = 100
    val_fraction: float = 0.1
    seed: int = 0
    folds: int = 5

    def __post_init__(self):
        if not 0 < self.chunk_overlap < self.max_seq_len:
            raise ConfigError(
                f"chunk_overlap must lie in (0, {self.max_seq_len}), "
                f"got {self.chunk_overlap}")
        for name in ("token_replace_rate", "val_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0,1), got {v}")
        if self.batch_size < 1 or self.epochs < 1 or self.folds < 2:
            raise ConfigError("batch_size/epochs must be >= 1 and folds >= 2")

    def to_json(self) -> dict:
        return {"lr": self.lr, "batch_size": self.batch_size,
                "epochs": self.epochs,
                "token_replace_rate": self.token_replace_rate,
                "bbox_shift_max": self.bbox_shift_max,
                "bbox_scale_range": list(self.bbox_scale_range),
                "max_seq_len": self.max_seq_len,
                "chunk_overlap": self.chunk_overlap,
                "val_fraction": self.val_fraction, "seed": self.seed,
                "folds": self.folds}

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "bbox_scale_range" in obj:
            obj["bbox_scale_range"] = tuple(obj["bbox_scale_range"])
        return cls(**obj)


@dataclass
class FoldPlan:
    k: int
    seed: int
    folds: list[dict] = field(default_factory=list)  # train/val/test id lists


def make_fold_plan(doc_ids: list[str], k: int, val_fraction: float,
                   seed: int) -> FoldPlan:
    if len(doc_ids) < k:
        raise ConfigError(f"{len(doc_ids)} documents cannot fill {k} folds")
    shuffled = list(np.random.default_rng([seed, 1]).permutation(doc_ids))
    test_folds = [list(part) for part in np.array_split(shuffled, k)]
    plan = FoldPlan(k=k, seed=seed)
    for f in range(k):
        test = test_folds[f]
        pool = [i for i in shuffled if i not in set(test)]
        n_val = max(1, int(round(val_fraction * len(pool))))
        pool_perm = list(np.random.default_rng([seed, 2, f]).permutation(pool))
        plan.folds.append({"val": pool_perm[:n_val],
                           "train": pool_perm[n_val:],
                           "test": test})
    return plan


@dataclass
class FoldResult:
    model: TokenTagger              # restored to the best epoch
    vocabs: Vocabularies
    spec: TaggerSpec
    best_epoch: int
    best_val_f1: float
    val_f1_trace: list[float]
    val_doc_ids: list[str]
    train_loss_trace: list[float]


def _doc_rasters(rasters, doc: DocumentRecord):
    return rasters.get(doc.id) if rasters else None


def train_fold(train_docs: list[DocumentRecord], val_docs: list[DocumentRecord],
               spec_template: TaggerSpec, cfg: TrainConfig,
               bucket_cfg: BucketingConfig, fold_seed: int,
               rasters: dict | None = None) -> FoldResult:
    if not train_docs or not val_docs:
        raise ConfigError("train and validation splits must both be nonempty")
    vocabs = build_vocabularies(train_docs, bucket_cfg)
    spec = with_resolved_sizes(spec_template, vocabs.word.size,
                               len(vocabs.labels), vocabs.style.size_list())
    spec = replace(spec, encoder=replace(spec.encoder, seed=fold_seed,
                                         max_seq_len=cfg.max_seq_len))
    model = TokenTagger.build(spec)
    params = model.parameters()
    label_names = vocabs.label_names()

    enc_train = [encode_document(d, vocabs, bucket_cfg) for d in train_docs]
    enc_val = [encode_document(d, vocabs, bucket_cfg, strict_labels=False)
               for d in val_docs]
    gold_val = [[t.label for t in d.tokens] for d in val_docs]
    train_rasters = [_doc_rasters(rasters, d) for d in train_docs]
    val_rasters = [_doc_rasters(rasters, d) for d in val_docs]

    shuffle_rng = np.random.default_rng([fold_seed, 10])
    aug_rng = np.random.default_rng([fold_seed, 11])
    drop_rng = np.random.default_rng([fold_seed, 12])
    state = AdamState(lr=cfg.lr)

    trace: list[float] = []
    loss_trace: list[float] = []
    best_f1, best_epoch, best_snapshot = -1.0, -1, None
    batched = spec.fusion.value != "IMAGE"  # image path needs per-doc rasters
    n = len(enc_train)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for bstart in range(0, n, cfg.batch_size):
            pieces = []
            for di in order[bstart:bstart + cfg.batch_size]:
                x = augment_tokens(enc_train[di], cfg.token_replace_rate,
                                   aug_rng, vocabs.word.size)
                x = augment_bboxes(x, cfg, aug_rng)
                for ch in chunk_document(x, cfg, train_docs[di].id):
                    pieces.append((ch, train_rasters[di]))
            tape = Tape()
            with tape:
                tape.watch(*params.values())
                if batched:
                    inputs = [ch.inputs for ch, _ in pieces]
                    logits = model.forward_logits_batch(inputs, training=True,
                                                        rng=drop_rng)
                    loss = ops.cross_entropy_masked(
                        logits,
                        np.concatenate([i.label_ids for i in inputs]),
                        np.concatenate([i.mask for i in inputs]))
                else:
                    total = sum(int(ch.inputs.mask.sum()) for ch, _ in pieces)
                    loss = None
                    for ch, rast in pieces:
                        logits = model.forward_logits(ch.inputs, rast,
                                                      training=True,
                                                      rng=drop_rng)
                        ce = ops.cross_entropy_masked(
                            logits, ch.inputs.label_ids, ch.inputs.mask)
                        term = ops.scale(ce, int(ch.inputs.mask.sum()) / total)
                        loss = term if loss is None else ops.add(loss, term)
            epoch_losses.append(loss.item())
            grads = backward(loss, tape)
            adam_step(params,
                      {name: grads[t.node_id].data for name, t in params.items()},
                      state)
        loss_trace.append(float(np.mean(epoch_losses)))
        preds = [predict_tags(model, enc, cfg, label_names, rast)
                 for enc, rast in zip(enc_val, val_rasters)]
        f1 = entity_scores(preds, gold_val).weighted_f1
        trace.append(f1)
        if f1 > best_f1:
            best_f1, best_epoch, best_snapshot = f1, epoch, model.snapshot()
    model.restore(best_snapshot)
    return FoldResult(model=model, vocabs=vocabs, spec=spec,
                      best_epoch=best_epoch, best_val_f1=best_f1,
                      val_f1_trace=trace,
                      val_doc_ids=[d.id for d in val_docs],
                      train_loss_trace=loss_trace)


@dataclass
class CVResult:
    per_fold_f1: list[float]
    mean: float
    std: float                      # population std, Table-1 style "m +/- s"
    per_class: ClassReport
    params: int
    fold_details: list[dict]
    plan: FoldPlan
    fold_results: list[FoldResult]

    def to_metrics_json(self) -> dict:
        return {"per_fold": self.per_fold_f1, "mean": self.mean,
                "std": self.std, "per_class": self.per_class.to_json(),
                "params": self.params,
                "folds": self.fold_details}


def cross_validate(docs: list[DocumentRecord], spec_template: TaggerSpec,
                   cfg: TrainConfig, bucket_cfg: BucketingConfig,
                   k: int = 5, rasters: dict | None = None,
                   max_workers: int | None = None) -> CVResult:
    if len(docs) < k:
        raise ConfigError(f"corpus of {len(docs)} documents is smaller than k={k}")
    by_id = {d.id: d for d in docs}
    plan = make_fold_plan([d.id for d in docs], k, cfg.val_fraction, cfg.seed)

    def run_fold(f: int) -> dict:
        fold = plan.folds[f]
        train = [by_id[i] for i in fold["train"]]
        val = [by_id[i] for i in fold["val"]]
        test = [by_id[i] for i in fold["test"]]
        res = train_fold(train, val, spec_template, cfg, bucket_cfg,
                         fold_seed=cfg.seed ^ f, rasters=rasters)
        enc_test = [encode_document(d, res.vocabs, bucket_cfg,
                                    strict_labels=False) for d in test]
        preds = [predict_tags(res.model, e, cfg, res.vocabs.label_names(),
                              _doc_rasters(rasters, d))
                 for e, d in zip(enc_test, test)]
        gold = [[t.label for t in d.tokens] for d in test]
        return {"result": res, "preds": preds, "gold": gold,
                "f1": entity_scores(preds, gold).weighted_f1}

    if max_workers is None:
        max_workers = int(os.environ.get("IELAB_THREADS", "1"))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run_fold, range(k)))
    else:
        outcomes = [run_fold(f) for f in range(k)]

    per_fold = [o["f1"] for o in outcomes]
    pooled_preds = [p for o in outcomes for p in o["preds"]]
    pooled_gold = [g for o in outcomes for g in o["gold"]]
    details = [{"fold": f,
                "f1": outcomes[f]["f1"],
                "best_epoch": outcomes[f]["result"].best_epoch,
                "best_val_f1": outcomes[f]["result"].best_val_f1,
                "val_f1_trace": outcomes[f]["result"].val_f1_trace,
                **{key: plan.folds[f][key] for key in ("train", "val", "test")}}
               for f in range(k)]
    return CVResult(
        per_fold_f1=per_fold,
        mean=float(np.mean(per_fold)),
        std=float(np.std(per_fold)),
        per_class=entity_scores(pooled_preds, pooled_gold),
        params=count_parameters(outcomes[0]["result"].spec).total,
        fold_details=details,
        plan=plan,
        fold_results=[o["result"] for o in outcomes])
