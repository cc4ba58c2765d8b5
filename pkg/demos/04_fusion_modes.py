"""The four token-representation strategies side by side.

Builds the same document under each fusion mode and shows what each one adds:
nothing (BASELINE), style rows summed into the hidden state (STYLE_SUM),
style rows appended after it (STYLE_CONCAT), or RoIAlign-pooled visual
features from a rendered page (IMAGE).

Run:  python demos/04_fusion_modes.py
"""

import numpy as np

from ielab import pgm, synthdocs
from ielab.docstream import BucketingConfig, build_vocabularies, encode_document
from ielab.evalsuite import count_parameters
from ielab.layoutcore import EncoderConfig
from ielab.stylefuse import (
    FusionMode,
    ImagePathConfig,
    TaggerSpec,
    TokenTagger,
    roi_align,
    backbone_forward,
)
from ielab.stylefuse.model import with_resolved_sizes
from ielab.tensorcore import Tensor

docs = synthdocs.generate_corpus(synthdocs.GeneratorConfig(
    template="INVOICE", n_docs=4, tokens_per_doc=(16, 24), seed=3))
bucket = BucketingConfig()
vocabs = build_vocabularies(docs, bucket)
inp = encode_document(docs[0], vocabs, bucket)
rasters = [pgm.raster_to_input(p.grid) for p in synthdocs.render_pages(docs[0])]

enc = EncoderConfig(word_vocab=2, label_count=1, hidden=32, layers=1,
                    heads=2, seed=9)
template = TaggerSpec(encoder=enc, fusion=FusionMode.BASELINE, style_dim=8,
                      image=ImagePathConfig())

print(f"document {docs[0].id}: {inp.length} tokens, "
      f"{len(vocabs.labels)} labels\n")
for mode in FusionMode:
    spec = with_resolved_sizes(
        TaggerSpec(encoder=enc, fusion=mode, style_dim=8,
                   image=ImagePathConfig()),
        vocabs.word.size, len(vocabs.labels), vocabs.style.size_list())
    model = TokenTagger.build(spec)
    fused = model.fused_output(inp, rasters if mode is FusionMode.IMAGE else None)
    probs = model.predict_probs(inp, rasters if mode is FusionMode.IMAGE else None)
    total = count_parameters(spec).total
    print(f"{mode.value:13s} fused width {fused.data.shape[1]:4d}  "
          f"params {total:8,}  row0 sums to {probs[0].sum():.6f}")

# The image path in slow motion: raster -> feature map -> one token's pooled
# window. The pooled grid is what the projection layer sees.
spec = with_resolved_sizes(
    TaggerSpec(encoder=enc, fusion=FusionMode.IMAGE, image=ImagePathConfig()),
    vocabs.word.size, len(vocabs.labels), vocabs.style.size_list())
model = TokenTagger.build(spec)
fmap = backbone_forward(Tensor(rasters[0]), model.image_params, spec.image)
print(f"\nraster {rasters[0].shape} -> feature map {fmap.data.shape}")
tok = docs[0].tokens[1]
box = (inp.x1_ids[1], inp.y1_ids[1], inp.x2_ids[1], inp.y2_ids[1])
pooled = roi_align(fmap, box, spec.image.roi_bins)
print(f"RoIAlign over {tok.text!r} box {tuple(int(v) for v in box)} -> "
      f"{pooled.data.shape}; channel-0 bins (randomly initialized backbone):")
with np.printoptions(precision=2):
    print(pooled.data[0] * 1e4, "(x 1e-4)")
