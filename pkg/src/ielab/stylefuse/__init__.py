"""Token-representation enrichment: style fusion, image path, classifier."""

from ielab.stylefuse.fusion import (
    ClassifierHead,
    FusionMode,
    StyleTables,
    classify,
    fuse_style_concat,
    fuse_style_sum,
    head_logits,
)
from ielab.stylefuse.image import (
    ImagePathConfig,
    backbone_forward,
    image_embed_and_fuse,
    roi_align,
    roi_align_batch,
)
from ielab.stylefuse.model import TaggerSpec, TokenTagger, with_resolved_sizes

__all__ = [
    "ClassifierHead", "FusionMode", "ImagePathConfig", "StyleTables",
    "TaggerSpec", "TokenTagger", "backbone_forward", "classify",
    "fuse_style_concat", "fuse_style_sum", "head_logits",
    "image_embed_and_fuse", "roi_align", "roi_align_batch",
    "with_resolved_sizes",
]
