"""Image-embedding path: tiny conv backbone, RoIAlign, linear projection.

A page raster (grayscale grid over the page) runs through three strided
conv+GELU stages to build a feature map; each token's quantized box is pooled
from that map with RoIAlign (r x r bins, 2x2 averaged bilinear samples per
bin, zero padding outside the map) and projected to the encoder width, then
element-wise summed with the token's encoder output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ielab.errors import ConfigError
from ielab.tensorcore import ops
from ielab.tensorcore.engine import ShapeError, Tensor, active_tape


@dataclass(frozen=True)
class ImagePathConfig:
    raster_channels: int = 1
    raster_size: int = 128                    # square H == W pages
    backbone_channels: tuple = (8, 16, 32)    # one strided stage per entry
    kernel_size: int = 3
    stride: int = 2
    roi_bins: int = 3                         # r x r output bins

    def __post_init__(self):
        if self.kernel_size % 2 == 0:
            raise ConfigError("backbone kernel size must be odd")
        if self.roi_bins < 1:
            raise ConfigError("roi_bins must be >= 1")

    @property
    def feature_channels(self) -> int:
        return self.backbone_channels[-1]

    def feature_hw(self) -> tuple[int, int]:
        hw = self.raster_size
        for _ in self.backbone_channels:
            hw = (hw + 2 * (self.kernel_size // 2) - self.kernel_size) \
                // self.stride + 1
        return hw, hw

    @property
    def roi_width(self) -> int:
        return self.feature_channels * self.roi_bins * self.roi_bins

    def to_json(self) -> dict:
        return {"raster_channels": self.raster_channels,
                "raster_size": self.raster_size,
                "backbone_channels": list(self.backbone_channels),
                "kernel_size": self.kernel_size, "stride": self.stride,
                "roi_bins": self.roi_bins}

    @classmethod
    def from_json(cls, obj: dict) -> "ImagePathConfig":
        obj = dict(obj)
        obj["backbone_channels"] = tuple(obj["backbone_channels"])
        return cls(**obj)


def backbone_forward(raster: Tensor, params: dict, config: ImagePathConfig) -> Tensor:
    """Strided conv+GELU stages from the raster to the page feature map."""
    if raster.data.shape[0] != config.raster_channels:
        raise ShapeError(
            f"raster has {raster.data.shape[0]} channels, config expects "
            f"{config.raster_channels}")
    pad = config.kernel_size // 2
    x = raster
    for i in range(len(config.backbone_channels)):
        kernel = params[f"image.backbone.{i}.kernel"]
        bias = params[f"image.backbone.{i}.bias"]
        x = ops.conv2d(x, kernel, stride=config.stride, padding=pad)
        c_out = kernel.data.shape[0]
        x = ops.add(x, ops.reshape(bias, (c_out, 1, 1)))
        x = ops.gelu(x)
    return x


def _bilinear_weights(ys: np.ndarray, xs: np.ndarray, H: int, W: int):
    """Corner indices and weights for zero-padded bilinear sampling.

    Cell (r, c) has its center at (r + 0.5, c + 0.5). Returns four
    (row, col, weight) triples of arrays matching ys/xs.
    """
    u = ys - 0.5
    v = xs - 0.5
    r0 = np.floor(u).astype(np.intp)
    c0 = np.floor(v).astype(np.intp)
    du = u - r0
    dv = v - c0
    corners = []
    for rr, wy in ((r0, 1.0 - du), (r0 + 1, du)):
        for cc, wx in ((c0, 1.0 - dv), (c0 + 1, dv)):
            valid = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
            w = wy * wx * valid
            corners.append((np.clip(rr, 0, H - 1), np.clip(cc, 0, W - 1), w))
    return corners


def _roi_sample_coords(boxes: np.ndarray, r: int, fh: int, fw: int):
    """(T, r, 2, r, 2) sample coordinates for boxes in [0,1000] space.

    Index order per box is (bin_row, sample_row, bin_col, sample_col).
    """
    b = np.asarray(boxes, dtype=np.float64)
    fx1, fx2 = b[:, 0] * fw / 1000.0, b[:, 2] * fw / 1000.0
    fy1, fy2 = b[:, 1] * fh / 1000.0, b[:, 3] * fh / 1000.0
    bw = (fx2 - fx1) / r
    bh = (fy2 - fy1) / r
    offs = (np.arange(2) + 0.5) / 2.0                      # bin-interior offsets
    steps = np.arange(r)[:, None] + offs[None, :]          # (r, 2)
    ys = fy1[:, None, None] + steps[None] * bh[:, None, None]   # (T, r, 2)
    xs = fx1[:, None, None] + steps[None] * bw[:, None, None]
    T = b.shape[0]
    grid_y = np.broadcast_to(ys[:, :, :, None, None], (T, r, 2, r, 2))
    grid_x = np.broadcast_to(xs[:, None, None, :, :], (T, r, 2, r, 2))
    return grid_y, grid_x


def roi_align_batch(fmap: Tensor, boxes: np.ndarray, r: int) -> Tensor:
    """Pool each box into flattened (C*r*r) features; one tape node total.

    Boxes are (T, 4) arrays of (x1, y1, x2, y2) in [0, 1000] page coordinates;
    degenerate boxes reduce to point evaluation.
    """
    fd = fmap.data
    C, H, W = fd.shape
    T = boxes.shape[0]
    grid_y, grid_x = _roi_sample_coords(boxes, r, H, W)
    corners = _bilinear_weights(grid_y.ravel(), grid_x.ravel(), H, W)
    flat = fd.reshape(C, H * W)
    vals = np.zeros((C, T * r * r * 4))
    for rr, cc, w in corners:
        vals += w * flat[:, rr * W + cc]
    # average the 2x2 samples inside each bin, then flatten channel-major
    pooled = vals.reshape(C, T, r, 2, r, 2).mean(axis=(3, 5))   # (C, T, r, r)
    out_data = pooled.transpose(1, 0, 2, 3).reshape(T, C * r * r)
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None:
        pf = tape.tracked_id(fmap)
        if pf >= 0:
            def bw(g, corners=corners, C=C, H=H, W=W, T=T, r=r):
                # undo the bin average: each of the 4 samples carries g/4
                gsamp = np.repeat(np.repeat(
                    g.reshape(T, C, r, r).transpose(1, 0, 2, 3), 2, axis=2),
                    2, axis=3) / 4.0
                gflat = gsamp.reshape(C, T * r * r * 4)
                dmap = np.zeros((C, H * W))
                rows = np.arange(C)[:, None]
                for rr, cc, w in corners:
                    np.add.at(dmap, (rows, (rr * W + cc)[None, :]), w * gflat)
                return (dmap.reshape(C, H, W),)
            tape.push(out, (pf,), bw)
    return out


def roi_align(fmap: Tensor, box, r: int) -> Tensor:
    """Fixed-size (C, r, r) pooling of one box; differentiable w.r.t. fmap."""
    C = fmap.data.shape[0]
    flat = roi_align_batch(fmap, np.asarray(box, dtype=np.float64)[None, :], r)
    return ops.reshape(flat, (C, r, r))


def image_embed_and_fuse(L: Tensor, boxes: np.ndarray, page_ids: np.ndarray,
                         rasters: list, params: dict,
                         config: ImagePathConfig) -> Tensor:
    """e_i = L_i + proj(RoIAlign(feature_map(page_i), box_i)).

    `rasters` holds one (C, H, W) grid per page; backbone, projection, and the
    upstream encoder all train jointly through this path.
    """
    pages = np.asarray(page_ids)
    needed = np.unique(pages)
    if len(needed) and needed.max() >= len(rasters):
        raise ConfigError(
            f"token references page {int(needed.max())} but only "
            f"{len(rasters)} rasters were provided")
    r = config.roi_bins
    if len(needed) == 1:
        fmap = backbone_forward(_as_tensor(rasters[int(needed[0])]), params, config)
        rows = roi_align_batch(fmap, boxes, r)
    else:
        order = np.argsort(pages, kind="stable")
        chunks = []
        for p in needed:
            fmap = backbone_forward(_as_tensor(rasters[int(p)]), params, config)
            chunks.append(roi_align_batch(fmap, boxes[pages == p], r))
        stacked = ops.concat_rows(chunks)
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        rows = ops.embedding_lookup(stacked, inv)  # row gather back to token order
    v = ops.linear(rows, params["image.proj.weight"], params["image.proj.bias"])
    return ops.add(L, v)


def _as_tensor(raster) -> Tensor:
    return raster if isinstance(raster, Tensor) else Tensor(raster)
