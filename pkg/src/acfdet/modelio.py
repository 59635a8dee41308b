"""Versioned binary model serialization (little-endian, checksummed).

Layout (all integers little-endian):
  magic "ACFDETMV" | u16 format version | u64 payload length | payload | u32 CRC32
Payload: u8 view count; per view a tag byte (0 trained cascade, 1 mirror
reference + u8 source); then per-view adjustment parameters and the fusion
configuration.  A trained cascade serializes, in order: its channel
configuration (including the LUV normalization constants), window size, view
id, tree arrays, stage thresholds, and score range — so a model file fully
describes its own feature computation.  Mirrored views are re-derived on
load.  Round-trips are byte-exact.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from . import channels
from .boosting import SoftCascadeModel
from .channels import COLOR_SPACES, GRADIENT_COLOR_SPACES, POOLING_METHODS, ChannelConfig
from .detector import MirrorRef, MultiViewModel
from .errors import (
    ConfigError,
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from .postprocess import MERGE_MODES, RERANK_MODES, AdjustmentParams, FusionConfig

MAGIC = b"ACFDETMV"
FORMAT_VERSION = 1

_WEIGHTING = ("score", "uniform")


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def pack(self, fmt, *vals):
        self.parts.append(struct.pack("<" + fmt, *vals))

    def array(self, arr, dtype):
        self.parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def pack(self, fmt):
        fmt = "<" + fmt
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ModelTruncatedError("model file ends inside a record")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals if len(vals) > 1 else vals[0]

    def array(self, count, dtype):
        dtype = np.dtype(dtype)
        size = count * dtype.itemsize
        if self.pos + size > len(self.data):
            raise ModelTruncatedError("model file ends inside an array")
        arr = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos).copy()
        self.pos += size
        return arr


def _write_channel_config(w: _Writer, cfg: ChannelConfig):
    w.pack(
        "BBHBBB",
        COLOR_SPACES.index(cfg.color_space),
        GRADIENT_COLOR_SPACES.index(cfg.gradient_color_space),
        cfg.num_orientation_bins,
        cfg.post_smooth_radius,
        cfg.shrink,
        POOLING_METHODS.index(cfg.pooling),
    )
    w.pack("Bq", cfg.stochastic_seed is not None, cfg.stochastic_seed or 0)
    w.pack("B", len(cfg.pre_smooth_radii))
    for r in cfg.pre_smooth_radii:
        w.pack("B", r)
    w.pack(
        "6d",
        *channels.LUV_L_RANGE,
        *channels.LUV_U_RANGE,
        *channels.LUV_V_RANGE,
    )


def _read_channel_config(r: _Reader) -> ChannelConfig:
    color, grad, bins, post, shrink, pooling = r.pack("BBHBBB")
    has_seed, seed = r.pack("Bq")
    n_radii = r.pack("B")
    radii = tuple(r.pack("B") for _ in range(n_radii))
    luv = r.pack("6d")
    expected = channels.LUV_L_RANGE + channels.LUV_U_RANGE + channels.LUV_V_RANGE
    if tuple(luv) != expected:
        raise ModelFormatError(f"model pins LUV normalization constants {luv}, library uses {expected}")
    try:
        return ChannelConfig(
            color_space=COLOR_SPACES[color],
            gradient_color_space=GRADIENT_COLOR_SPACES[grad],
            num_orientation_bins=bins,
            pre_smooth_radii=radii,
            post_smooth_radius=post,
            shrink=shrink,
            pooling=POOLING_METHODS[pooling],
            stochastic_seed=seed if has_seed else None,
        )
    except (IndexError, ConfigError) as exc:
        raise ModelFormatError(f"invalid channel configuration in model: {exc}") from exc


def _write_cascade(w: _Writer, m: SoftCascadeModel):
    _write_channel_config(w, m.channel_config)
    w.pack("Hh", m.window_size, m.view_id)
    w.pack("I", m.num_trees)
    w.array(m.features, "<i4")
    w.array(m.thresholds, "<f8")
    w.array(m.leaves, "<f8")
    w.array(m.alphas, "<f8")
    w.array(m.stage_thresholds, "<f8")
    w.pack("2d", *m.score_range)


def _read_cascade(r: _Reader) -> SoftCascadeModel:
    cfg = _read_channel_config(r)
    window, view_id = r.pack("Hh")
    T = r.pack("I")
    feats = r.array(T * 3, "<i4").reshape(T, 3)
    thr = r.array(T * 3, "<f8").reshape(T, 3)
    leaves = r.array(T * 4, "<f8").reshape(T, 4)
    alphas = r.array(T, "<f8")
    stage = r.array(T, "<f8")
    lo, hi = r.pack("2d")
    return SoftCascadeModel(
        features=feats,
        thresholds=thr,
        leaves=leaves,
        alphas=alphas,
        stage_thresholds=stage,
        window_size=window,
        channel_config=cfg,
        score_range=(lo, hi),
        view_id=view_id,
    )


def serialize_model(model: MultiViewModel) -> bytes:
    w = _Writer()
    w.pack("B", len(model.views))
    for view in model.views:
        if isinstance(view, MirrorRef):
            w.pack("BB", 1, view.source)
        else:
            w.pack("B", 0)
            _write_cascade(w, view)
    for adj in model.adjustments:
        w.pack("4d", adj.dx, adj.dy, adj.sw, adj.sh)
    f = model.fusion
    w.pack(
        "BdBddB",
        RERANK_MODES.index(f.rerank),
        f.rerank_overlap_threshold,
        MERGE_MODES.index(f.merging),
        f.merge_overlap_threshold,
        f.score_threshold,
        _WEIGHTING.index(f.combination_weighting),
    )
    payload = w.bytes()
    header = MAGIC + struct.pack("<HQ", FORMAT_VERSION, len(payload))
    return header + payload + struct.pack("<I", zlib.crc32(header + payload))


def deserialize_model(data: bytes) -> MultiViewModel:
    head_len = len(MAGIC) + struct.calcsize("<HQ")
    if len(data) < head_len:
        raise ModelTruncatedError("file too short for a model header")
    if data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a detector model file (bad magic)")
    version, payload_len = struct.unpack_from("<HQ", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version} unsupported (expected {FORMAT_VERSION})")
    if len(data) < head_len + payload_len + 4:
        raise ModelTruncatedError(f"model payload truncated: expected {payload_len} payload bytes")
    stored_crc = struct.unpack_from("<I", data, head_len + payload_len)[0]
    actual_crc = zlib.crc32(data[: head_len + payload_len])
    if stored_crc != actual_crc:
        raise ModelChecksumError("model checksum mismatch")

    r = _Reader(data[head_len : head_len + payload_len])
    n_views = r.pack("B")
    views: list[SoftCascadeModel | MirrorRef] = []
    for _ in range(n_views):
        tag = r.pack("B")
        if tag == 1:
            views.append(MirrorRef(source=r.pack("B")))
        elif tag == 0:
            views.append(_read_cascade(r))
        else:
            raise ModelFormatError(f"unknown view tag {tag}")
    adjustments = [AdjustmentParams(*r.pack("4d")) for _ in range(n_views)]
    rer, rthr, mer, mthr, sthr, wtg = r.pack("BdBddB")
    fusion = FusionConfig(
        rerank=RERANK_MODES[rer],
        rerank_overlap_threshold=rthr,
        merging=MERGE_MODES[mer],
        merge_overlap_threshold=mthr,
        score_threshold=sthr,
        combination_weighting=_WEIGHTING[wtg],
    )
    return MultiViewModel(views=views, adjustments=adjustments, fusion=fusion)


def save_model(model: MultiViewModel, path: str | Path):
    Path(path).write_bytes(serialize_model(model))


def load_model(path: str | Path) -> MultiViewModel:
    return deserialize_model(Path(path).read_bytes())
