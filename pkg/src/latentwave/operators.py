"""The learned networks: autoencoding operator, super-resolution operator and
the conditional latent flow network, with their losses and checkpoints.

Every network is a plain parameter container plus pure apply functions, so a
forward pass records onto whichever :class:`Tape` is active.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fields import NORM, WaveField
from .specops import RfnoBlockParams, channel_mix, rfno_block, spectral_resample, xavier
from .tensorcore import Tensor
from .tensorcore import autodiff as ops
from .tensorcore.serialize import read_tensor, write_tensor

# ---------------------------------------------------------------------------
# data types


@dataclass
class LatentCode:
    """Fixed-shape latent ``[C, X, Y, T]`` (a batch dimension is added when applied)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 4:
            raise ValueError(f"latent must be [C, X, Y, T], got {self.values.shape}")

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class Condition:
    """Event descriptor: hypocentre coordinates and magnitude."""

    hypocenter: tuple
    magnitude: float

    def vector(self) -> np.ndarray:
        return np.array(list(self.hypocenter) + [self.magnitude], dtype=np.float64)


@dataclass(frozen=True)
class ConditionRanges:
    """Per-component ``(low, high)`` ranges used to map conditions onto ``[-1, 1]``."""

    bounds: tuple = ((0.0, 32.0), (0.0, 16.0), (4.4, 7.0))

    def normalize(self, c: Condition) -> np.ndarray:
        v = c.vector()
        if len(v) != len(self.bounds):
            raise ValueError(f"condition has {len(v)} components, ranges cover {len(self.bounds)}")
        out = np.empty_like(v)
        for i, (x, (lo, hi)) in enumerate(zip(v, self.bounds)):
            if not lo - 1e-9 <= x <= hi + 1e-9:
                raise ValueError(f"condition component {i} = {x} outside [{lo}, {hi}]")
            out[i] = 2.0 * (x - lo) / (hi - lo) - 1.0 if hi > lo else 0.0
        return out


def _bias(width: int, name: str) -> Tensor:
    return Tensor(np.zeros(width), True, name)


def _stage_grids(start: Sequence[int], stop: Sequence[int], count: int) -> list[tuple]:
    """Geometric interpolation of grid extents over ``count`` stages, ending at ``stop``."""
    grids = []
    for s in range(1, count + 1):
        f = s / count
        grids.append(tuple(max(1, int(round(a ** (1 - f) * b ** f))) for a, b in zip(start, stop)))
    return grids


def _full_modes(*grids) -> tuple:
    return tuple(max((g[i] + 1) // 2 for g in grids) for i in range(len(grids[0])))


def _block_tensors(blocks) -> list[Tensor]:
    return [t for b in blocks for t in b.tensors()]


def _mse(a: Tensor, b) -> Tensor:
    d = a - b
    return ops.mean(d * d)


def _constant_norm_channel(out: Tensor, norm_index: int | None) -> Tensor:
    """Replace the norm channel by its grid mean, so it is exactly constant."""
    if norm_index is None:
        return out
    c = out.shape[1]
    grid_axes = tuple(range(2, out.ndim))
    parts = []
    for i in range(c):
        ch = ops.getitem(out, (slice(None), slice(i, i + 1)))
        if i == norm_index:
            ch = ops.broadcast_to(ops.mean(ch, axis=grid_axes, keepdims=True), ch.shape)
        parts.append(ch)
    return ops.concat(parts, axis=1)


# ---------------------------------------------------------------------------
# autoencoding operator


@dataclass
class AenoConfig:
    channels: int = 2
    norm_index: int | None = 1
    width: int = 16
    encoder_layers: int = 4
    decoder_layers: int = 4
    data_grid: tuple = (16, 8, 12)
    latent_shape: tuple = (1, 8, 4, 4)
    instance_norm: bool = True

    @property
    def latent_grid(self) -> tuple:
        return tuple(self.latent_shape[1:])


@dataclass
class AenoParams:
    config: AenoConfig
    enc_lift: Tensor
    enc_lift_b: Tensor
    enc_blocks: list
    enc_proj: Tensor
    enc_proj_b: Tensor
    dec_lift: Tensor
    dec_lift_b: Tensor
    dec_blocks: list
    dec_proj: Tensor
    dec_proj_b: Tensor

    @property
    def enc_grids(self) -> list[tuple]:
        cfg = self.config
        return _stage_grids(cfg.data_grid, cfg.latent_grid, cfg.encoder_layers)

    @property
    def dec_grids(self) -> list[tuple]:
        cfg = self.config
        return _stage_grids(cfg.latent_grid, cfg.data_grid, cfg.decoder_layers)

    @classmethod
    def init(cls, rng: np.random.Generator, config: AenoConfig | None = None) -> "AenoParams":
        cfg = config or AenoConfig()
        w, zc = cfg.width, cfg.latent_shape[0]

        def blocks(grids, start, tag):
            out, prev = [], start
            for i, g in enumerate(grids):
                out.append(RfnoBlockParams.init(rng, w, w, _full_modes(prev, g), True, cfg.instance_norm,
                                                f"{tag}.{i}"))
                prev = g
            return out

        enc_grids = _stage_grids(cfg.data_grid, cfg.latent_grid, cfg.encoder_layers)
        dec_grids = _stage_grids(cfg.latent_grid, cfg.data_grid, cfg.decoder_layers)
        return cls(cfg,
                   xavier(rng, cfg.channels, w, "enc.lift"), _bias(w, "enc.lift_b"),
                   blocks(enc_grids, cfg.data_grid, "enc.block"),
                   xavier(rng, w, zc, "enc.proj"), _bias(zc, "enc.proj_b"),
                   xavier(rng, zc, w, "dec.lift"), _bias(w, "dec.lift_b"),
                   blocks(dec_grids, cfg.latent_grid, "dec.block"),
                   xavier(rng, w, cfg.channels, "dec.proj"), _bias(cfg.channels, "dec.proj_b"))

    def encoder_tensors(self) -> list[Tensor]:
        return [self.enc_lift, self.enc_lift_b] + _block_tensors(self.enc_blocks) + [self.enc_proj, self.enc_proj_b]

    def decoder_tensors(self) -> list[Tensor]:
        return [self.dec_lift, self.dec_lift_b] + _block_tensors(self.dec_blocks) + [self.dec_proj, self.dec_proj_b]

    def tensors(self) -> list[Tensor]:
        return self.encoder_tensors() + self.decoder_tensors()


def encode(u: Tensor, p: AenoParams) -> Tensor:
    """Batched encoder: ``[B, C, *grid] -> [B, *latent_shape]`` for any input grid."""
    if u.shape[1] != p.config.channels:
        raise ValueError(f"encoder expects {p.config.channels} channels, got {u.shape[1]}")
    h = channel_mix(u, p.enc_lift, p.enc_lift_b)
    for block, grid in zip(p.enc_blocks, p.enc_grids):
        h = rfno_block(h, block, grid)
    return channel_mix(h, p.enc_proj, p.enc_proj_b)


def decode(z: Tensor, p: AenoParams) -> Tensor:
    """Batched decoder: ``[B, *latent_shape] -> [B, C, *data_grid]``."""
    if tuple(z.shape[1:]) != tuple(p.config.latent_shape):
        raise ValueError(f"latent shape {z.shape[1:]} does not match {p.config.latent_shape}")
    h = channel_mix(z, p.dec_lift, p.dec_lift_b)
    for block, grid in zip(p.dec_blocks, p.dec_grids):
        h = rfno_block(h, block, grid)
    out = channel_mix(h, p.dec_proj, p.dec_proj_b)
    return _constant_norm_channel(out, p.config.norm_index)


def _check_roles(u: WaveField, cfg) -> None:
    if len(u.roles) != cfg.channels or (cfg.norm_index is not None and u.roles[cfg.norm_index] != NORM):
        raise ValueError(f"channel roles {u.roles} do not match the network's channel layout")


def aeno_encode(u_f: WaveField, p: AenoParams) -> LatentCode:
    _check_roles(u_f, p.config)
    return LatentCode(encode(Tensor(u_f.values[None]), p).data[0])


def aeno_decode(z: LatentCode, p: AenoParams, like: WaveField | None = None) -> WaveField:
    values = decode(Tensor(z.values[None]), p).data[0]
    if like is not None:
        return like.with_values(values)
    roles = ["scalar"] * p.config.channels
    if p.config.norm_index is not None:
        roles[p.config.norm_index] = NORM
    return WaveField(values, roles=roles)


def aeno_loss(batch, p: AenoParams) -> Tensor:
    """Mean-squared reconstruction error over the batch and grid."""
    x = _stack(batch)
    return _mse(decode(encode(x, p), p), x)


# ---------------------------------------------------------------------------
# super-resolution operator


@dataclass
class SnoConfig:
    channels: int = 2
    norm_index: int | None = 1
    width: int = 16
    layers: int = 4
    modes: tuple = (12, 6, 10)
    out_grid: tuple = (32, 16, 24)
    instance_norm: bool = True


@dataclass
class SnoParams:
    config: SnoConfig
    lift: Tensor
    lift_b: Tensor
    blocks: list
    proj: Tensor
    proj_b: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, config: SnoConfig | None = None) -> "SnoParams":
        cfg = config or SnoConfig()
        blocks = [RfnoBlockParams.init(rng, cfg.width, cfg.width, cfg.modes, True, cfg.instance_norm, f"sno.block.{i}")
                  for i in range(cfg.layers)]
        # zero projection: the untrained operator is plain spectral upsampling
        proj = Tensor(np.zeros((cfg.width, cfg.channels)), True, "sno.proj")
        return cls(cfg, xavier(rng, cfg.channels, cfg.width, "sno.lift"), _bias(cfg.width, "sno.lift_b"),
                   blocks, proj, _bias(cfg.channels, "sno.proj_b"))

    def tensors(self) -> list[Tensor]:
        return [self.lift, self.lift_b] + _block_tensors(self.blocks) + [self.proj, self.proj_b]


def super_resolve(u_f: Tensor, p: SnoParams, out_grid: Sequence[int] | None = None) -> Tensor:
    """Batched SNO: spectral upsampling onto ``out_grid`` plus a learned correction."""
    cfg = p.config
    out_grid = tuple(cfg.out_grid if out_grid is None else out_grid)
    in_grid = tuple(u_f.shape[2:])
    if len(out_grid) != len(in_grid) or any(o < i for o, i in zip(out_grid, in_grid)):
        raise ValueError(f"requested grid {out_grid} is coarser than the input grid {in_grid}")
    if u_f.shape[1] != cfg.channels:
        raise ValueError(f"SNO expects {cfg.channels} channels, got {u_f.shape[1]}")
    base = spectral_resample(u_f, out_grid)
    h = channel_mix(base, p.lift, p.lift_b)
    for block in p.blocks:
        h = rfno_block(h, block)
    out = base + channel_mix(h, p.proj, p.proj_b)
    return _constant_norm_channel(out, cfg.norm_index)


def sno_apply(u_f: WaveField, p: SnoParams, out_grid: Sequence[int] | None = None,
              fine_spacing: tuple | None = None) -> WaveField:
    _check_roles(u_f, p.config)
    values = super_resolve(Tensor(u_f.values[None]), p, out_grid).data[0]
    if fine_spacing is None:
        ratio = [i / o for i, o in zip(u_f.grid, values.shape[1:])]
        fine_spacing = (u_f.dx * ratio[0], u_f.dy * ratio[1], u_f.dt * ratio[2])
    dx, dy, dt = fine_spacing
    return u_f.with_values(values, dx=dx, dy=dy, dt=dt)


def sno_loss(pairs, p: SnoParams) -> Tensor:
    """Mean-squared error of ``S(u_f)`` against ``u`` over a batch of pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty batch")
    x = _stack([a for a, _ in pairs])
    y = _stack([b for _, b in pairs])
    return _mse(super_resolve(x, p, y.shape[2:]), y)


def _stack(batch) -> Tensor:
    if isinstance(batch, Tensor):
        if batch.shape[0] == 0:
            raise ValueError("empty batch")
        return batch
    items = [b.values if isinstance(b, WaveField) else np.asarray(b) for b in batch]
    if not items:
        raise ValueError("empty batch")
    return Tensor(np.stack(items))


# ---------------------------------------------------------------------------
# conditional latent flow network


@dataclass
class FlowNetConfig:
    latent_shape: tuple = (1, 8, 4, 4)
    width: int = 32
    layers: int = 4
    time_features: int = 16
    condition_dim: int = 3
    # clean prediction as z_t + (1 - t) F: exact at t = 1, where errors in
    # the clean estimate are amplified by 1 / (1 - t) during sampling
    precondition: bool = True
    ranges: ConditionRanges = field(default_factory=ConditionRanges)
    # hypocenter maps (see source_map) fed to the lift and to every block;
    # 0 disables. ``domain`` is the spatial extent in km.
    source_sigma: float = 0.0
    domain: tuple = (32.0, 16.0)


@dataclass
class FlowNetParams:
    config: FlowNetConfig
    lift: Tensor
    lift_b: Tensor
    time_w: Tensor
    cond_w: Tensor
    emb_b: Tensor
    block_emb: list
    blocks: list
    proj: Tensor
    proj_b: Tensor
    block_src: list = field(default_factory=list)

    @classmethod
    def init(cls, rng: np.random.Generator, config: FlowNetConfig | None = None) -> "FlowNetParams":
        cfg = config or FlowNetConfig()
        c, w = cfg.latent_shape[0], cfg.width
        grid = tuple(cfg.latent_shape[1:])
        modes = _full_modes(grid)
        src = cfg.source_sigma > 0
        blocks = [RfnoBlockParams.init(rng, w, w, modes, True, False, f"flow.block.{i}") for i in range(cfg.layers)]
        return cls(cfg,
                   xavier(rng, c + SOURCE_CHANNELS * src, w, "flow.lift"), _bias(w, "flow.lift_b"),
                   xavier(rng, cfg.time_features, w, "flow.time_w"),
                   xavier(rng, cfg.condition_dim, w, "flow.cond_w"), _bias(w, "flow.emb_b"),
                   [xavier(rng, w, w, f"flow.block_emb.{i}") for i in range(cfg.layers)],
                   blocks,
                   xavier(rng, w, c, "flow.proj"), _bias(c, "flow.proj_b"),
                   [xavier(rng, SOURCE_CHANNELS, w, f"flow.block_src.{i}") for i in range(cfg.layers)] if src else [])

    def tensors(self) -> list[Tensor]:
        return ([self.lift, self.lift_b, self.time_w, self.cond_w, self.emb_b] + list(self.block_emb)
                + _block_tensors(self.blocks) + [self.proj, self.proj_b] + list(self.block_src))


# low enough that the embedding varies smoothly across Euler step sizes
MAX_TIME_FREQUENCY = 30.0


def time_features(t: np.ndarray, n: int) -> np.ndarray:
    """Sinusoidal features ``[B, n]`` of times in ``[0, 1]`` at geometric frequencies."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = n // 2
    freqs = np.exp(np.linspace(0.0, math.log(MAX_TIME_FREQUENCY), half)) if half > 1 else np.ones(half)
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


SOURCE_CHANNELS = 3


def source_map(cond: np.ndarray, cfg: FlowNetConfig) -> np.ndarray:
    """Hypocenter channels ``[B, 3, *latent grid]`` from normalized conditions, constant along the last axis.

    Channel 0 is a Gaussian bump of width ``source_sigma``; channels 1 and 2
    are the x and y offsets of each cell from the hypocenter in units of
    ``2 * source_sigma``. Latent cell ``i`` along a spatial axis sits at
    ``i * domain / n``.
    """
    cond = np.atleast_2d(cond)
    grid = tuple(cfg.latent_shape[1:])
    offsets = []
    for ax in range(2):
        lo, hi = cfg.ranges.bounds[ax]
        centre = lo + 0.5 * (cond[:, ax] + 1.0) * (hi - lo)
        pos = np.arange(grid[ax]) * cfg.domain[ax] / grid[ax]
        d = pos[None, :] - centre[:, None]
        offsets.append(d[:, :, None] if ax == 0 else d[:, None, :])
    dx, dy = np.broadcast_arrays(*offsets)
    bump = np.exp(-(dx ** 2 + dy ** 2) / (2.0 * cfg.source_sigma ** 2))
    scale = 2.0 * cfg.source_sigma
    maps = np.stack([bump, dx / scale, dy / scale], axis=1)
    maps = maps.reshape(maps.shape + (1,) * (len(grid) - 2))
    return np.ascontiguousarray(np.broadcast_to(maps, maps.shape[:4] + grid[2:]))


def flow_forward(z_t: Tensor, t: np.ndarray, cond: np.ndarray, p: FlowNetParams) -> Tensor:
    """Batched clean prediction: ``z_t [B, *latent]``, ``t [B]``, normalized ``cond [B, D]``."""
    cfg = p.config
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("flow time must lie in [0, 1]")
    if tuple(z_t.shape[1:]) != tuple(cfg.latent_shape):
        raise ValueError(f"latent shape {z_t.shape[1:]} does not match {cfg.latent_shape}")
    d = len(cfg.latent_shape) - 1
    emb = (ops.einsum("bf,fw->bw", Tensor(time_features(t, cfg.time_features)), p.time_w)
           + ops.einsum("bc,cw->bw", Tensor(np.atleast_2d(cond)), p.cond_w) + p.emb_b)
    emb = ops.gelu(emb)
    src = Tensor(source_map(cond, cfg)) if p.block_src else None
    h = channel_mix(z_t if src is None else ops.concat([z_t, src], axis=1), p.lift, p.lift_b)
    for i, (block, ew) in enumerate(zip(p.blocks, p.block_emb)):
        bias = ops.reshape(ops.einsum("bw,wv->bv", emb, ew), (emb.shape[0], cfg.width) + (1,) * d)
        if src is not None:
            h = h + channel_mix(src, p.block_src[i])
        h = rfno_block(h + bias, block)
    out = channel_mix(h, p.proj, p.proj_b)
    if cfg.precondition:
        out = z_t + out * Tensor((1.0 - t).reshape((-1,) + (1,) * (d + 1)))
    return out


def flownet_apply(z_t: LatentCode, t: float, c: Condition, p: FlowNetParams) -> LatentCode:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t = {t} outside [0, 1]")
    cond = p.config.ranges.normalize(c)[None]
    return LatentCode(flow_forward(Tensor(z_t.values[None]), np.array([t]), cond, p).data[0])


# ---------------------------------------------------------------------------
# checkpoints


def _config_to_json(cfg) -> dict:
    d = asdict(cfg)
    return json.loads(json.dumps(d, default=list))


_KINDS = {"aeno": (AenoParams, AenoConfig), "sno": (SnoParams, SnoConfig), "flow": (FlowNetParams, FlowNetConfig)}


def kind_of(params) -> str:
    for kind, (cls, _) in _KINDS.items():
        if isinstance(params, cls):
            return kind
    raise TypeError(f"not a network parameter set: {type(params).__name__}")


def save_checkpoint(params, stem, extra: dict | None = None) -> Path:
    """Write ``stem.json`` (manifest) and ``stem.bin`` (concatenated tensors)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    tensors = params.tensors()
    manifest = {
        "kind": kind_of(params),
        "config": _config_to_json(params.config),
        "tensors": [{"name": t.name, "shape": list(t.shape)} for t in tensors],
        "extra": extra or {},
    }
    with open(stem.with_suffix(".bin"), "wb") as fh:
        for t in tensors:
            write_tensor(fh, t.data)
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return stem.with_suffix(".json")


def _config_from_json(kind: str, d: dict):
    cfg_cls = _KINDS[kind][1]
    d = dict(d)
    for k, v in list(d.items()):
        if isinstance(v, list):
            d[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
    if kind == "flow":
        bounds = d.pop("ranges")["bounds"]
        d["ranges"] = ConditionRanges(tuple(tuple(b) for b in bounds))
    return cfg_cls(**d)


def load_checkpoint(stem):
    stem = Path(stem)
    manifest = json.loads(stem.with_suffix(".json").read_text())
    kind = manifest["kind"]
    cfg = _config_from_json(kind, manifest["config"])
    params = _KINDS[kind][0].init(np.random.default_rng(0), cfg)
    tensors = params.tensors()
    if len(tensors) != len(manifest["tensors"]):
        raise ValueError("checkpoint tensor count does not match the configured network")
    with open(stem.with_suffix(".bin"), "rb") as fh:
        for t, meta in zip(tensors, manifest["tensors"]):
            arr = read_tensor(fh)
            if list(arr.shape) != list(t.shape) or meta["name"] != t.name:
                raise ValueError(f"checkpoint tensor {meta['name']} does not match {t.name} {t.shape}")
            t.data[...] = arr
    return params, manifest.get("extra", {})


__all__ = [
    "LatentCode", "Condition", "ConditionRanges",
    "AenoConfig", "AenoParams", "encode", "decode", "aeno_encode", "aeno_decode", "aeno_loss",
    "SnoConfig", "SnoParams", "super_resolve", "sno_apply", "sno_loss",
    "FlowNetConfig", "FlowNetParams", "flow_forward", "flownet_apply", "time_features", "source_map",
    "save_checkpoint", "load_checkpoint",
]
