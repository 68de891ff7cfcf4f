"""Pipeline stages: training, sampling, evaluation, calibration and reporting.

Each stage reads its inputs from the run directory, writes its outputs
next to them, and is deterministic under the configured seed.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .. import metrics as M
from ..calibration import (BiasCurve, apply_calibration, bias_file, estimate_bias, interp_bias, load_anchor_curves,
                           mean_rows, residual_rows)
from ..fields import NORM, WaveField
from ..flowmatch import FlowConfig, FlowDraws, euler_sample, fm_loss
from ..operators import (AenoConfig, AenoParams, Condition, ConditionRanges, FlowNetConfig, FlowNetParams,
                         SnoConfig, SnoParams, decode, encode, flow_forward, load_checkpoint, save_checkpoint,
                         super_resolve)
from ..subspace import lowpass_values
from ..tensorcore import AdamW, Tape, Tensor, box_muller, cosine_lr, make_rng
from ..toydata import restore
from .config import MissingDependencyError, NumericError, coarse_grid
from .dataset import Split, load_manifest, load_split

ROLES = ["scalar", "norm"]

# RNG stream ids, one per consumer, so stages never share random draws
STREAM_INIT = {"aeno": 1, "sno": 2, "flow": 3}
STREAM_SHUFFLE = {"aeno": 11, "sno": 12, "flow": 13}
STREAM_FLOW_DRAWS = 23
STREAM_SWEEP = 31
STREAM_REFERENCE = 41
STREAM_SAMPLE_BASE = 1000


def data_dir(cfg) -> Path:
    return Path(cfg["out"]) / "data"


def ckpt_stem(cfg, kind: str) -> Path:
    return Path(cfg["out"]) / "checkpoints" / kind


def _require_checkpoint(cfg, kind: str) -> Path:
    stem = ckpt_stem(cfg, kind)
    if not stem.with_suffix(".json").exists():
        raise MissingDependencyError(f"no {kind} checkpoint at {stem}.json; run train-{kind if kind != 'flow' else 'fm'}")
    return stem


def load_model(cfg, kind: str):
    params, extra = load_checkpoint(_require_checkpoint(cfg, kind))
    return params, extra


# ---------------------------------------------------------------------------
# training


def _write_loss_csv(path: Path, rows) -> None:
    M.write_rows_csv(path, ["epoch", "loss", "lr"], rows)


def fit(params, loss_fn, n: int, train: dict, seed: int, stream: int, log_path: Path) -> list[float]:
    """AdamW with cosine annealing over ``epochs``; returns epoch-mean losses."""
    rng = make_rng(seed, stream)
    bs = min(train["batch_size"], n)
    per_epoch = math.ceil(n / bs)
    total = train["epochs"] * per_epoch
    opt = AdamW(params.tensors(), lr=train["lr"], weight_decay=train["weight_decay"])
    rows, means, step = [], [], 0
    for epoch in range(train["epochs"]):
        perm = rng.permutation(n)
        losses = []
        lr = cosine_lr(step, total, train["lr"], train["lr_min"])
        for b in range(per_epoch):
            idx = np.sort(perm[b * bs:(b + 1) * bs])
            lr = cosine_lr(step, total, train["lr"], train["lr_min"])
            with Tape() as tape:
                loss = loss_fn(idx, rng)
                grads = tape.gradient(loss, params.tensors())
            value = loss.item()
            if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericError(f"non-finite loss or gradient at epoch {epoch}, step {step}")
            opt.step(grads, lr)
            losses.append(value)
            step += 1
        means.append(float(np.mean(losses)))
        rows.append((epoch, means[-1], float(lr)))
    log_path.parent.mkdir(parents=True, exist_ok=True)
    _write_loss_csv(log_path, rows)
    return means


def aeno_config(cfg) -> AenoConfig:
    a = cfg["aeno"]
    return AenoConfig(channels=2, norm_index=1, width=a["width"], encoder_layers=a["encoder_layers"],
                      decoder_layers=a["decoder_layers"], data_grid=coarse_grid(cfg),
                      latent_shape=tuple(a["latent_shape"]), instance_norm=a["instance_norm"])


def sno_config(cfg) -> SnoConfig:
    s = cfg["sno"]
    return SnoConfig(channels=2, norm_index=1, width=s["width"], layers=s["layers"], modes=tuple(s["modes"]),
                     out_grid=tuple(cfg["data"]["grid"]), instance_norm=s["instance_norm"])


def condition_ranges(cfg) -> ConditionRanges:
    d = cfg["data"]
    nx, ny, _ = d["grid"]
    anchors = cfg["evaluate"]["anchors"]
    return ConditionRanges(((0.0, (nx - 1) * d["dx"]), (0.0, (ny - 1) * d["dx"]),
                            (float(min(anchors)), float(max(anchors)))))


def flow_config(cfg) -> FlowNetConfig:
    f, d = cfg["flow"], cfg["data"]
    nx, ny, _ = d["grid"]
    return FlowNetConfig(latent_shape=tuple(cfg["aeno"]["latent_shape"]), width=f["width"], layers=f["layers"],
                         time_features=f["time_features"], condition_dim=3, precondition=f["precondition"],
                         ranges=condition_ranges(cfg), source_sigma=float(f["source_sigma"]),
                         domain=(nx * d["dx"], ny * d["dx"]))


def train_aeno(cfg) -> dict:
    from ..operators import aeno_loss
    split = load_split(data_dir(cfg), "train")
    params = AenoParams.init(make_rng(cfg["seed"], STREAM_INIT["aeno"]), aeno_config(cfg))
    x = split.u_f
    losses = fit(params, lambda idx, rng: aeno_loss(Tensor(x[idx]), params), len(x), cfg["aeno"]["train"],
                 cfg["seed"], STREAM_SHUFFLE["aeno"], Path(cfg["out"]) / "losses" / "aeno.csv")
    save_checkpoint(params, ckpt_stem(cfg, "aeno"), {"seed": cfg["seed"], "train": cfg["aeno"]["train"]})
    return {"first": losses[0], "last": losses[-1], "epochs": len(losses)}


def train_sno(cfg) -> dict:
    from ..operators import sno_loss
    split = load_split(data_dir(cfg), "train")
    params = SnoParams.init(make_rng(cfg["seed"], STREAM_INIT["sno"]), sno_config(cfg))
    xf, xu = split.u_f, split.u
    losses = fit(params, lambda idx, rng: sno_loss(list(zip(xf[idx], xu[idx])), params), len(xf),
                 cfg["sno"]["train"], cfg["seed"], STREAM_SHUFFLE["sno"], Path(cfg["out"]) / "losses" / "sno.csv")
    save_checkpoint(params, ckpt_stem(cfg, "sno"), {"seed": cfg["seed"], "train": cfg["sno"]["train"]})
    return {"first": losses[0], "last": losses[-1], "epochs": len(losses)}


def normalized_conditions(cfg, conditions) -> np.ndarray:
    ranges = condition_ranges(cfg)
    return np.array([ranges.normalize(c) for c in conditions])


def _conditions(arr) -> list[Condition]:
    return [Condition((float(c[0]), float(c[1])), float(c[2])) for c in arr]


def train_fm(cfg) -> dict:
    aeno, _ = load_model(cfg, "aeno")
    split = load_split(data_dir(cfg), "train")
    z = encode(Tensor(split.u_f), aeno).data
    shift, scale = 0.0, 1.0
    if cfg["flow"]["standardize_latents"]:
        shift, scale = float(z.mean()), float(z.std())
    z = (z - shift) / scale
    cond = normalized_conditions(cfg, _conditions(split.conditions))
    params = FlowNetParams.init(make_rng(cfg["seed"], STREAM_INIT["flow"]), flow_config(cfg))
    draws_rng = make_rng(cfg["seed"], STREAM_FLOW_DRAWS)
    t_clip = cfg["flow"]["t_clip"]

    def loss_fn(idx, _rng):
        draws = FlowDraws.draw(draws_rng, z[idx].shape)
        return fm_loss(z[idx], cond[idx], lambda zt, t, c: flow_forward(zt, t, c, params), draws, t_clip)

    losses = fit(params, loss_fn, len(z), cfg["flow"]["train"], cfg["seed"], STREAM_SHUFFLE["flow"],
                 Path(cfg["out"]) / "losses" / "flow.csv")
    save_checkpoint(params, ckpt_stem(cfg, "flow"),
                    {"seed": cfg["seed"], "train": cfg["flow"]["train"], "latent_shift": shift, "latent_scale": scale})
    return {"first": losses[0], "last": losses[-1], "epochs": len(losses)}


# ---------------------------------------------------------------------------
# sampling


class Generator:
    """End-to-end inference chain: noise -> flow -> decode -> (band limit) -> super-resolve."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.aeno, _ = load_model(cfg, "aeno")
        self.sno, _ = load_model(cfg, "sno")
        self.flow, extra = load_model(cfg, "flow")
        self.shift = extra.get("latent_shift", 0.0)
        self.scale = extra.get("latent_scale", 1.0)
        s = cfg["subspace"]
        # cutoff relative to the coarse grid's Nyquist
        self.coarse_cutoff = min(1.0, s["cutoff_fraction"] * s["temporal_factor"])

    def latents(self, condition: Condition, n: int, seed: int, stream: int, steps: int | None = None) -> np.ndarray:
        f = self.cfg["flow"]
        fc = FlowConfig(steps=steps or f["steps"], t_clip=f["t_clip"], seed=seed)
        shape = (n,) + tuple(self.flow.config.latent_shape)
        z0 = box_muller(make_rng(seed, stream), shape)
        cond = np.tile(normalized_conditions(self.cfg, [condition]), (n, 1))
        z = euler_sample(lambda zt, t, c: flow_forward(zt, t, c, self.flow), cond, shape, fc, z0=z0)
        return z * self.scale + self.shift

    def fields(self, z: np.ndarray, grid=None, enforce_bandlimit: bool = False) -> np.ndarray:
        u_f = decode(Tensor(z), self.aeno).data
        if enforce_bandlimit:
            u_f[:, 0] = lowpass_values(u_f[:, 0], self.coarse_cutoff)
        return super_resolve(Tensor(u_f), self.sno, grid).data

    def coarse(self, z: np.ndarray, enforce_bandlimit: bool = False) -> np.ndarray:
        u_f = decode(Tensor(z), self.aeno).data
        if enforce_bandlimit:
            u_f[:, 0] = lowpass_values(u_f[:, 0], self.coarse_cutoff)
        return u_f


def fine_spacing(cfg, grid) -> tuple:
    d = cfg["data"]
    nx, ny, nt = d["grid"]
    return d["dx"] * nx / grid[0], d["dx"] * ny / grid[1], d["dt"] * nt / grid[2]


def sample(cfg, conditions: list[Condition], n: int, seed: int, out_dir: Path, event_ids=None,
           calibrate_dir=None, grid=None, enforce_bandlimit: bool | None = None) -> dict:
    gen = Generator(cfg)
    grid = tuple(grid or cfg["sample"]["grid"] or cfg["data"]["grid"])
    bandlimit = cfg["sample"]["enforce_bandlimit"] if enforce_bandlimit is None else enforce_bandlimit
    curves = None
    if calibrate_dir is not None:
        curves = load_anchor_curves(calibrate_dir, cfg["evaluate"]["anchors"])
    dx, dy, dt = fine_spacing(cfg, grid)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for ci, cond in enumerate(conditions):
        stream = STREAM_SAMPLE_BASE + ci
        z = gen.latents(cond, n, seed, stream)
        values = gen.fields(z, grid, bandlimit)
        if not np.all(np.isfinite(values)):
            raise NumericError(f"non-finite samples for condition {ci}")
        curve = interp_bias(cond.magnitude, curves) if curves else None
        files = []
        for r in range(n):
            u = WaveField(values[r], dx, dy, dt, list(ROLES))
            if curve is not None:
                u = apply_calibration(u, curve)
            stem = f"c{ci:03d}_r{r:03d}"
            u.save(out_dir / stem)
            files.append(stem)
        entries.append({"index": ci, "event": event_ids[ci] if event_ids else None,
                        "condition": [cond.hypocenter[0], cond.hypocenter[1], cond.magnitude],
                        "seed": seed, "stream": stream, "files": files})
    manifest = {"seed": seed, "n_per_condition": n, "grid": list(grid), "calibrated": curves is not None,
                "enforce_bandlimit": bool(bandlimit), "conditions": entries}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_samples(samples_dir: Path) -> tuple[dict, list[list[WaveField]]]:
    path = Path(samples_dir) / "manifest.json"
    if not path.exists():
        raise MissingDependencyError(f"samples manifest not found at {path}; run sample first")
    manifest = json.loads(path.read_text())
    ensembles = [[WaveField.load(Path(samples_dir) / f) for f in e["files"]] for e in manifest["conditions"]]
    return manifest, ensembles


# ---------------------------------------------------------------------------
# evaluation


def _nearest_bins(freqs: np.ndarray, targets) -> list[int]:
    return [int(np.argmin(np.abs(freqs - f))) for f in targets]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a, b = a.ravel() - a.mean(), b.ravel() - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else float("nan")


def evaluate_event(data: WaveField, ensemble: list[WaveField], cfg, ref_random: tuple | None = None,
                   out_dir: Path | None = None, tag: str = "") -> dict:
    """All metric families for one event; physical units (norm channel folded back in)."""
    ev = cfg["evaluate"]
    truth = restore(data) if NORM in data.roles else data
    syn = [restore(s) if NORM in s.roles else s for s in ensemble]
    if any(s.grid != truth.grid for s in syn):
        raise ValueError(f"grid mismatch between data {truth.grid} and samples {syn[0].grid}")
    nx, ny, nt = truth.grid

    pgv_true = M.pgv(truth)
    pgv_syn = np.stack([M.pgv(s) for s in syn])
    pgv_mean, pgv_std = pgv_syn.mean(axis=0), pgv_syn.std(axis=0)

    fas_true, freqs = M.fas(truth)
    fas_syn = [M.fas(s)[0] for s in syn]
    gmean, gstd = M.geo_stats(fas_syn)
    bins = _nearest_bins(freqs, ev["fas_bins_hz"])

    center = (nx // 2, ny // 2)
    refs = {"center": center}
    if ref_random is not None:
        refs["random"] = tuple(ref_random)
    ncc = {}
    for name, ref in refs.items():
        a = M.ncc(truth, ref, ev["max_lag_s"])
        b = M.ncc(syn[0], ref, ev["max_lag_s"])
        ncc[name] = (a, b)

    res = M.residual(fas_true, fas_syn, tag)
    stats = res.summary()

    log_pgv_true = np.log10(np.maximum(pgv_true, M.SPECTRUM_FLOOR)).ravel()
    log_pgv_syn = np.log10(np.maximum(pgv_syn, M.SPECTRUM_FLOOR)).ravel()
    log_fas_true = np.log10(np.maximum(fas_true[..., 1:], M.SPECTRUM_FLOOR)).ravel()
    log_fas_syn = np.log10(np.maximum(np.stack(fas_syn)[..., 1:], M.SPECTRUM_FLOOR)).ravel()

    summary = {
        "pgv_corr": _pearson(pgv_mean, pgv_true),
        "pgv_rel_err": float(np.linalg.norm(pgv_mean - pgv_true) / np.linalg.norm(pgv_true)),
        "pgv_std_max": float(pgv_std.max()),
        "w1_log10_pgv": M.wasserstein1(log_pgv_true, log_pgv_syn),
        "w1_log10_fas": M.wasserstein1(log_fas_true, log_fas_syn),
        "residual_mean": stats["mean"].tolist(),
        "residual_abs_mean": float(np.abs(stats["mean"]).mean()),
        "floored_bins": res.floored,
        "ncc": {name: {"reference": list(ref), "rho_mae": float(np.abs(a.rho - b.rho).mean()),
                       "lag_mae_s": float(np.abs(a.lag - b.lag).mean()),
                       "rho_at_reference": float(b.rho[ref])}
                for (name, (a, b)), ref in zip(ncc.items(), refs.values())},
    }

    if out_dir is not None:
        dx, dy = truth.dx, truth.dy
        M.write_map_csv(out_dir / f"pgv_{tag}.csv", {"truth": pgv_true, "mean": pgv_mean, "std": pgv_std}, dx, dy)
        maps = {}
        for b in bins:
            maps[f"truth_{freqs[b]:.3f}Hz"] = fas_true[..., b]
            maps[f"geomean_{freqs[b]:.3f}Hz"] = gmean[..., b]
            maps[f"geostd_{freqs[b]:.3f}Hz"] = gstd[..., b]
        M.write_map_csv(out_dir / f"fas_{tag}.csv", maps, dx, dy)
        for name, (a, b) in ncc.items():
            M.write_map_csv(out_dir / f"ncc_{name}_{tag}.csv",
                            {"rho_truth": a.rho, "lag_truth": a.lag, "rho_syn": b.rho, "lag_syn": b.lag}, dx, dy)
        for k, (p0, p1) in enumerate(ev["profiles"]):
            dist, amp_t = M.profile(truth, tuple(p0), tuple(p1))
            _, amp_s = M.profile(syn[0], tuple(p0), tuple(p1))
            rows = [(float(d), float(it * truth.dt), float(amp_t[i, it]), float(amp_s[i, it]))
                    for i, d in enumerate(dist) for it in range(nt)]
            M.write_rows_csv(out_dir / f"profile{k}_{tag}.csv", ["distance", "time", "truth", "syn"], rows)
        M.write_rows_csv(out_dir / f"residual_{tag}.csv", ["freq", "mean", "median", "p16", "p84"],
                         [(float(f), float(stats["mean"][i]), float(stats["median"][i]), float(stats["p16"][i]),
                           float(stats["p84"][i])) for i, f in enumerate(freqs)])
        rows = []
        for metric, t_vals, s_vals in (("log10_pgv", log_pgv_true, log_pgv_syn),
                                        ("log10_fas", log_fas_true, log_fas_syn)):
            for source, vals in (("truth", t_vals), ("syn", s_vals)):
                counts, edges = M.fd_histogram(vals)
                rows += [(metric, source, float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]
        M.write_rows_csv(out_dir / f"distribution_{tag}.csv", ["metric", "source", "lo", "hi", "count"], rows)
    return summary


def magnitude_sweep(cfg, gen: Generator, train: Split) -> list[tuple]:
    """Per-magnitude PGV statistics over realizations from interpolated-condition pools.

    Each realization is summarized by the spatial median of its PGV map; a
    row gives the mean and spread of that summary across the bin.

    Each anchor pool is shuffled once and latent noise is shared across
    magnitudes, so neighbouring rows differ by magnitude rather than by draw.
    """
    sw = cfg["evaluate"]["sweep"]
    anchors = cfg["evaluate"]["anchors"]
    pools = {}
    for k, a in enumerate(anchors):
        pool = [tuple(c[:2]) for c in train.conditions if abs(c[2] - a) < 1e-9]
        pools[a] = [pool[j] for j in make_rng(cfg["seed"], STREAM_SWEEP * 100 + k).permutation(len(pool))]
    mags = np.round(np.arange(sw["m_min"], sw["m_max"] + 1e-9, sw["step"]), 6)
    rows = []
    for m in mags:
        i, alpha = M.interp_alpha(float(m), anchors)
        lo, hi = anchors[i], anchors[i + 1]
        conds = M.interp_conditions(float(m), pools[lo], pools[hi], sw["n"], cfg["seed"], (lo, hi), shuffle=False)
        n_low = sw["n"] - int(round(alpha * sw["n"]))
        medians = []
        for j, c in enumerate(conds):
            # noise follows the pool member, not its slot in this draw
            member = i * 1000 + j if j < n_low else (i + 1) * 1000 + j - n_low
            z = gen.latents(c, 1, cfg["seed"], STREAM_SWEEP * 100000 + member)
            values = gen.fields(z)[0]
            u = restore(WaveField(values, roles=list(ROLES)))
            medians.append(np.median(M.pgv(u)))
        medians = np.array(medians)
        rows.append((float(m), "pgv_median", float(medians.mean())))
        rows.append((float(m), "pgv_median_std", float(medians.std())))
        rows.append((float(m), "log10_pgv_median", float(np.log10(np.maximum(medians, 1e-30)).mean())))
    return rows


def evaluate(cfg, samples_dir: Path, out_dir: Path, split_name: str = "test", sweep: bool = True) -> dict:
    manifest, ensembles = load_samples(samples_dir)
    split = load_split(data_dir(cfg), split_name)
    by_id = {r["id"]: i for i, r in enumerate(split.records)}
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = make_rng(cfg["seed"], STREAM_REFERENCE)
    per_event = {}
    for entry, ens in zip(manifest["conditions"], ensembles):
        eid = entry["event"]
        if eid not in by_id:
            raise ValueError(f"sample set refers to unknown event {eid!r}")
        data = split.fields[by_id[eid]]
        if tuple(ens[0].grid) != tuple(data.grid):
            raise ValueError(f"grid mismatch: data {data.grid}, samples {ens[0].grid}")
        ref = (int(rng.integers(data.grid[0])), int(rng.integers(data.grid[1])))
        per_event[eid] = evaluate_event(data, ens, cfg, ref, out_dir, eid)
    corr = [v["pgv_corr"] for v in per_event.values()]
    report = {
        "split": split_name,
        "events": per_event,
        "pgv_corr_mean": float(np.mean(corr)),
        "pgv_corr_min": float(np.min(corr)),
        "w1_log10_pgv_mean": float(np.mean([v["w1_log10_pgv"] for v in per_event.values()])),
        "families": ["pgv", "fas", "ncc", "profile", "residual", "distribution", "w1", "sweep"],
    }
    if sweep:
        rows = magnitude_sweep(cfg, Generator(cfg), load_split(data_dir(cfg), "train"))
        M.write_rows_csv(out_dir / "sweep.csv", ["magnitude", "metric", "value"], rows)
        med = [v for _, name, v in rows if name == "pgv_median"]
        report["sweep_monotonic"] = bool(np.all(np.diff(med) > 0))
    M.write_json(out_dir / "summary.json", report)
    return report


# ---------------------------------------------------------------------------
# calibration


def calibrate(cfg, out_dir: Path) -> dict:
    """Anchor bias curves from training-split ensembles, plus the closed-loop check."""
    gen = Generator(cfg)
    train = load_split(data_dir(cfg), "train")
    cal = cfg["calibrate"]
    out_dir.mkdir(parents=True, exist_ok=True)
    closure = {}
    for a_i, anchor in enumerate(cfg["evaluate"]["anchors"]):
        idx = [i for i, c in enumerate(train.conditions) if abs(c[2] - anchor) < 1e-9][:cal["events_per_anchor"]]
        if not idx:
            raise MissingDependencyError(f"no training events at anchor magnitude {anchor}")
        events = []
        for i in idx:
            c = _conditions(train.conditions[i:i + 1])[0]
            z = gen.latents(c, cal["ensemble"], cfg["seed"], STREAM_SAMPLE_BASE + 50000 + a_i * 1000 + i)
            values = gen.fields(z)
            ens = [restore(WaveField(v, *fine_spacing(cfg, v.shape[1:]), list(ROLES))) for v in values]
            events.append((restore(train.fields[i]), ens))
        curve = estimate_bias(events, anchor)
        curve.save(bias_file(out_dir, anchor))
        after = [residual_rows(data, [apply_calibration(s, curve) for s in ens]) for data, ens in events]
        mean_after = mean_rows(np.concatenate(after))
        closure[f"{anchor:.1f}"] = {"events": len(idx), "bias_abs_mean": float(np.abs(curve.bias).mean()),
                                    "max_abs_mean_residual": float(np.abs(mean_after).max())}
    M.write_json(out_dir / "closure.json", closure)
    return closure


# ---------------------------------------------------------------------------
# report


def _rel_l2(pred: np.ndarray, truth: np.ndarray, channel: int | None = None) -> np.ndarray:
    if channel is not None:
        pred, truth = pred[:, channel], truth[:, channel]
    n = len(truth)
    return np.linalg.norm((pred - truth).reshape(n, -1), axis=1) / np.linalg.norm(truth.reshape(n, -1), axis=1)


def reconstruction_errors(cfg, split_name: str = "test") -> dict:
    split = load_split(data_dir(cfg), split_name)
    aeno, _ = load_model(cfg, "aeno")
    sno, _ = load_model(cfg, "sno")
    rec = decode(encode(Tensor(split.u_f), aeno), aeno).data
    sup = super_resolve(Tensor(split.u_f), sno).data
    return {
        "aeno_rel_l2": float(_rel_l2(rec, split.u_f).mean()),
        "aeno_rel_l2_physical": float(_rel_l2(rec, split.u_f, 0).mean()),
        "sno_rel_l2": float(_rel_l2(sup, split.u).mean()),
        "sno_rel_l2_physical": float(_rel_l2(sup, split.u, 0).mean()),
    }


def _loss_summary(path: Path) -> dict | None:
    if not path.exists():
        return None
    rows = [line.split(",") for line in path.read_text().strip().splitlines()[1:]]
    return {"first": float(rows[0][1]), "last": float(rows[-1][1]), "epochs": len(rows)}


def report(cfg, out_path: Path) -> dict:
    root = Path(cfg["out"])
    payload = {"seed": cfg["seed"], "reconstruction": reconstruction_errors(cfg),
               "losses": {k: _loss_summary(root / "losses" / f"{k}.csv") for k in ("aeno", "sno", "flow")}}
    summary = root / "eval" / "summary.json"
    if summary.exists():
        s = json.loads(summary.read_text())
        payload["evaluation"] = {k: s[k] for k in ("pgv_corr_mean", "pgv_corr_min", "w1_log10_pgv_mean")}
        if "sweep_monotonic" in s:
            payload["evaluation"]["sweep_monotonic"] = s["sweep_monotonic"]
    closure = root / "calibration" / "closure.json"
    if closure.exists():
        payload["calibration"] = json.loads(closure.read_text())
    M.write_json(out_path, payload)
    return payload


__all__ = [
    "fit", "train_aeno", "train_sno", "train_fm", "Generator", "sample", "load_samples", "evaluate",
    "evaluate_event", "magnitude_sweep", "calibrate", "report", "reconstruction_errors", "BiasCurve",
    "load_manifest",
]
