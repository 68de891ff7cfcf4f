"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
The scaled end-to-end run uses the default configuration and is shared by
the criteria that need trained models.
"""
import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from latentwave import metrics as M
from latentwave.calibration import BiasCurve, apply_calibration
from latentwave.fields import WaveField
from latentwave.flowmatch import FlowConfig, FlowDraws, clean_to_velocity, euler_sample, fm_loss, sample_path
from latentwave.operators import (AenoConfig, AenoParams, FlowNetConfig, FlowNetParams, SnoConfig, SnoParams,
                                  aeno_loss, flow_forward, sno_loss, time_features)
from latentwave.pipeline import stages
from latentwave.pipeline.cli import EXIT_OK, run
from latentwave.pipeline.config import load_config
from latentwave.specops import (RfnoBlockParams, SpectralConvParams, channel_mix, instance_norm, rfno_block,
                                spectral_conv, spectral_resample, xavier)
from latentwave.subspace import DEFAULT_CUTOFF_FRACTION, lowpass_values
from latentwave.tensorcore import AdamW, Tape, Tensor, cosine_lr, ops
from latentwave.tensorcore import fft as F
from latentwave.tensorcore.gradcheck import check_gradients

VERBS = ("gen-data", "train-aeno", "train-sno", "train-fm", "sample", "evaluate", "calibrate", "report")


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def run_pipeline(out: Path, config: Path | None = None) -> None:
    extra = ["--config", str(config)] if config else []
    for verb in VERBS:
        code = run([verb, "--out", str(out), *extra])
        assert code == EXIT_OK, f"{verb} exited with {code}"


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    out = tmp_path_factory.mktemp("e2e") / "run"
    t0 = time.perf_counter()
    run_pipeline(out)
    elapsed = time.perf_counter() - t0
    return out, load_config(out=str(out)), elapsed


# --- 1 ---------------------------------------------------------------------------

def test_gradient_suite(acceptance):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    leaf = lambda *s: Tensor(rng.standard_normal(s), True)
    pos = lambda *s: Tensor(np.abs(rng.standard_normal(s)) + 0.5, True)
    errors = {}

    x, y, p = leaf(3, 4), leaf(1, 4), pos(3, 4)
    w = rng.standard_normal((3, 4))
    for name, fn in {"exp": ops.exp, "sin": ops.sin, "cos": ops.cos, "tanh": ops.tanh, "gelu": ops.gelu,
                     "power": lambda a: ops.power(a, 3.0)}.items():
        errors[name] = check_gradients(lambda: ops.tsum(fn(x) * w), [x])
    for name, fn in {"log": ops.log, "sqrt": ops.sqrt}.items():
        errors[name] = check_gradients(lambda: ops.tsum(fn(p) * w), [p])
    for name in ("add", "sub", "mul"):
        errors[name] = check_gradients(lambda: ops.tsum(getattr(ops, name)(x, y) * w), [x, y])
    errors["div"] = check_gradients(lambda: ops.tsum(ops.div(x, p) * w), [x, p])
    a3 = leaf(2, 3, 4)
    errors["shape+reduce"] = check_gradients(
        lambda: ops.tsum(ops.mean(ops.transpose(ops.reshape(a3, (6, 4)), (1, 0)), axis=0) ** 2)
        + ops.tsum(ops.getitem(a3, (0, slice(1, 3))) * 2.0), [a3])
    m = leaf(3, 5)
    errors["concat+broadcast+einsum"] = check_gradients(
        lambda: ops.tsum(ops.einsum("ij,jk->ik", ops.concat([x[:, :3], ops.broadcast_to(y[:, :3], (2, 3))], 0),
                                    m) ** 2), [x, y, m])
    c = leaf(4, 6)
    errors["fft/ifft/real/imag/abs2"] = check_gradients(
        lambda: ops.tsum(ops.abs2(ops.ifft(ops.fft(c, [0, 1]) * (1 + 0.5j), [1])))
        + ops.tsum(ops.real(ops.fft(c, [1])) * ops.imag(ops.fft(c, [0]))), [c])

    sc = SpectralConvParams.init(rng, 2, 3, (2, 2, 3))
    u = leaf(2, 2, 5, 4, 6)
    wu = rng.standard_normal((2, 3, 7, 6, 6))
    errors["spectral_conv"] = check_gradients(lambda: ops.tsum(spectral_conv(u, sc, (7, 6, 6)) * wu),
                                              [u, sc.w_re, sc.w_im])
    wr = rng.standard_normal((2, 2, 7, 3, 8))
    errors["spectral_resample"] = check_gradients(lambda: ops.tsum(spectral_resample(u, (7, 3, 8)) * wr), [u])
    W, b = leaf(2, 3), leaf(3)
    wm = rng.standard_normal((2, 3, 5, 4, 6))
    errors["channel_mix+instance_norm"] = check_gradients(
        lambda: ops.tsum(channel_mix(u, W, b) * wm) + ops.tsum(instance_norm(channel_mix(u, W)) * wm), [u, W, b])
    blk = RfnoBlockParams.init(rng, 2, 2, (2, 2, 3), norm=True)
    wb = rng.standard_normal((2, 2, 5, 4, 6))
    errors["rfno_block"] = check_gradients(lambda: ops.tsum(rfno_block(u, blk) * wb), [u] + blk.tensors())

    def perturbed(params):
        for t in params.tensors():
            t.data += 0.1 * rng.standard_normal(t.shape)
        return params

    def field(grid):
        v = rng.standard_normal((2, 2) + grid)
        v[:, 1] = rng.uniform(-3, -1, (2, 1, 1, 1))
        return v

    aeno = perturbed(AenoParams.init(rng, AenoConfig(width=3, encoder_layers=2, decoder_layers=2,
                                                     data_grid=(6, 4, 6), latent_shape=(1, 3, 2, 2))))
    xa = field((6, 4, 6))
    errors["AENO"] = check_gradients(lambda: aeno_loss(Tensor(xa), aeno), aeno.tensors())
    sno = perturbed(SnoParams.init(rng, SnoConfig(width=3, layers=2, modes=(3, 2, 3), out_grid=(8, 6, 8))))
    xs, ys = field((4, 3, 4)), field((8, 6, 8))
    errors["SNO"] = check_gradients(lambda: sno_loss(list(zip(xs, ys)), sno), sno.tensors())
    flow = perturbed(FlowNetParams.init(rng, FlowNetConfig(latent_shape=(1, 3, 2, 2), width=3, layers=2,
                                                           time_features=4, source_sigma=6.0)))
    z = Tensor(rng.standard_normal((3, 1, 3, 2, 2)), True)
    tz, cz, wz = np.array([0.1, 0.5, 0.9]), rng.uniform(-1, 1, (3, 3)), rng.standard_normal((3, 1, 3, 2, 2))
    errors["flow net"] = check_gradients(lambda: ops.tsum(flow_forward(z, tz, cz, flow) * wz), [z] + flow.tensors())

    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    acceptance(1, "gradient checks, all primitives and networks", errors[worst] < 1e-4 and elapsed < 120,
               f"max rel err {errors[worst]:.1e} ({worst}), {len(errors)} checks, {elapsed:.0f}s")


# --- 2 ---------------------------------------------------------------------------

def test_spectral_correctness(acceptance):
    rng = np.random.default_rng(1)
    roundtrip, parseval = 0.0, 0.0
    for n in (1, 2, 5, 8, 12, 16, 24, 31, 64):
        x = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
        X = F.fft_along(x, [-1])
        roundtrip = max(roundtrip, np.max(np.abs(F.ifft_along(X, [-1]) - x)))
        X_ref = F.dft_direct(x)
        energy = np.sum(np.abs(x) ** 2)
        parseval = max(parseval, abs(np.sum(np.abs(X_ref) ** 2) / n - energy) / energy,
                       np.max(np.abs(X - X_ref)) / np.max(np.abs(X_ref)))
    modes = (3, 3, 4)
    p = SpectralConvParams.init(rng, 2, 3, modes)
    grid = (16, 12, 20)
    spec = np.zeros((2, 2, 16, 12, 11), dtype=complex)
    idx = [np.r_[0:m, -(m - 1):0] for m in modes[:-1]] + [np.arange(modes[-1])]
    sel = (slice(None), slice(None)) + np.ix_(*idx)
    spec[sel] = rng.standard_normal(spec[sel].shape) + 1j * rng.standard_normal(spec[sel].shape)
    fine = np.fft.irfftn(spec, s=grid, axes=(2, 3, 4))
    coarse = fine[:, :, ::2, ::2, ::2]
    a = spectral_conv(Tensor(fine), p).data
    transfer = max(rel(a[:, :, ::2, ::2, ::2], spectral_conv(Tensor(coarse), p).data),
                   rel(spectral_conv(Tensor(coarse), p, grid).data, a))
    ok = roundtrip < 1e-10 and parseval < 1e-10 and transfer < 1e-6
    acceptance(2, "FFT round trip, Parseval vs direct DFT, resolution transfer", ok,
               f"round trip {roundtrip:.1e}, Parseval {parseval:.1e}, transfer {transfer:.1e}")


# --- 3 ---------------------------------------------------------------------------

def test_subspace_projection(acceptance):
    rng = np.random.default_rng(2)
    idem, leak = 0.0, 0.0
    for nt in (12, 24, 48, 96):
        x = rng.standard_normal((4, 5, nt))
        y = lowpass_values(x, DEFAULT_CUTOFF_FRACTION)
        idem = max(idem, np.max(np.abs(lowpass_values(y, DEFAULT_CUTOFF_FRACTION) - y)))
        Y = np.fft.fft(y, axis=-1)
        above = np.abs(np.fft.fftfreq(nt) * nt) / (nt / 2) > DEFAULT_CUTOFF_FRACTION + 1e-12
        e = np.abs(Y) ** 2
        leak = max(leak, e[..., above].sum() / e.sum())
    cutoff_ok = math.isclose(DEFAULT_CUTOFF_FRACTION, 0.75 / (4.0 / 2), rel_tol=0, abs_tol=1e-15)
    acceptance(3, "low-pass idempotence, residual energy, default cutoff",
               idem < 1e-10 and leak < 1e-10 and cutoff_ok,
               f"idempotence {idem:.1e}, above-cutoff energy {leak:.1e}, cutoff {DEFAULT_CUTOFF_FRACTION}")


# --- 4 ---------------------------------------------------------------------------

def gmm(rng, n):
    pick = rng.random(n) < 0.3
    return np.where(pick[:, None], rng.normal([-2.0, 1.0], [0.4, 0.6], (n, 2)),
                    rng.normal([1.5, -1.0], [0.5, 0.3], (n, 2)))


def test_flow_matching_on_gaussian_mixture(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    hidden, tf = 64, 16
    params = [xavier(rng, 2 + tf, hidden, "w1"), Tensor(np.zeros(hidden), True, "b1"),
              xavier(rng, hidden, hidden, "w2"), Tensor(np.zeros(hidden), True, "b2"),
              xavier(rng, hidden, 2, "w3"), Tensor(np.zeros(2), True, "b3")]
    w1, b1, w2, b2, w3, b3 = params

    def predict(z_t, t, cond):
        t = np.broadcast_to(np.atleast_1d(t), (z_t.shape[0],))
        h = ops.concat([z_t, Tensor(time_features(t, tf))], axis=1)
        h = ops.gelu(ops.einsum("bi,ih->bh", h, w1) + b1)
        h = ops.gelu(ops.einsum("bi,ih->bh", h, w2) + b2)
        return z_t + (ops.einsum("bi,ih->bh", h, w3) + b3) * Tensor((1.0 - t)[:, None])

    steps, batch, lr = 1500, 256, 3e-3
    opt = AdamW(params, lr=lr)
    cond = np.zeros((batch, 1))
    for k in range(steps):
        z1 = gmm(rng, batch)
        with Tape() as tape:
            loss = fm_loss(z1, cond, predict, FlowDraws.draw(rng, z1.shape))
            grads = tape.gradient(loss, params)
        opt.step(grads, cosine_lr(k, steps, lr))
    n = 4000
    z0 = np.random.default_rng(4).standard_normal((n, 2))
    s50 = euler_sample(predict, np.zeros((n, 1)), (n, 2), FlowConfig(50), z0=z0)
    s400 = euler_sample(predict, np.zeros((n, 1)), (n, 2), FlowConfig(400), z0=z0)
    target = gmm(np.random.default_rng(5), 20000)
    w1_ratio = max(M.wasserstein1(s50[:, i], target[:, i]) / target[:, i].std() for i in range(2))
    conv = rel(s50, s400)
    elapsed = time.perf_counter() - t0
    acceptance(4, "flow matching on a 2-component mixture", w1_ratio < 0.1 and conv < 0.05 and elapsed < 180,
               f"max W1/std {w1_ratio:.3f}, 50 vs 400 steps {conv:.3f}, {elapsed:.0f}s")


# --- 5 ---------------------------------------------------------------------------

def test_clean_prediction_identity(acceptance):
    rng = np.random.default_rng(6)
    z0, z1 = rng.standard_normal((2, 8, 1, 8, 4, 4))
    err = max(np.max(np.abs(clean_to_velocity(z1, sample_path(z0, z1, t), t) - (z1 - z0)))
              for t in (0.0, 0.25, 0.5, 0.9, 0.99))
    a0 = rng.standard_normal((8, 1, 8, 4, 4))
    moved = euler_sample(lambda z, t, c: Tensor(z1), np.zeros((8, 1)), z1.shape, FlowConfig(50), z0=a0)
    transport = np.max(np.abs(moved - z1))
    acceptance(5, "clean-prediction identity and oracle transport", err < 1e-12 and transport < 1e-12,
               f"identity {err:.1e}, transport {transport:.1e}")


# --- 6 ---------------------------------------------------------------------------

def test_end_to_end_pipeline(e2e, acceptance):
    out, cfg, elapsed = e2e
    report = json.loads((out / "report.json").read_text())
    rec = report["reconstruction"]
    ev = report["evaluation"]
    ok = (rec["aeno_rel_l2"] < 0.2 and rec["sno_rel_l2"] < 0.25 and ev["pgv_corr_mean"] > 0.8
          and elapsed < 15 * 60)
    acceptance(6, "end-to-end toy pipeline", ok,
               f"AENO rel-L2 {rec['aeno_rel_l2']:.3f}, SNO rel-L2 {rec['sno_rel_l2']:.3f}, "
               f"PGV corr mean {ev['pgv_corr_mean']:.3f} (min {ev['pgv_corr_min']:.3f}), {elapsed:.0f}s")


# --- 7 ---------------------------------------------------------------------------

def test_zero_shot_super_resolution(e2e, acceptance):
    out, cfg, _ = e2e
    nx, ny, nt = cfg["data"]["grid"]
    fine_grid = (2 * nx, 2 * ny, nt)
    code = run(["sample", "--out", str(out), "--grid", *map(str, fine_grid), "--n", "2",
                "--samples", str(out / "samples_2x")])
    man = json.loads((out / "samples_2x" / "manifest.json").read_text())
    gen = stages.Generator(cfg)
    errs = []
    for entry in man["conditions"]:
        cond = stages._conditions([entry["condition"]])[0]
        z = gen.latents(cond, 2, entry["seed"], entry["stream"])
        native = gen.fields(z)
        fine = np.stack([WaveField.load(out / "samples_2x" / f).values for f in entry["files"]])
        errs.append(rel(fine[:, :, ::2, ::2], native))
    worst = max(errs)
    acceptance(7, "zero-shot 2x spatial sampling", code == EXIT_OK and fine.shape[2:] == fine_grid and worst < 0.05,
               f"max subsampled rel-L2 {worst:.4f} over {len(errs)} conditions")


# --- 8 ---------------------------------------------------------------------------

def brute_force_ncc(u, ref, K):
    c, nx, ny, nt = u.shape
    rho = np.zeros((nx, ny, 2 * K + 1))
    for i in range(nx):
        for j in range(ny):
            for ki, k in enumerate(range(-K, K + 1)):
                num = er = eu = 0.0
                for t in range(nt):
                    if 0 <= t + k < nt:
                        for ch in range(c):
                            num += u[ch, i, j, t + k] * ref[ch, t]
                            er += ref[ch, t] ** 2
                            eu += u[ch, i, j, t + k] ** 2
                rho[i, j, ki] = num / math.sqrt(er * eu) if er > 0 and eu > 0 else 0.0
    return rho


def test_metric_oracles(acceptance):
    rng = np.random.default_rng(8)
    nt, dt, K = 40, 0.25, 5
    base = rng.standard_normal(nt + 2 * K)
    v = np.zeros((1, 3, 2, nt))
    delays = np.array([[0, 3], [-2, 5], [-5, 1]])
    for i in range(3):
        for j in range(2):
            d = delays[i, j]
            v[0, i, j] = base[K - d:K - d + nt]
    u = WaveField(v, 1.0, 1.0, dt, ["scalar"])
    out = M.ncc(u, (0, 0), K * dt)
    brute = brute_force_ncc(v, v[:, 0, 0], K)
    ks = np.arange(-K, K + 1)
    best = brute.max(axis=-1)
    lag_ok = np.array_equal(np.round(out.lag / dt).astype(int), delays)
    ncc_ok = lag_ok and np.allclose(out.rho, 1.0, atol=1e-12) and np.allclose(out.rho, best, atol=1e-12)
    ncc_ok &= all(ks[np.argmax(brute[i, j])] == delays[i, j] for i in range(3) for j in range(2))
    k_ok = M.max_lag_samples(6.0, 0.25, 96) == 24
    h = np.zeros((2, 1, 1, 8))
    h[0] += 3.0 / (8 * 0.5)
    h[1] += 4.0 / (8 * 0.5)
    spec, _ = M.fas(WaveField(h, 1.0, 1.0, 0.5, ["h1", "h2"]))
    fas_ok = math.isclose(spec[0, 0, 0], math.sqrt(12.5), rel_tol=1e-12)
    w1_ok = all(math.isclose(M.wasserstein1([0.0], [d]), d, rel_tol=1e-12) for d in (0.5, 1.0, 3.7))
    acceptance(8, "NCC delays, lag window, FAS power mean, W1 of point masses", ncc_ok and k_ok and fas_ok and w1_ok,
               f"NCC {ncc_ok}, K=24 {k_ok}, FAS={spec[0, 0, 0]:.12f}, W1 {w1_ok}")


# --- 9 ---------------------------------------------------------------------------

def test_calibration(e2e, acceptance):
    out, _, _ = e2e
    closure = json.loads((out / "calibration" / "closure.json").read_text())
    worst = max(v["max_abs_mean_residual"] for v in closure.values())
    rng = np.random.default_rng(9)
    u = WaveField(rng.standard_normal((1, 4, 3, 24)), 1.0, 1.0, 0.25, ["scalar"])
    freqs = np.fft.rfftfreq(24, 0.25)
    scaled = apply_calibration(u, BiasCurve(4.4, freqs, np.full(len(freqs), 0.3))).values
    scale_err = np.max(np.abs(scaled - math.exp(0.3) * u.values)) / np.max(np.abs(u.values))
    curve = BiasCurve(6.0, freqs, rng.normal(0, 0.5, len(freqs)))
    A = np.fft.rfft(u.values, axis=-1)
    B = np.fft.rfft(apply_calibration(u, curve).values, axis=-1)
    phase_err = np.max(np.abs(np.angle(B * np.conj(A))))
    acceptance(9, "calibration closure, exact scaling, phase preservation",
               worst < 1e-3 and scale_err < 1e-12 and phase_err < 1e-12,
               f"closure {worst:.1e}, scaling {scale_err:.1e}, phase {phase_err:.1e}")


# --- 10 --------------------------------------------------------------------------

def test_magnitude_interpolation(e2e, acceptance):
    out, _, _ = e2e
    ends = [M.interp_alpha(4.4), M.interp_alpha(6.0), M.interp_alpha(7.0)]
    ends_ok = ends[0][1] == 0.0 and ends[1] == (0, 1.0) and ends[2] == (1, 1.0) and M.interp_alpha(6.0 + 1e-12)[1] < 1e-9
    rows = [line.split(",") for line in (out / "eval" / "sweep.csv").read_text().strip().splitlines()[1:]]
    med = [(float(m), float(v)) for m, name, v in rows if name == "pgv_median"]
    mono = all(b[1] > a[1] for a, b in zip(med, med[1:]))
    acceptance(10, "alpha endpoints, monotonic PGV medians across the sweep", ends_ok and mono,
               f"{len(med)} magnitudes, medians {med[0][1]:.3g} .. {med[-1][1]:.3g}")


# --- 11 --------------------------------------------------------------------------

TINY = {
    "data": {"n_train": 12, "n_test": 3},
    "aeno": {"width": 4, "train": {"epochs": 2, "batch_size": 4}},
    "sno": {"width": 4, "layers": 2, "train": {"epochs": 1, "batch_size": 4}},
    "flow": {"width": 8, "layers": 2, "train": {"epochs": 2, "batch_size": 4}, "steps": 4},
    "sample": {"n_per_condition": 2},
    "evaluate": {"sweep": {"m_min": 4.4, "m_max": 7.0, "step": 0.65, "n": 2}},
    "calibrate": {"events_per_anchor": 1, "ensemble": 2},
}


def digest(root: Path) -> dict:
    files = [root / "data" / "manifest.json"] + sorted((root / "samples").glob("*.bin"))
    files += sorted((root / "eval").glob("*.csv"))
    return {str(f.relative_to(root)): hashlib.sha256(f.read_bytes()).hexdigest() for f in files}


def test_determinism(tmp_path, acceptance):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    run_pipeline(tmp_path / "a", cfg)
    run_pipeline(tmp_path / "b", cfg)
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    same = a == b and len(a) > 10
    acceptance(11, "repeated run is byte-identical", same, f"{len(a)} files compared")
