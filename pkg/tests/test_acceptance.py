"""Acceptance criteria, one test each; every test records a single pass/fail line.

Criteria 1, 2, 5 and 6 need the full MNIST-family IDX files under ASYT_DATA_DIR
and are reported as unverified (skipped) without them. Criteria 4, 7 and 9 run
on the 5000-digit MNIST sample shipped with mlxtend.
"""

import csv
import dataclasses
import json

import numpy as np
import pytest

from asyt import cli
from asyt import data
from asyt import diagnostics as dg
from asyt import hardware as hw
from asyt import netcore as nc
from asyt import trainer as tr
from asyt.netcore import NetworkSpec

from .conftest import ACCEPTANCE_LINES
from .oracles import fd_param_grads

pytestmark = [pytest.mark.slow, pytest.mark.filterwarnings("ignore::RuntimeWarning")]


def _report(n: int, ok: bool, text: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")


def _unverified(n: int, what: str, reason: str):
    ACCEPTANCE_LINES.append(f"criterion {n}: UNVERIFIED  {what}: {reason}")
    pytest.skip(reason)


def _real_data(n: int, what: str, names):
    for name in names:
        try:
            root = data.data_root(name)
            data.find_idx_pair(root, "train")
            data.find_idx_pair(root, "test")
        except FileNotFoundError as exc:
            _unverified(n, what, f"data unavailable ({exc})")


def _run(argv) -> None:
    code = cli.main([str(a) for a in argv])
    assert code == 0, f"asyt {' '.join(map(str, argv))} exited {code}"


def _summary(path):
    return json.loads((path / "summary.json").read_text())


def _metrics(path, split="test"):
    with open(path / "metrics.csv", newline="") as f:
        return [row for row in csv.DictReader(f) if row["split"] == split]


def _sweep(path):
    with open(path / "sweep.csv", newline="") as f:
        return list(csv.DictReader(f))


# -- 1, 2: MNIST family at paper scale ---------------------------------------------


FAMILY_TARGETS = {
    # dataset: (asyt target, asyt tol, ideal target, ideal tol, in-silico ceiling)
    "mnist": (0.958, 0.015, 0.970, 0.010, 0.35),
    "fmnist": (0.875, 0.015, 0.886, 0.010, 0.25),
    "kmnist": (0.856, 0.020, 0.876, 0.010, 0.22),
}


def _family_run(name, tmp_path):
    out = tmp_path / name
    _run(["train", "--preset", name, "--set", "methods=asyt,ideal_bp,in_silico_bp", "--out", out])
    acc = {m: _summary(out / m)["final_test_acc"] for m in ("asyt", "ideal_bp", "in_silico_bp")}
    a, at, i, it, ceiling = FAMILY_TARGETS[name]
    ok = abs(acc["asyt"] - a) <= at and abs(acc["ideal_bp"] - i) <= it and acc["in_silico_bp"] <= ceiling
    text = (f"{name} asyt {acc['asyt']:.4f} (target {a}+-{at}), ideal {acc['ideal_bp']:.4f} (target {i}+-{it}), "
            f"in-silico {acc['in_silico_bp']:.4f} (<= {ceiling})")
    return ok, text


def test_criterion_1_mnist(tmp_path):
    _real_data(1, "MNIST asyt/ideal/in-silico at [784,256,256,10]", ["mnist"])
    ok, text = _family_run("mnist", tmp_path)
    _report(1, ok, text)
    assert ok, text


def test_criterion_2_fmnist_kmnist(tmp_path):
    _real_data(2, "FMNIST and KMNIST asyt/ideal/in-silico", ["fmnist", "kmnist"])
    results = [_family_run(name, tmp_path) for name in ("fmnist", "kmnist")]
    ok = all(r[0] for r in results)
    text = "; ".join(r[1] for r in results)
    _report(2, ok, text)
    assert ok, text


# -- 3, 4: component-faithful small tasks ------------------------------------------------


def test_criterion_3_iris3(tmp_path):
    out = tmp_path / "iris3"
    _run(["train", "--preset", "iris3", "--set", "methods=asyt,pseudo_ipbp,in_silico_bp", "--out", out])
    s = {m: _summary(out / m) for m in ("asyt", "pseudo_ipbp", "in_silico_bp")}
    a_train, a_test = s["asyt"]["final_train_acc"], s["asyt"]["final_test_acc"]
    pseudo, insilico = s["pseudo_ipbp"]["final_train_acc"], s["in_silico_bp"]["final_train_acc"]
    clauses = {
        "asyt train >= 0.92": a_train >= 0.92,
        "asyt test >= 0.88": a_test >= 0.88,
        "pseudo train 0.64+-0.10": abs(pseudo - 0.64) <= 0.10,
        "in-silico train 0.38+-0.12": abs(insilico - 0.38) <= 0.12,
    }
    ok = all(clauses.values())
    text = (f"iris3 device 100: asyt train {a_train:.4f} test {a_test:.4f}, pseudo train {pseudo:.4f}, "
            f"in-silico train {insilico:.4f}; failed: {[k for k, v in clauses.items() if not v] or 'none'}")
    _report(3, ok, text)
    assert ok, text


def test_criterion_4_digits4_tiled(tmp_path, mnist_subset_root, monkeypatch):
    monkeypatch.setenv(data.DATA_DIR_ENV, str(mnist_subset_root))
    cfg = cli.resolve_config(cli.preset("digits4-tiled"))
    plan = hw.plan_tiling(8, 4, cfg.ppm_dim)
    assert len(plan.tiles) == 2
    out = tmp_path / "digits4"
    _run(["train", "--preset", "digits4-tiled", "--set", "methods=asyt,in_silico_bp", "--out", out])
    a, i = _summary(out / "asyt"), _summary(out / "in_silico_bp")
    clauses = {
        "asyt train >= 0.79": a["final_train_acc"] >= 0.79,
        "asyt test >= 0.77": a["final_test_acc"] >= 0.77,
        "in-silico test <= 0.35": i["final_test_acc"] <= 0.35,
    }
    ok = all(clauses.values())
    text = (f"digits4 (mlxtend MNIST sample, 8x4 layer on {len(plan.tiles)} 4x4 modules): asyt train "
            f"{a['final_train_acc']:.4f} test {a['final_test_acc']:.4f}, in-silico train {i['final_train_acc']:.4f} "
            f"test {i['final_test_acc']:.4f}; failed: {[k for k, v in clauses.items() if not v] or 'none'}")
    _report(4, ok, text)
    assert ok, text


# -- 5, 6: sweeps at paper scale ---------------------------------------------------------


def test_criterion_5_distortion_sweep(tmp_path):
    _real_data(5, "MNIST distortion sweep 0..2 sigma", ["mnist"])
    out = tmp_path / "sweep"
    _run(["sweep", "--preset", "sweep-sigma", "--set", "sweep_methods=asyt,in_silico_bp", "--out", out])
    rows = _sweep(out)
    asyt = [float(r["test_acc"]) for r in rows if r["method"] == "asyt"]
    insilico = [float(r["test_acc"]) for r in rows if r["method"] == "in_silico_bp"]
    ok = min(asyt) > 0.90 and all(b < a for a, b in zip(insilico, insilico[1:]))
    text = f"asyt test {np.round(asyt, 4).tolist()} (> 0.90 each); in-silico {np.round(insilico, 4).tolist()} (strictly falling)"
    _report(5, ok, text)
    assert ok, text


def test_criterion_6_width_depth(tmp_path):
    _real_data(6, "MNIST width and depth sweeps", ["mnist"])
    gaps = {}
    for preset, tol in (("sweep-width", 0.02), ("sweep-depth", 0.025)):
        out = tmp_path / preset
        _run(["sweep", "--preset", preset, "--out", out])
        rows = _sweep(out)
        by = {(r["level_or_step"], r["method"]): float(r["test_acc"]) for r in rows}
        gaps[preset] = (tol, [abs(by[k, "asyt"] - by[k, "ideal_bp"]) for k, m in by if m == "asyt"])
    ok = all(max(g) <= tol for tol, g in gaps.values())
    text = "; ".join(f"{p} gaps {np.round(g, 4).tolist()} (<= {tol})" for p, (tol, g) in gaps.items())
    _report(6, ok, text)
    assert ok, text


# -- 7: stress tests -------------------------------------------------------------------------


STRESS_SEEDS = (0, 1)


def test_criterion_7_stress(tmp_path, mnist_subset_root, monkeypatch):
    monkeypatch.setenv(data.DATA_DIR_ENV, str(mnist_subset_root))
    lines, ok = [], True
    for seed in STRESS_SEEDS:
        common = ["--seed", seed, "--set", f"device_seed={200 + seed}"]
        # mid-training hard perturbation
        out = tmp_path / f"perturb{seed}"
        _run(["train", "--preset", "stress-perturb", *common, "--out", out])
        cfg = cli.resolve_config(cli.preset("stress-perturb"))
        a, p = _summary(out / "asyt")["final_test_acc"], _summary(out / "pat")["final_test_acc"]
        losses = [float(r["loss"]) for r in _metrics(out / "asyt")]
        pre = losses[int(cfg.perturb_fraction * cfg.train.epochs) - 1]
        # the loss bound belongs to the noisy regime; the ratio here is informative only
        ok &= a - p >= 0.10
        lines.append(f"perturb seed {seed}: asyt {a:.4f} pat {p:.4f} gap {a - p:+.4f}, "
                     f"asyt loss end/pre {losses[-1] / pre:.2f} (not gated)")
        # low-fidelity readout; the pre-stress reference is the same run with a clean readout
        out = tmp_path / f"noise{seed}"
        _run(["train", "--preset", "stress-noise", *common, "--out", out])
        ref = tmp_path / f"clean{seed}"
        _run(["train", "--preset", "stress-noise", *common, "--set", "methods=asyt",
              "--set", "readout_snr_db=inf", "--out", ref])
        a, p = _summary(out / "asyt")["final_test_acc"], _summary(out / "pat")["final_test_acc"]
        end = float(_metrics(out / "asyt")[-1]["loss"])
        pre = float(_metrics(ref)[-1]["loss"])
        bounded = end <= 2 * pre
        ok &= a - p >= 0.10 and bounded
        lines.append(f"noise seed {seed}: asyt {a:.4f} pat {p:.4f} gap {a - p:+.4f}, asyt loss end {end:.3f} vs clean {pre:.3f}")
    snr = cli.resolve_config(cli.preset("stress-noise")).train.readout_snr_db
    text = (f"mlxtend MNIST sample, gap >= 0.10 in both regimes, readout {snr} dB with asyt loss <= 2x clean-readout "
            f"reference: " + "; ".join(lines))
    _report(7, ok, text)
    assert ok, text


# -- 8: property suites ------------------------------------------------------------------------


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def test_criterion_8_properties():
    rng = np.random.default_rng(2024)
    checks = {}

    # (a) backprop against central differences
    worst = 0.0
    for _ in range(50):
        sizes = tuple(int(s) for s in rng.integers(1, 6, size=int(rng.integers(3, 5))))
        sizes = sizes[:-1] + (max(2, sizes[-1]),)
        hidden = str(rng.choice(["sigmoid_like", "tanh_saturating", "identity"]))
        spec = NetworkSpec(sizes, hidden, "softmax", clip_to_fan_in=False)
        params = nc.init_params(spec, rng, bias=0.3)
        x = rng.uniform(size=(4, sizes[0]))
        y = np.eye(sizes[-1])[rng.integers(0, sizes[-1], size=4)]
        rec = nc.forward(spec, params, x)
        g = nc.backprop(spec, params, rec, nc.output_delta(rec.prediction, y))
        fd = fd_param_grads(spec, params, x, y)
        worst = max(worst, max(_rel_err(a, b) for a, b in zip(g.arrays(), fd.arrays()) if np.any(b)))
    checks["a"] = (worst < 1e-5, f"max rel err {worst:.2e}")

    # (b) zero distortion: asyt follows ideal BP bitwise
    spec = NetworkSpec((5, 6, 3), "relu")
    xs = rng.uniform(size=(60, 5))
    ds = data.Dataset(xs, np.argmax(xs[:, :3], axis=1), 3)
    same = []
    for seed in range(5):
        cfg = tr.TrainConfig(seed=seed, epochs=3, batch_size=10, learning_rate=0.3, init_bias=0.1)
        dev = hw.sample_device(seed, spec, 0.0)
        a = tr.train(cfg, spec, dev, ds)
        i = tr.train(dataclasses.replace(cfg, method="ideal_bp"), spec, None, ds)
        same.append(a.params_phy.digest() == i.params_dig.digest()
                    and [m.loss for m in a.epochs] == [m.loss for m in i.epochs])
    checks["b"] = (all(same), f"{sum(same)}/5 seeds bitwise")

    # (c) replayed trace reaches the live parameters bitwise
    cfg = tr.TrainConfig(seed=3, epochs=3, batch_size=10, learning_rate=0.3, init_bias=0.1)
    dev = hw.sample_device(7, spec, 1.0)
    live = tr.train(cfg, spec, dev, ds)
    trace = tr.trace_from_bytes(tr.record_trace(cfg, spec, ds).to_bytes())
    replay = tr.replay_train(trace, dev, cfg, spec, ds)
    checks["c"] = (replay.params_phy.digest() == live.params_phy.digest() and replay.counters.digital_backprops == 0,
                   "replay hash equals live hash")

    # (d) equal-norm, non-antiparallel pairs stay within 90 degrees after mixing
    angles = []
    for _ in range(10_000):
        d = rng.normal(size=8)
        p = rng.normal(size=8)
        p *= np.linalg.norm(d) / np.linalg.norm(p)
        mix = tr.asyt_update(nc.ParamSet([d[None, :]], [np.zeros(1)]), nc.ParamSet([p[None, :]], [np.zeros(1)]))
        angles.append(dg.alignment_angle(mix.weights[0], d))
    checks["d"] = (max(angles) < 90.0, f"max angle {max(angles):.2f} deg")

    # (e) cost model closed forms
    ok_e = True
    for _ in range(100):
        p = int(rng.integers(1, 100))
        m = p + int(rng.integers(1, 2000))
        n = int(rng.integers(1, 12))
        ok_e &= dg.access_count(m, p, "truncated") == 2 * m - p and dg.access_count(m, p, "encapsulated") == p
        ok_e &= dg.access_timesteps(n, "truncated") == n + 1 and dg.access_timesteps(n, "encapsulated") == 1
    checks["e"] = (ok_e, "100 random (M, P, N)")

    # (f) the public physical forward exposes exactly P scalars per sample
    ok_f = True
    for _ in range(20):
        sizes = tuple(int(s) for s in rng.integers(2, 7, size=int(rng.integers(2, 5))))
        spec_f = NetworkSpec(sizes, "relu")
        params = nc.init_params(spec_f, rng)
        batch = int(rng.integers(1, 5))
        out = hw.physical_network_forward(hw.sample_device(0, spec_f, 1.0), spec_f, params,
                                          rng.uniform(size=(batch, sizes[0])), rng)
        ok_f &= out.shape == (batch, sizes[-1])
    checks["f"] = (ok_f, "output shape (batch, P) on 20 random nets")

    ok = all(v[0] for v in checks.values())
    text = "; ".join(f"({k}) {'ok' if v[0] else 'FAIL'} {v[1]}" for k, v in checks.items())
    _report(8, ok, text)
    assert ok, text


# -- 9: fleet amortisation ---------------------------------------------------------------------


def test_criterion_9_fleet_replay(tmp_path, mnist_subset_root, monkeypatch):
    monkeypatch.setenv(data.DATA_DIR_ENV, str(mnist_subset_root))
    out = tmp_path / "fleet"
    _run(["replay", "--preset", "replay-fleet", "--set", "batch_size=100", "--set", "epochs=20", "--out", out])
    s = _summary(out)
    gaps = [abs(d["final_test_acc"] - d["live_test_acc"]) for d in s["devices"]]
    accs = [d["final_test_acc"] for d in s["devices"]]
    distinct = len({d["device_hash"] for d in s["devices"]})
    ok = len(gaps) == 5 and distinct == 5 and max(gaps) <= 0.03 and s["digital_backprops"] == 0
    text = (f"mlxtend MNIST sample, {distinct} distinct 1 sigma devices, replay test acc {np.round(accs, 4).tolist()}, "
            f"max |replay - live| {max(gaps):.4f} (<= 0.03), digital backprops during replay {s['digital_backprops']}")
    _report(9, ok, text)
    assert ok, text
