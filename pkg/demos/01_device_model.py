"""Tour of the emulated hardware: control curve, distortion calibration, tiling, device files.

Run: python3 demos/01_device_model.py
"""

import tempfile
from pathlib import Path

import numpy as np

from asyt import hardware as hw
from asyt.netcore import NetworkSpec, init_params

profile = hw.EstimationProfile()
print(f"control range 0..{profile.v_max} V, v_pi {profile.v_pi:.2f} V, {profile.quant_levels} levels")
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    v = hw.profile_inverse(profile, t)
    print(f"  target T={t:.2f} -> control {float(v):6.3f} V -> T={float(profile.transmission(v)):.4f}")

# one sigma_phy is the cell spread whose worst-case deviation from the curve is 0.25
spread = hw.calibrated_spread(profile)
s, n = hw.transform_spreads(profile)
print(f"\ncalibrated cell spread {spread:.4f}; per-connection spreads P_sys {s:.4f}, N_init {n:.4f}")

# an 8x4 connection on 4x4 modules needs two tiles
plan = hw.plan_tiling(8, 4, 4)
print(f"\n8x4 layer on 4x4 modules: {len(plan.tiles)} tiles")
for tile in plan.tiles:
    print(f"  rows {tile.row0}:{tile.row1}, cols {tile.col0}:{tile.col1}")

spec = NetworkSpec((8, 4, 4), "sigmoid_like")
params = init_params(spec, np.random.default_rng(0), bias=1.0)
x = np.random.default_rng(1).uniform(size=(3, 8))
ideal = hw.ideal_device(spec, mode="component", weight_scale=4.0)
print("\nphysical output, ideal cells:\n", np.round(hw.physical_network_forward(ideal, spec, params, x, np.random.default_rng(2)), 3))
for seed in (1, 2):
    dev = hw.sample_device(seed, spec, 1.0, mode="component", ppm_dim=4, weight_scale=4.0, reinjection_level=2.5)
    out = hw.physical_network_forward(dev, spec, params, x, np.random.default_rng(2))
    print(f"device {seed} ({dev.mzi_count()} cells, hash {dev.digest()[:12]}):\n", np.round(out, 3))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "device.asytdev"
    hw.save_device(path, dev)
    again = hw.load_device(path)
    print(f"\nsaved {path.stat().st_size} bytes; reload hash matches: {again.digest() == dev.digest()}")
