"""Emulated photonic processing modules.

Two fidelity modes realise the physical transformation of a layer:

``transform``
    Layer-level distortion of the connection matrix,
    ``W_eff = (1 + P_sys) * (W + N_init)`` elementwise (biases alike), followed by
    additive signal noise at the device SNR. Used for the MNIST-family simulations.
``component``
    Every weight is written to its own MZI cell: encoded as a transmission,
    snapped to the modulation grid, converted to a voltage with the estimation
    profile and read back through that cell's actual control curve. Tiles of a
    layer that spans several PPMs carry their own output gain error. Layer
    inputs pass through modulator cells with their own curves, and every
    re-entry into the optics adds a layer-level error at ``reinjection_level``.

Signal noise is relative to the instantaneous signal power until the device is
given a fixed noise floor with :func:`calibrate_noise_floor`, after which each
layer adds noise of constant variance.

Weights are encoded affinely as ``w = 2 T - 1`` so the representable range is
``[-1, 1]``; inputs are intensities in ``[0, 1]``.
"""

from __future__ import annotations

import functools
import hashlib
import io
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .netcore import (
    DimensionError,
    NetworkSpec,
    ParamSet,
    check_params,
    clip_net_output,
    layer_activation,
)

V_MAX = 32.0
GAMMA_DEFAULT = math.pi / (2.0 * V_MAX**2)
QUANT_LEVELS = 100
# worst-case |T_cell - T_profile| over the control range at 1 sigma_phy
SIGMA_PHY_TARGET = 0.25
# fabrication latent is a standard normal truncated here; the truncation edge is the worst case
LATENT_CLIP = 3.0
# static phase bias per unit of relative gamma spread, in units of pi
PHASE_SHARE = 0.5
CONTROL_GRID_POINTS = 2001
CALIBRATION_SEED = 1_000_003
CALIBRATION_CELLS = 20_000

MODES = ("transform", "component")
DEVICE_MAGIC = b"ASYTDEV1"


class ControlRangeError(ValueError):
    pass


@dataclass(frozen=True)
class EstimationProfile:
    """Characterisation-free control curve ``T(V) = (1 + cos(2 gamma V^2)) / 2``."""

    gamma: float = GAMMA_DEFAULT
    v_max: float = V_MAX
    quant_levels: int = QUANT_LEVELS

    def __post_init__(self):
        if self.gamma <= 0 or self.v_max <= 0:
            raise ValueError("gamma and v_max must be positive")
        if self.quant_levels < 2:
            raise ValueError("need at least two quantisation levels")

    @property
    def v_pi(self) -> float:
        """Voltage closing the first branch (phase pi)."""
        return math.sqrt(math.pi / (2.0 * self.gamma))

    def transmission(self, v):
        v = np.asarray(v, dtype=np.float64)
        if np.any(v < 0) or np.any(v > self.v_max * (1 + 1e-12)):
            raise ControlRangeError(f"control voltage outside [0, {self.v_max}] V")
        return 0.5 * (1.0 + np.cos(2.0 * self.gamma * v**2))

    def level_transmissions(self) -> np.ndarray:
        return np.arange(self.quant_levels) / (self.quant_levels - 1)

    def level_voltages(self) -> np.ndarray:
        """Voltages realising each modulation level on the first monotone branch."""
        return _levels_to_voltage(self.gamma, self.quant_levels)

    def level_index(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        # ties go to the higher transmission, i.e. the smaller voltage
        return np.floor(t * (self.quant_levels - 1) + 0.5).astype(np.int64)


@functools.lru_cache(maxsize=32)
def _levels_to_voltage(gamma: float, levels: int) -> np.ndarray:
    t = np.arange(levels) / (levels - 1)
    phase = np.arccos(np.clip(2.0 * t - 1.0, -1.0, 1.0))
    v = np.sqrt(phase / (2.0 * gamma))
    v.setflags(write=False)
    return v


def estimation_profile_transmission(profile: EstimationProfile, v):
    return profile.transmission(v)


def profile_inverse(profile: EstimationProfile, t_target):
    """Quantised control voltage whose profile transmission is nearest ``t_target``."""
    v = profile.level_voltages()[profile.level_index(t_target)]
    return v if np.ndim(v) else float(v)


def quantize_controls(values, levels: int = QUANT_LEVELS, lo: float = 0.0, hi: float = 1.0):
    """Snap to the nearest of ``levels`` uniform grid points on ``[lo, hi]``."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    x = np.clip(np.asarray(values, dtype=np.float64), lo, hi)
    steps = levels - 1
    k = np.floor((x - lo) / (hi - lo) * steps + 0.5)
    return lo + k * (hi - lo) / steps


def cell_transmission(profile: EstimationProfile, v, dgamma, phase):
    """Actual control curve of a cell with gamma offset ``dgamma`` and phase bias ``phase``."""
    t = 0.5 * (1.0 + np.cos(2.0 * (profile.gamma + dgamma) * np.asarray(v) ** 2 + phase))
    return np.clip(t, 0.0, 1.0)


# -- calibration -------------------------------------------------------------------


def _cell_offsets(latent, rel_spread: float, profile: EstimationProfile):
    dgamma = latent * rel_spread * profile.gamma
    phase = latent * rel_spread * PHASE_SHARE * math.pi
    return dgamma, phase


def profile_deviation(profile: EstimationProfile, dgamma, phase) -> np.ndarray:
    """Max over the control grid of ``|T_cell - T_profile|`` (vectorised over cells)."""
    v = np.linspace(0.0, profile.v_max, CONTROL_GRID_POINTS)
    dgamma = np.atleast_1d(np.asarray(dgamma, dtype=np.float64))
    phase = np.atleast_1d(np.asarray(phase, dtype=np.float64))
    ref = profile.transmission(v)
    out = np.empty(dgamma.shape, dtype=np.float64)
    flat_g, flat_p, flat_o = dgamma.ravel(), phase.ravel(), out.reshape(-1)
    chunk = 512
    for i in range(0, flat_g.size, chunk):
        cells = cell_transmission(profile, v[None, :], flat_g[i : i + chunk, None], flat_p[i : i + chunk, None])
        flat_o[i : i + chunk] = np.max(np.abs(cells - ref[None, :]), axis=1)
    return out


def _corner_deviation(rel_spread: float, profile: EstimationProfile) -> float:
    corners = np.array([-LATENT_CLIP, LATENT_CLIP])
    dg, ph = _cell_offsets(corners, rel_spread, profile)
    return float(profile_deviation(profile, dg, ph).max())


@functools.lru_cache(maxsize=8)
def calibrated_spread(profile: EstimationProfile = EstimationProfile(), target: float = SIGMA_PHY_TARGET) -> float:
    """Relative gamma spread per unit latent such that the worst cell at 1 sigma deviates by ``target``."""
    return brentq(lambda r: _corner_deviation(r, profile) - target, 1e-6, 0.5, xtol=1e-12)


def realize_weights(profile: EstimationProfile, w, dgamma, phase):
    """Weights actually produced when ``w`` is written through cells with the given offsets."""
    t = 0.5 * (np.clip(w, -1.0, 1.0) + 1.0)
    v = profile.level_voltages()[profile.level_index(t)]
    return 2.0 * cell_transmission(profile, v, dgamma, phase) - 1.0


@functools.lru_cache(maxsize=8)
def transform_spreads(profile: EstimationProfile = EstimationProfile()) -> tuple[float, float]:
    """Standard deviations ``(s, n)`` of gain and offset errors at 1 sigma_phy.

    Each cell of a reference population is fitted with ``w' = (1 + p)(w + c)``
    over the weight range; ``s = std(p)`` and ``n = std(c)``. This ties the
    layer-level distortion model to the same calibration as the cell curves.
    """
    rng = np.random.default_rng(CALIBRATION_SEED)
    latent = np.clip(rng.standard_normal(CALIBRATION_CELLS), -LATENT_CLIP, LATENT_CLIP)
    dg, ph = _cell_offsets(latent, calibrated_spread(profile), profile)
    w = np.linspace(-1.0, 1.0, profile.quant_levels)
    realized = realize_weights(profile, w[None, :], dg[:, None], ph[:, None])
    design = np.stack([w, np.ones_like(w)], axis=1)
    coef, *_ = np.linalg.lstsq(design, realized.T, rcond=None)
    gain, intercept = coef
    p = gain - 1.0
    c = intercept / gain
    return float(np.std(p)), float(np.std(c))


# -- tiling ------------------------------------------------------------------------


@dataclass(frozen=True)
class Tile:
    row0: int
    row1: int
    col0: int
    col1: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.row1 - self.row0, self.col1 - self.col0


@dataclass(frozen=True)
class TilingPlan:
    rows: int
    cols: int
    ppm_dim: int
    tiles: tuple[Tile, ...]

    @property
    def col_blocks(self) -> int:
        return -(-self.cols // self.ppm_dim)

    def col_block_of(self) -> np.ndarray:
        return np.arange(self.cols) // self.ppm_dim


def plan_tiling(rows: int, cols: int, ppm_dim: int) -> TilingPlan:
    """Row-major partition of a ``rows x cols`` connection into PPM-sized tiles."""
    if ppm_dim < 1:
        raise ValueError("ppm_dim must be >= 1")
    tiles = []
    for r0 in range(0, rows, ppm_dim):
        for c0 in range(0, cols, ppm_dim):
            tiles.append(Tile(r0, min(r0 + ppm_dim, rows), c0, min(c0 + ppm_dim, cols)))
    return TilingPlan(rows, cols, ppm_dim, tuple(tiles))


# -- device model ------------------------------------------------------------------


def _frozen(x) -> np.ndarray:
    # float32-representable values so device files round-trip exactly
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float32).astype(np.float64))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DeviceLayer:
    p_sys: np.ndarray  # (out, in) multiplicative distortion
    p_bias: np.ndarray  # (out,)
    n_init: np.ndarray  # (out, in) fixed additive offset
    n_bias: np.ndarray  # (out,)
    dgamma: np.ndarray  # (out, in + 1) per-cell gamma offset, last column is the bias cell
    phase: np.ndarray  # (out, in + 1) per-cell phase bias
    tile_gain: np.ndarray  # (col_blocks, out) output gain error of each tile
    mod_dgamma: np.ndarray  # (in,) gamma offset of the modulator cell writing each input
    mod_phase: np.ndarray  # (in,)
    plan: TilingPlan

    @property
    def shape(self) -> tuple[int, int]:
        return self.p_sys.shape


@dataclass(frozen=True)
class DeviceModel:
    """One realised hardware instance; immutable after sampling."""

    seed: int
    sigma_level: float
    snr_db: float
    mode: str
    ppm_dim: int | None
    spec_digest: str
    layers: tuple[DeviceLayer, ...]
    profile: EstimationProfile = field(default_factory=EstimationProfile)
    # optical gain between modules: a cell at w' in [-1, 1] realises weight_scale * w'
    weight_scale: float = 1.0
    # component mode: level of the layer-level error added on every re-entry into the optics
    reinjection_level: float = 0.0
    # per-layer noise variance; None means noise relative to the current signal
    noise_floor: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown fidelity mode {self.mode!r}")
        if not self.weight_scale > 0:
            raise ValueError("weight_scale must be positive")
        if self.reinjection_level < 0:
            raise ValueError("reinjection_level must be non-negative")
        if self.noise_floor is not None and len(self.noise_floor) != len(self.layers):
            raise ValueError("noise_floor needs one entry per layer")

    def mzi_count(self) -> int:
        return sum(layer.dgamma.size + layer.mod_dgamma.size for layer in self.layers)

    def digest(self) -> str:
        return hashlib.sha256(device_to_bytes(self)).hexdigest()


def sample_device(
    seed: int,
    spec: NetworkSpec,
    sigma_level: float = 1.0,
    snr_db: float = math.inf,
    mode: str = "transform",
    ppm_dim: int | None = None,
    profile: EstimationProfile = EstimationProfile(),
    weight_scale: float = 1.0,
    reinjection_level: float = 0.0,
) -> DeviceModel:
    """Draw a device. All error terms scale linearly with ``sigma_level``.

    In component mode the layer-level terms (``p_sys``, ``n_init`` and bias
    counterparts) are drawn at ``reinjection_level * sigma_level`` instead; they
    stand for the extra control error picked up each time the signal re-enters
    the optical domain, on top of the per-cell curves. Transform mode ignores
    ``reinjection_level``.
    """
    if sigma_level < 0:
        raise ValueError("sigma_level must be non-negative")
    layer_level = sigma_level * (reinjection_level if mode == "component" else 1.0)
    s, n = transform_spreads(profile)
    spread = calibrated_spread(profile)
    rng = np.random.default_rng(seed)
    layers = []
    for out, inp in spec.shapes():
        plan = plan_tiling(out, inp, ppm_dim or max(out, inp))
        p_sys = rng.normal(0.0, s * layer_level, size=(out, inp))
        p_bias = rng.normal(0.0, s * layer_level, size=out)
        n_init = rng.normal(0.0, n * layer_level, size=(out, inp))
        n_bias = rng.normal(0.0, n * layer_level, size=out)
        latent = np.clip(rng.standard_normal((out, inp + 1)), -LATENT_CLIP, LATENT_CLIP)
        dgamma, phase = _cell_offsets(latent * sigma_level, spread, profile)
        tile_gain = rng.normal(0.0, s * sigma_level, size=(plan.col_blocks, out))
        mod_latent = np.clip(rng.standard_normal(inp), -LATENT_CLIP, LATENT_CLIP)
        mod_dgamma, mod_phase = _cell_offsets(mod_latent * sigma_level, spread, profile)
        layers.append(
            DeviceLayer(
                _frozen(p_sys), _frozen(p_bias), _frozen(n_init), _frozen(n_bias),
                _frozen(dgamma), _frozen(phase), _frozen(tile_gain),
                _frozen(mod_dgamma), _frozen(mod_phase), plan,
            )
        )
    return DeviceModel(
        int(seed), float(sigma_level), float(snr_db), mode, ppm_dim, spec.digest(), tuple(layers), profile,
        float(weight_scale), float(reinjection_level),
    )


def perturbed_device(device: DeviceModel, magnitude: float, seed: int) -> DeviceModel:
    """Shift every systematic term by an extra ``magnitude`` sigma_phy draw."""
    if magnitude == 0:
        return device
    s, n = transform_spreads(device.profile)
    spread = calibrated_spread(device.profile)
    rng = np.random.default_rng(seed)
    layers = []
    for layer in device.layers:
        out, inp = layer.shape
        latent = np.clip(rng.standard_normal((out, inp + 1)), -LATENT_CLIP, LATENT_CLIP)
        dg, ph = _cell_offsets(latent * magnitude, spread, device.profile)
        layers.append(
            replace(
                layer,
                p_sys=_frozen(layer.p_sys + rng.normal(0.0, s * magnitude, size=(out, inp))),
                p_bias=_frozen(layer.p_bias + rng.normal(0.0, s * magnitude, size=out)),
                n_init=_frozen(layer.n_init + rng.normal(0.0, n * magnitude, size=(out, inp))),
                n_bias=_frozen(layer.n_bias + rng.normal(0.0, n * magnitude, size=out)),
                dgamma=_frozen(layer.dgamma + dg),
                phase=_frozen(layer.phase + ph),
                tile_gain=_frozen(layer.tile_gain + rng.normal(0.0, s * magnitude, size=layer.tile_gain.shape)),
            )
        )
    # modulators drawn after all layers so earlier draws match older files
    for i, layer in enumerate(device.layers):
        latent = np.clip(rng.standard_normal(layer.shape[1]), -LATENT_CLIP, LATENT_CLIP)
        dg, ph = _cell_offsets(latent * magnitude, spread, device.profile)
        layers[i] = replace(layers[i], mod_dgamma=_frozen(layer.mod_dgamma + dg), mod_phase=_frozen(layer.mod_phase + ph))
    return replace(device, layers=tuple(layers))


def device_transmission(device: DeviceModel, mzi_index: tuple[int, int, int], v):
    """Transmission of cell ``(layer, row, col)``; ``col == fan_in`` addresses the bias cell."""
    layer, row, col = mzi_index
    try:
        if min(layer, row, col) < 0:
            raise IndexError
        dg = device.layers[layer].dgamma[row, col]
        ph = device.layers[layer].phase[row, col]
    except IndexError:
        raise IndexError(f"no MZI cell at {mzi_index}") from None
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0) or np.any(v > device.profile.v_max * (1 + 1e-12)):
        raise ControlRangeError(f"control voltage outside [0, {device.profile.v_max}] V")
    t = cell_transmission(device.profile, v, dg, ph)
    return t if t.ndim else float(t)


# -- physical propagation ----------------------------------------------------------


def effective_params(device: DeviceModel, layer: int, w: np.ndarray, b: np.ndarray):
    """Connection strengths the hardware actually realises for the requested ``w``, ``b``."""
    dev = device.layers[layer]
    if w.shape != dev.shape or b.shape != (dev.shape[0],):
        raise DimensionError(f"layer {layer}: parameters {w.shape} do not fit device {dev.shape}")
    if device.mode == "transform":
        return (1.0 + dev.p_sys) * (w + dev.n_init), (1.0 + dev.p_bias) * (b + dev.n_bias)
    g = device.weight_scale
    w_cell = g * realize_weights(device.profile, w / g, dev.dgamma[:, :-1], dev.phase[:, :-1])
    w_cell = w_cell * (1.0 + dev.tile_gain[dev.plan.col_block_of(), :].T)
    b_cell = g * realize_weights(device.profile, b / g, dev.dgamma[:, -1], dev.phase[:, -1])
    return (1.0 + dev.p_sys) * (w_cell + g * dev.n_init), (1.0 + dev.p_bias) * (b_cell + g * dev.n_bias)


def add_snr_noise(x: np.ndarray, snr_db: float, rng: np.random.Generator, power: float | None = None) -> np.ndarray:
    """Additive Gaussian noise with variance ``power / 10^(snr_db / 10)``.

    ``power`` defaults to the mean signal power ``mean(x^2)`` of ``x`` itself.
    """
    if math.isinf(snr_db):
        return x
    if power is None:
        power = float(np.mean(x * x))
    std = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + rng.normal(0.0, std, size=x.shape)


def encode_input(device: DeviceModel, layer: int, x: np.ndarray) -> np.ndarray:
    """Write a layer's input intensities into the optics.

    In component mode each input neuron goes through its own modulator cell:
    the intensity is snapped to the modulation grid, turned into a voltage with
    the estimation profile and read back through the cell's actual curve.
    """
    if device.mode != "component":
        return x
    dev = device.layers[layer]
    p = device.profile
    v = p.level_voltages()[p.level_index(np.clip(x, 0.0, 1.0))]
    return cell_transmission(p, v, dev.mod_dgamma, dev.mod_phase)


def physical_net_output(device, spec, layer, params_layer, a_in, rng) -> np.ndarray:
    """Distorted, noisy and clipped net output of one layer, before its nonlinearity."""
    w_eff, b_eff = params_layer
    ref = None if device.noise_floor is None else device.noise_floor[layer]
    raw = add_snr_noise(a_in @ w_eff.T + b_eff, device.snr_db, rng, ref)
    if spec.clip_to_fan_in:
        raw = clip_net_output(raw, spec.fan_in(layer))
    return raw


def physical_layer_forward(device, spec, layer, w, b, a_in, rng) -> np.ndarray:
    raw = physical_net_output(device, spec, layer, effective_params(device, layer, w, b), a_in, rng)
    return layer_activation(spec, layer, raw)


def _check_device(device: DeviceModel, spec: NetworkSpec, params: ParamSet):
    check_params(spec, params)
    if [l.shape for l in device.layers] != spec.shapes():
        raise DimensionError("device was sampled for a different network")


def _readout_power(device: DeviceModel, layer: int) -> float | None:
    # a calibrated device reads against its fixed floor, otherwise noise tracks the signal
    return None if device.noise_floor is None else device.noise_floor[layer]


def _readout(device: DeviceModel, spec: NetworkSpec, layer: int, z: np.ndarray, snr_db: float, rng) -> np.ndarray:
    """Read the output neurons. Softmax is digital post-processing of the read intensities."""
    z = add_snr_noise(z, snr_db, rng, _readout_power(device, layer))
    return layer_activation(spec, layer, z)


def physical_network_forward(
    device: DeviceModel,
    spec: NetworkSpec,
    params_phy: ParamSet,
    x,
    rng: np.random.Generator,
    readout_snr_db: float = math.inf,
    effective: list | None = None,
) -> np.ndarray:
    """Encapsulated forward pass: only the ``P`` output values per sample are observable."""
    _check_device(device, spec, params_phy)
    eff = effective or [effective_params(device, l, w, b) for l, (w, b) in enumerate(zip(params_phy.weights, params_phy.biases))]
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    last = spec.n_layers - 1
    for l in range(last):
        a = layer_activation(spec, l, physical_net_output(device, spec, l, eff[l], encode_input(device, l, a), rng))
    z = physical_net_output(device, spec, last, eff[last], encode_input(device, last, a), rng)
    return _readout(device, spec, last, z, readout_snr_db, rng)


def probe_intermediate(
    device: DeviceModel,
    spec: NetworkSpec,
    params_phy: ParamSet,
    x,
    rng: np.random.Generator,
    readout_snr_db: float,
    effective: list | None = None,
) -> list[np.ndarray]:
    """Truncated forward pass reading (and re-injecting) every layer.

    Violates encapsulation on purpose; only intermediate-access baselines use it.
    Each hidden activation is read with noise at ``readout_snr_db`` and the read
    value, floored at zero intensity, is what drives the next layer. Returns one
    array per non-input layer, ``M`` scalars per sample in total.
    """
    _check_device(device, spec, params_phy)
    eff = effective or [effective_params(device, l, w, b) for l, (w, b) in enumerate(zip(params_phy.weights, params_phy.biases))]
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    last = spec.n_layers - 1
    reads = []
    for l in range(last):
        a = layer_activation(spec, l, physical_net_output(device, spec, l, eff[l], encode_input(device, l, a), rng))
        a = np.maximum(add_snr_noise(a, readout_snr_db, rng, _readout_power(device, l)), 0.0)
        reads.append(a)
    z = physical_net_output(device, spec, last, eff[last], encode_input(device, last, a), rng)
    reads.append(_readout(device, spec, last, z, readout_snr_db, rng))
    return reads


def calibrate_noise_floor(device: DeviceModel, spec: NetworkSpec, params: ParamSet, x) -> DeviceModel:
    """Fix each layer's noise variance from a noise-free pass at ``params`` over ``x``.

    The reference is the mean net-output power of that pass, so the device runs
    at exactly ``snr_db`` at calibration and the noise stays put as the signal
    grows or shrinks during training.
    """
    _check_device(device, spec, params)
    quiet = replace(device, snr_db=math.inf, noise_floor=None)
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    powers = []
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        w_eff, b_eff = effective_params(quiet, l, w, b)
        z = encode_input(quiet, l, a) @ w_eff.T + b_eff
        powers.append(float(np.float32(np.mean(z * z))))
        if spec.clip_to_fan_in:
            z = clip_net_output(z, spec.fan_in(l))
        a = layer_activation(spec, l, z)
    return replace(device, noise_floor=tuple(powers))


def ideal_device(spec: NetworkSpec, mode: str = "transform", weight_scale: float = 1.0) -> DeviceModel:
    return sample_device(0, spec, sigma_level=0.0, mode=mode, weight_scale=weight_scale)


# -- serialisation -----------------------------------------------------------------

_HEADER = struct.Struct("<8s32sqdd")
_META = struct.Struct("<BIdddddI")


def device_to_bytes(device: DeviceModel) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(DEVICE_MAGIC, bytes.fromhex(device.spec_digest), device.seed, device.sigma_level, device.snr_db))
    p = device.profile
    buf.write(_META.pack(MODES.index(device.mode), device.ppm_dim or 0, p.gamma, p.v_max, float(p.quant_levels), device.weight_scale, device.reinjection_level, len(device.layers)))
    for layer in device.layers:
        out, inp = layer.shape
        buf.write(struct.pack("<III", out, inp, layer.tile_gain.shape[0]))
        for arr in (layer.p_sys, layer.p_bias, layer.n_init, layer.n_bias, layer.dgamma, layer.phase, layer.tile_gain, layer.mod_dgamma, layer.mod_phase):
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    floor = device.noise_floor
    buf.write(struct.pack("<B", floor is not None))
    if floor is not None:
        buf.write(np.asarray(floor, dtype="<f8").tobytes())
    return buf.getvalue()


def device_from_bytes(data: bytes) -> DeviceModel:
    view = memoryview(data)
    if len(data) < _HEADER.size or bytes(view[:8]) != DEVICE_MAGIC:
        raise ValueError("not an ASYTDEV1 device file")
    magic, digest, seed, sigma, snr = _HEADER.unpack_from(view, 0)
    pos = _HEADER.size
    mode_idx, ppm_dim, gamma, v_max, levels, scale, reinjection, n_layers = _META.unpack_from(view, pos)
    pos += _META.size
    profile = EstimationProfile(gamma, v_max, int(levels))
    layers = []

    def take(shape):
        nonlocal pos
        count = int(np.prod(shape))
        arr = np.frombuffer(view, dtype="<f4", count=count, offset=pos).reshape(shape)
        pos += 4 * count
        return _frozen(arr)

    try:
        for _ in range(n_layers):
            out, inp, blocks = struct.unpack_from("<III", view, pos)
            pos += 12
            arrays = [take(s) for s in ((out, inp), (out,), (out, inp), (out,), (out, inp + 1), (out, inp + 1), (blocks, out), (inp,), (inp,))]
            plan = plan_tiling(out, inp, ppm_dim or max(out, inp))
            layers.append(DeviceLayer(*arrays, plan))
        (has_floor,) = struct.unpack_from("<B", view, pos)
        pos += 1
        floor = None
        if has_floor:
            floor = tuple(float(v) for v in np.frombuffer(view, dtype="<f8", count=n_layers, offset=pos))
            pos += 8 * n_layers
    except (struct.error, ValueError) as exc:
        raise ValueError("truncated device file") from exc
    if pos != len(data):
        raise ValueError("trailing bytes in device file")
    return DeviceModel(seed, sigma, snr, MODES[mode_idx], ppm_dim or None, digest.hex(), tuple(layers), profile, scale, reinjection, floor)


def save_device(path, device: DeviceModel) -> None:
    from .io import atomic_write_bytes

    atomic_write_bytes(Path(path), device_to_bytes(device))


def load_device(path) -> DeviceModel:
    return device_from_bytes(Path(path).read_bytes())
