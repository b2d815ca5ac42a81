"""Training loops: the asymmetrical estimator, its baselines, and digital update traces.

Every method shares one data order and one initialisation per seed, so runs
are directly comparable and the digital trajectory never depends on a device.
Gradients leave ``backprop`` rounded to float32 precision; that is the storage
precision of update traces, and keeping live runs at the same precision makes
replays bitwise reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import netcore as nc
from .data import Dataset, batch_iterator, batch_schedule_digest, batches_per_epoch
from .hardware import (
    DeviceModel,
    calibrate_noise_floor,
    effective_params,
    perturbed_device,
    physical_network_forward,
    probe_intermediate,
)
from .io import atomic_write_bytes, atomic_write_text
from .netcore import GradSet, NetworkSpec, ParamSet

METHODS = ("asyt", "ideal_bp", "in_silico_bp", "pseudo_ipbp", "pat")
OPTIMIZERS = ("gd", "adam")
TRACE_MAGIC = b"ASYTTRC1"
TRACE_VERSION = 1
# learning rates are for batch-mean gradients
LR_RANGE = (1e-4, 1.0)
METRIC_COLUMNS = ("epoch", "split", "method", "loss", "accuracy", "angle_deg", "magnitude_ratio")


class ConfigError(ValueError):
    pass


class TraceCompatibilityError(ValueError):
    pass


@dataclass
class TrainConfig:
    method: str = "asyt"
    learning_rate: float = 0.03
    epochs: int = 100
    batch_size: int = 600
    m_w1: float = 0.5
    m_w2: float = 0.5
    optimizer: str = "gd"
    seed: int = 0
    readout_snr_db: float = math.inf
    init_bias: float = 0.0
    eval_train: bool = True
    perturb_step: int = -1
    perturb_magnitude: float = 0.0
    perturb_seed: int = 0
    # symmetric bound on every control after each update; inf leaves them free
    weight_bound: float = math.inf
    # fix a noisy device's per-layer noise floor from the first batch at initialisation
    calibrate_noise: bool = True

    def validate(self) -> "TrainConfig":
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not LR_RANGE[0] <= self.learning_rate <= LR_RANGE[1]:
            raise ConfigError(f"learning_rate {self.learning_rate} outside {LR_RANGE}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not self.weight_bound > 0:
            raise ConfigError("weight_bound must be positive")
        for name in ("m_w1", "m_w2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        return self


# -- optimisers --------------------------------------------------------------------


class GradientDescent:
    name = "gd"

    def apply(self, params: ParamSet, grads: GradSet, lr: float) -> ParamSet:
        return params.zip_map(grads, lambda w, g: w - lr * g)


class Adam:
    name = "adam"

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None
        self.t = 0

    def apply(self, params: ParamSet, grads: GradSet, lr: float) -> ParamSet:
        nc.check_same_layout(params, grads)
        gs = grads.arrays()
        if self.m is None:
            self.m = [np.zeros_like(g) for g in gs]
            self.v = [np.zeros_like(g) for g in gs]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for w, g, m, v in zip(params.arrays(), gs, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            out.append(w - lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return ParamSet(out[0::2], out[1::2])


def make_optimizer(name: str):
    if name == "gd":
        return GradientDescent()
    if name == "adam":
        return Adam()
    raise ConfigError(f"unknown optimizer {name!r}")


def optimizer_apply(params: ParamSet, grads: GradSet, lr: float, state, bound: float = math.inf) -> ParamSet:
    """One optimiser step, then projection onto ``[-bound, bound]``."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    out = state.apply(params, grads, lr)
    if math.isinf(bound):
        return out
    return out.map(lambda w: np.clip(w, -bound, bound))


# -- state and steps ---------------------------------------------------------------


def stored(grads: GradSet) -> GradSet:
    """Round to float32 precision (trace storage precision), kept as float64."""
    return grads.map(lambda g: g.astype(np.float32).astype(np.float64))


def asyt_update(grad_dig: GradSet, grad_pseudo: GradSet, m_w1: float = 0.5, m_w2: float = 0.5) -> GradSet:
    """Per-layer mixture of the parallel-model update and the pseudo update."""
    return grad_dig.zip_map(grad_pseudo, lambda d, p: m_w1 * d + m_w2 * p)


@dataclass
class Counters:
    digital_backprops: int = 0
    pseudo_backprops: int = 0
    physical_forwards: int = 0
    intermediate_probes: int = 0


@dataclass
class TrainState:
    params_dig: ParamSet
    params_phy: ParamSet
    opt_dig: object
    opt_phy: object
    noise_rng: np.random.Generator
    step: int = 0
    counters: Counters = field(default_factory=Counters)


@dataclass
class StepInfo:
    loss_dig: float = math.nan
    loss_phy: float = math.nan
    grad_dig: GradSet | None = None
    grad_pseudo: GradSet | None = None


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for initialisation and physical noise."""
    init_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(noise_ss)


def initial_params(spec: NetworkSpec, config: TrainConfig) -> ParamSet:
    init_rng, _ = seed_streams(config.seed)
    return nc.init_params(spec, init_rng, bias=config.init_bias)


def init_state(spec: NetworkSpec, config: TrainConfig) -> TrainState:
    """Digital and physical controls start from the same randomised values."""
    params = initial_params(spec, config)
    _, noise_rng = seed_streams(config.seed)
    return TrainState(
        params_dig=params,
        params_phy=params.copy(),
        opt_dig=make_optimizer(config.optimizer),
        opt_phy=make_optimizer(config.optimizer),
        noise_rng=noise_rng,
    )


def _effective(device: DeviceModel, params: ParamSet) -> list:
    return [effective_params(device, l, w, b) for l, (w, b) in enumerate(zip(params.weights, params.biases))]


def digital_step(state: TrainState, spec: NetworkSpec, x, y, config: TrainConfig, traced: GradSet | None = None) -> StepInfo:
    """Plain backpropagation on the digital model (ideal and in-silico BP)."""
    rec = nc.forward(spec, state.params_dig, x)
    if traced is None:
        grad = stored(nc.backprop(spec, state.params_dig, rec, nc.output_delta(rec.prediction, y)))
        state.counters.digital_backprops += 1
    else:
        grad = traced
    state.params_dig = optimizer_apply(state.params_dig, grad, config.learning_rate, state.opt_dig, config.weight_bound)
    state.params_phy = state.params_dig
    state.step += 1
    return StepInfo(loss_dig=nc.loss(rec.prediction, y), grad_dig=grad)


def asyt_step(
    state: TrainState,
    spec: NetworkSpec,
    device: DeviceModel,
    x,
    y,
    config: TrainConfig,
    traced: GradSet | None = None,
) -> StepInfo:
    """One asymmetrical update.

    The digital and physical systems see the same batch. Both output errors are
    backpropagated through the digital forward record; the digital parameters
    take the pure digital gradient and the physical controls take the mixture.
    With ``traced`` the digital gradient is read from a trace instead of computed.
    """
    rec = nc.forward(spec, state.params_dig, x)
    pred_phy = physical_network_forward(device, spec, state.params_phy, x, state.noise_rng, config.readout_snr_db)
    state.counters.physical_forwards += 1
    if traced is None:
        grad_dig = stored(nc.backprop(spec, state.params_dig, rec, nc.output_delta(rec.prediction, y)))
        state.counters.digital_backprops += 1
    else:
        grad_dig = traced
    grad_pseudo = stored(nc.backprop(spec, state.params_dig, rec, nc.output_delta(pred_phy, y)))
    state.counters.pseudo_backprops += 1
    grad_asyt = asyt_update(grad_dig, grad_pseudo, config.m_w1, config.m_w2)
    state.params_dig = optimizer_apply(state.params_dig, grad_dig, config.learning_rate, state.opt_dig, config.weight_bound)
    state.params_phy = optimizer_apply(state.params_phy, grad_asyt, config.learning_rate, state.opt_phy, config.weight_bound)
    state.step += 1
    return StepInfo(nc.loss(rec.prediction, y), nc.loss(pred_phy, y), grad_dig, grad_pseudo)


def pseudo_ipbp_step(state: TrainState, spec: NetworkSpec, device: DeviceModel, x, y, config: TrainConfig) -> StepInfo:
    """Physical output error backpropagated through digital intermediate states; one parameter set."""
    rec = nc.forward(spec, state.params_dig, x)
    pred_phy = physical_network_forward(device, spec, state.params_dig, x, state.noise_rng, config.readout_snr_db)
    state.counters.physical_forwards += 1
    grad = stored(nc.backprop(spec, state.params_dig, rec, nc.output_delta(pred_phy, y)))
    state.counters.pseudo_backprops += 1
    state.params_dig = optimizer_apply(state.params_dig, grad, config.learning_rate, state.opt_dig, config.weight_bound)
    state.params_phy = state.params_dig
    state.step += 1
    return StepInfo(nc.loss(rec.prediction, y), nc.loss(pred_phy, y), grad_pseudo=grad)


def pat_step(
    state: TrainState,
    spec: NetworkSpec,
    device: DeviceModel,
    x,
    y,
    config: TrainConfig,
    twin: DeviceModel | None = None,
) -> StepInfo:
    """Physics-aware training on a truncated system.

    Every layer is read out (with readout noise) and re-injected. The backward
    pass runs through a differentiable twin of the hardware, characterised once
    at the start of training (``twin``), evaluated at the probed activations.
    """
    twin = twin or device
    params = state.params_dig
    reads = probe_intermediate(device, spec, params, x, state.noise_rng, config.readout_snr_db)
    state.counters.physical_forwards += 1
    state.counters.intermediate_probes += 1
    eff = _effective(twin, params)
    inputs = [np.atleast_2d(np.asarray(x, dtype=np.float64))] + reads[:-1]
    z = [a @ w.T + b for a, (w, b) in zip(inputs, eff)]
    rec = nc.ForwardRecord(z=z, a=inputs + [reads[-1]])
    twin_params = ParamSet([w for w, _ in eff], [b for _, b in eff])
    g_eff = nc.backprop(spec, twin_params, rec, nc.output_delta(reads[-1], y))
    grad = stored(_twin_chain(twin, g_eff))
    state.params_dig = optimizer_apply(params, grad, config.learning_rate, state.opt_dig, config.weight_bound)
    state.params_phy = state.params_dig
    state.step += 1
    return StepInfo(loss_phy=nc.loss(reads[-1], y), grad_pseudo=grad)


def _twin_chain(twin: DeviceModel, g_eff: GradSet) -> GradSet:
    """Chain rule from effective to requested parameters for the twin's distortion model."""
    if twin.mode != "transform":
        # quantised cell curves have no useful derivative; straight-through
        return g_eff
    return ParamSet(
        [g * (1.0 + dev.p_sys) for g, dev in zip(g_eff.weights, twin.layers)],
        [g * (1.0 + dev.p_bias) for g, dev in zip(g_eff.biases, twin.layers)],
    )


# -- reports -----------------------------------------------------------------------


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    method: str
    loss: float
    accuracy: float
    angle_deg: float = math.nan
    magnitude_ratio: float = math.nan
    digital_accuracy: float = math.nan


@dataclass
class TrainReport:
    method: str
    spec: NetworkSpec
    seed: int
    epochs: list[EpochMetrics] = field(default_factory=list)
    counters: Counters = field(default_factory=Counters)
    access_per_sample: int = 0
    intermediate_access: bool = False
    replayed: bool = False
    device_digest: str = ""
    params_dig: ParamSet | None = None
    params_phy: ParamSet | None = None
    trace: "UpdateTrace | None" = None
    per_layer_angles: list[list[float]] = field(default_factory=list)

    def series(self, split: str, key: str = "accuracy") -> np.ndarray:
        return np.array([getattr(m, key) for m in self.epochs if m.split == split])

    def final(self, split: str = "test", key: str = "accuracy") -> float:
        s = self.series(split, key)
        return float(s[-1]) if len(s) else math.nan

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for m in self.epochs:
            writer.writerow([m.epoch, m.split, m.method] + [repr(float(getattr(m, k))) for k in METRIC_COLUMNS[3:]])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(Path(path), self.csv_text())

    def summary(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "spec": list(self.spec.layer_sizes),
            "device_hash": self.device_digest,
            "epochs": max((m.epoch for m in self.epochs), default=0),
            "final_train_acc": self.final("train"),
            "final_test_acc": self.final("test"),
            "final_train_digital_acc": self.final("train", "digital_accuracy"),
            "final_test_digital_acc": self.final("test", "digital_accuracy"),
            "params_dig_hash": self.params_dig.digest() if self.params_dig else "",
            "params_phy_hash": self.params_phy.digest() if self.params_phy else "",
            "access_per_sample": self.access_per_sample,
            "intermediate_access": self.intermediate_access,
            "replayed": self.replayed,
            "counters": asdict(self.counters),
        }


def flat_angle(a: GradSet, b: GradSet) -> float:
    from .diagnostics import alignment_angle, UndefinedAngleError

    try:
        return alignment_angle(a.flatten(), b.flatten())
    except UndefinedAngleError:
        return math.nan


def _norm_ratio(num: GradSet, den: GradSet) -> float:
    d = np.linalg.norm(den.flatten())
    return float(np.linalg.norm(num.flatten()) / d) if d > 0 else math.nan


def evaluate(
    method: str,
    spec: NetworkSpec,
    device: DeviceModel | None,
    state: TrainState,
    dataset: Dataset,
    config: TrainConfig,
) -> tuple[float, float, float]:
    """``(loss, accuracy, digital_accuracy)``; accuracy is the deployed system's."""
    y = dataset.onehot()
    digital = nc.forward(spec, state.params_dig, dataset.features).prediction
    dig_acc = nc.accuracy(digital, dataset.labels)
    if method == "ideal_bp" or device is None:
        return nc.loss(digital, y), dig_acc, dig_acc
    if method == "pat":
        pred = probe_intermediate(device, spec, state.params_phy, dataset.features, state.noise_rng, config.readout_snr_db)[-1]
    else:
        pred = physical_network_forward(device, spec, state.params_phy, dataset.features, state.noise_rng, config.readout_snr_db)
    return nc.loss(pred, y), nc.accuracy(pred, dataset.labels), dig_acc


def _finite_mean(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[np.isfinite(arr)]
    return float(arr.mean()) if arr.size else math.nan


def _access_per_sample(method: str, spec: NetworkSpec) -> int:
    from .diagnostics import access_count

    if method == "ideal_bp":
        return 0
    return access_count(spec.n_neurons, spec.n_outputs, "truncated" if method == "pat" else "encapsulated")


def train(
    config: TrainConfig,
    spec: NetworkSpec,
    device: DeviceModel | None,
    train_set: Dataset,
    test_set: Dataset | None = None,
    record_trace: bool = False,
    trace: "UpdateTrace | None" = None,
) -> TrainReport:
    """Run ``config.method`` for ``config.epochs`` epochs; evaluate after every epoch.

    With ``trace`` (asyt only) digital gradients are replayed instead of computed.
    With ``record_trace`` the digital gradients are kept in ``report.trace``.
    """
    config.validate()
    method = config.method
    if device is None and method != "ideal_bp":
        raise ConfigError(f"method {method!r} needs a device")
    if trace is not None:
        if method != "asyt":
            raise ConfigError("trace replay drives the asymmetrical estimator only")
        check_trace(trace, config, spec, train_set)
    state = init_state(spec, config)
    device_digest = device.digest() if device is not None else ""
    if (device is not None and config.calibrate_noise and device.noise_floor is None
            and not (math.isinf(device.snr_db) and math.isinf(config.readout_snr_db))):
        device = calibrate_noise_floor(device, spec, state.params_phy, train_set.features[: config.batch_size])
    recorder = TraceRecorder(config, spec, train_set, state.params_dig) if record_trace else None
    twin = device
    report = TrainReport(
        method=method,
        spec=spec,
        seed=config.seed,
        access_per_sample=_access_per_sample(method, spec),
        intermediate_access=method == "pat",
        replayed=trace is not None,
        device_digest=device_digest,
    )

    for epoch in range(config.epochs):
        angles, ratios, layer_angles = [], [], []
        for x, y, _ in batch_iterator(train_set, config.batch_size, config.seed, epoch):
            if state.step == config.perturb_step and config.perturb_magnitude > 0 and device is not None:
                device = perturbed_device(device, config.perturb_magnitude, config.perturb_seed)
            traced = trace.step_grads(state.step) if trace is not None else None
            if method == "asyt":
                info = asyt_step(state, spec, device, x, y, config, traced)
            elif method in ("ideal_bp", "in_silico_bp"):
                info = digital_step(state, spec, x, y, config)
            elif method == "pseudo_ipbp":
                info = pseudo_ipbp_step(state, spec, device, x, y, config)
            else:
                info = pat_step(state, spec, device, x, y, config, twin)
            if recorder is not None and info.grad_dig is not None:
                recorder.append(info.grad_dig)
            if info.grad_dig is not None and info.grad_pseudo is not None:
                angles.append(flat_angle(info.grad_pseudo, info.grad_dig))
                ratios.append(_norm_ratio(info.grad_pseudo, info.grad_dig))
                layer_angles.append([
                    flat_angle(ParamSet([gp], [bp]), ParamSet([gd], [bd]))
                    for gp, bp, gd, bd in zip(info.grad_pseudo.weights, info.grad_pseudo.biases, info.grad_dig.weights, info.grad_dig.biases)
                ])
        angle = _finite_mean(angles)
        ratio = _finite_mean(ratios)
        if layer_angles:
            report.per_layer_angles.append([_finite_mean(col) for col in zip(*layer_angles)])
        splits = ([train_set] if config.eval_train else []) + ([test_set] if test_set is not None else [])
        for ds in splits:
            loss_value, acc, dig_acc = evaluate(method, spec, device, state, ds, config)
            report.epochs.append(EpochMetrics(epoch + 1, ds.split, method, loss_value, acc, angle, ratio, dig_acc))

    report.counters = state.counters
    report.params_dig = state.params_dig
    report.params_phy = state.params_phy
    if recorder is not None:
        report.trace = recorder.finish()
    return report


def in_silico_bp_deploy(
    spec: NetworkSpec,
    device: DeviceModel,
    params_dig: ParamSet,
    datasets: Sequence[Dataset],
    seed: int = 0,
    readout_snr_db: float = math.inf,
) -> TrainReport:
    """Deploy digitally trained parameters through the estimation profile, no feedback."""
    _, noise_rng = seed_streams(seed)
    state = TrainState(params_dig, params_dig, None, None, noise_rng)
    config = TrainConfig(method="in_silico_bp", seed=seed, readout_snr_db=readout_snr_db)
    report = TrainReport("in_silico_bp", spec, seed, access_per_sample=_access_per_sample("in_silico_bp", spec),
                         device_digest=device.digest(), params_dig=params_dig, params_phy=params_dig)
    for ds in datasets:
        loss_value, acc, dig_acc = evaluate("in_silico_bp", spec, device, state, ds, config)
        report.epochs.append(EpochMetrics(0, ds.split, "in_silico_bp", loss_value, acc, digital_accuracy=dig_acc))
    return report


# -- update traces -----------------------------------------------------------------


@dataclass(frozen=True)
class TraceHeader:
    version: int
    spec_digest: str
    init_digest: str
    seed: int
    steps: int
    batch_digest: str
    shapes: tuple[tuple[int, int], ...]
    learning_rates: np.ndarray = field(compare=False)

    def matches(self, other: "TraceHeader") -> bool:
        return (
            self.spec_digest == other.spec_digest
            and self.init_digest == other.init_digest
            and self.seed == other.seed
            and self.steps == other.steps
            and self.batch_digest == other.batch_digest
            and self.shapes == other.shapes
            and np.array_equal(self.learning_rates, other.learning_rates)
        )


class UpdateTrace:
    """Device-independent sequence of digital gradient updates."""

    def __init__(self, header: TraceHeader, steps: Sequence[GradSet] | "_MappedSteps"):
        self.header = header
        self._steps = steps
        if len(steps) != header.steps:
            raise TraceCompatibilityError(f"header announces {header.steps} steps, body holds {len(steps)}")

    def __len__(self) -> int:
        return len(self._steps)

    def step_grads(self, t: int) -> GradSet:
        return self._steps[t]

    def __iter__(self):
        return (self._steps[t] for t in range(len(self)))

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        _write_trace_header(buf, self.header)
        for grads in self:
            for arr in grads.arrays():
                buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        return buf.getvalue()

    def save(self, path) -> None:
        atomic_write_bytes(Path(path), self.to_bytes())


def expected_header(config: TrainConfig, spec: NetworkSpec, train_set: Dataset) -> TraceHeader:
    steps = config.epochs * batches_per_epoch(len(train_set), config.batch_size)
    return TraceHeader(
        version=TRACE_VERSION,
        spec_digest=spec.digest(),
        init_digest=initial_params(spec, config).digest(),
        seed=config.seed,
        steps=steps,
        batch_digest=batch_schedule_digest(train_set, config.batch_size, config.seed, config.epochs),
        shapes=tuple(spec.shapes()),
        learning_rates=np.full(steps, float(config.learning_rate)),
    )


def check_trace(trace: UpdateTrace, config: TrainConfig, spec: NetworkSpec, train_set: Dataset) -> None:
    want = expected_header(config, spec, train_set)
    if not trace.header.matches(want):
        diffs = [
            name for name in ("spec_digest", "init_digest", "seed", "steps", "batch_digest", "shapes")
            if getattr(trace.header, name) != getattr(want, name)
        ]
        if not np.array_equal(trace.header.learning_rates, want.learning_rates):
            diffs.append("learning_rates")
        raise TraceCompatibilityError(f"trace does not match this run: {', '.join(diffs)}")


class TraceRecorder:
    def __init__(self, config: TrainConfig, spec: NetworkSpec, train_set: Dataset, initial: ParamSet):
        self.header = expected_header(config, spec, train_set)
        self.steps: list[GradSet] = []

    def append(self, grads: GradSet) -> None:
        self.steps.append(grads.map(lambda g: g.astype(np.float32)))

    def finish(self) -> UpdateTrace:
        return UpdateTrace(self.header, [g.map(lambda a: a.astype(np.float64)) for g in self.steps])


def record_trace(config: TrainConfig, spec: NetworkSpec, train_set: Dataset) -> UpdateTrace:
    """Digital-only training that records every parallel-model update; no device involved."""
    cfg = TrainConfig(**{**asdict(config), "method": "ideal_bp", "eval_train": False})
    return train(cfg, spec, None, train_set, None, record_trace=True).trace


def replay_train(
    trace: UpdateTrace,
    device: DeviceModel,
    config: TrainConfig,
    spec: NetworkSpec,
    train_set: Dataset,
    test_set: Dataset | None = None,
) -> TrainReport:
    """Train one device copy from a stored trace; no digital backpropagation runs."""
    cfg = TrainConfig(**{**asdict(config), "method": "asyt"})
    return train(cfg, spec, device, train_set, test_set, trace=trace)


_TRACE_FIXED = struct.Struct("<8sI32s32sqQ32sI")


def _write_trace_header(buf, h: TraceHeader) -> None:
    buf.write(_TRACE_FIXED.pack(
        TRACE_MAGIC, h.version, bytes.fromhex(h.spec_digest), bytes.fromhex(h.init_digest),
        h.seed, h.steps, bytes.fromhex(h.batch_digest), len(h.shapes),
    ))
    for out, inp in h.shapes:
        buf.write(struct.pack("<II", out, inp))
    buf.write(np.ascontiguousarray(h.learning_rates, dtype="<f8").tobytes())


def _read_trace_header(data) -> tuple[TraceHeader, int]:
    if len(data) < _TRACE_FIXED.size or bytes(data[:8]) != TRACE_MAGIC:
        raise TraceCompatibilityError("not an ASYTTRC1 trace file")
    magic, version, spec_d, init_d, seed, steps, batch_d, n_layers = _TRACE_FIXED.unpack_from(data, 0)
    if version != TRACE_VERSION:
        raise TraceCompatibilityError(f"unsupported trace version {version}")
    pos = _TRACE_FIXED.size
    shapes = []
    for _ in range(n_layers):
        shapes.append(struct.unpack_from("<II", data, pos))
        pos += 8
    lrs = np.frombuffer(data, dtype="<f8", count=steps, offset=pos).astype(np.float64)
    pos += 8 * steps
    header = TraceHeader(version, spec_d.hex(), init_d.hex(), seed, steps, batch_d.hex(), tuple(shapes), lrs)
    return header, pos


class _MappedSteps:
    """Lazy per-step view over a memory-mapped trace body."""

    def __init__(self, path: Path, header: TraceHeader, offset: int):
        self.shapes = header.shapes
        self.per_step = sum(o * i + o for o, i in header.shapes)
        self.n = header.steps
        expected = offset + 4 * self.per_step * self.n
        size = path.stat().st_size
        if size != expected:
            raise TraceCompatibilityError(f"trace body size {size - offset} does not match header")
        self.body = np.memmap(path, dtype="<f4", mode="r", offset=offset, shape=(self.n, self.per_step)) if self.n else np.zeros((0, 0), "<f4")

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, t: int) -> GradSet:
        row = np.asarray(self.body[t], dtype=np.float64)
        weights, biases, pos = [], [], 0
        for out, inp in self.shapes:
            weights.append(row[pos : pos + out * inp].reshape(out, inp))
            pos += out * inp
            biases.append(row[pos : pos + out].copy())
            pos += out
        return ParamSet(weights, biases)


def load_trace(path) -> UpdateTrace:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(_TRACE_FIXED.size)
        if len(head) < _TRACE_FIXED.size or head[:8] != TRACE_MAGIC:
            raise TraceCompatibilityError("not an ASYTTRC1 trace file")
        n_layers = _TRACE_FIXED.unpack(head)[-1]
        steps = _TRACE_FIXED.unpack(head)[5]
        f.seek(0)
        data = f.read(_TRACE_FIXED.size + 8 * n_layers + 8 * steps)
    header, offset = _read_trace_header(data)
    return UpdateTrace(header, _MappedSteps(path, header, offset))


def trace_from_bytes(data: bytes) -> UpdateTrace:
    header, pos = _read_trace_header(data)
    per_step = sum(o * i + o for o, i in header.shapes)
    if len(data) - pos != 4 * per_step * header.steps:
        raise TraceCompatibilityError("trace body size does not match header")
    body = np.frombuffer(data, dtype="<f4", offset=pos).reshape(header.steps, per_step)
    steps = []
    for row in body:
        row = row.astype(np.float64)
        weights, biases, k = [], [], 0
        for out, inp in header.shapes:
            weights.append(row[k : k + out * inp].reshape(out, inp))
            k += out * inp
            biases.append(row[k : k + out].copy())
            k += out
        steps.append(ParamSet(weights, biases))
    return UpdateTrace(header, steps)


def params_hash(params: ParamSet) -> str:
    return hashlib.sha256(params.digest().encode()).hexdigest()
