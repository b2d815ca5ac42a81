"""Alignment metrics, interface cost model, stress harnesses and sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset
from .hardware import DeviceModel, perturbed_device, sample_device
from .io import atomic_write_text
from .netcore import NetworkSpec

SWEEP_COLUMNS = ("level_or_step", "method", "train_acc", "test_acc", "angle_deg", "magnitude_ratio")
MODES = ("truncated", "encapsulated")
# propagation must be negligible next to the AD interface
MIN_INTERFACE_RATIO = 10.0


class UndefinedAngleError(ValueError):
    pass


class TopologyError(ValueError):
    pass


# -- alignment ---------------------------------------------------------------------


def alignment_angle(a, b) -> float:
    """Angle in degrees between two update vectors (flattened)."""
    a = np.ravel(np.asarray(a, dtype=np.float64))
    b = np.ravel(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedAngleError("angle undefined for a zero vector")
    c = float(np.dot(a, b) / (na * nb))
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def magnitude_ratio(pseudo, digital) -> float:
    """Frobenius-norm ratio of the pseudo update to the digital update."""
    den = np.linalg.norm(np.ravel(digital))
    if den == 0:
        raise UndefinedAngleError("digital update is zero")
    return float(np.linalg.norm(np.ravel(pseudo)) / den)


@dataclass
class AlignmentReport:
    angle_deg: np.ndarray
    magnitude_ratio: np.ndarray

    @classmethod
    def from_report(cls, report) -> "AlignmentReport":
        split = "train" if len(report.series("train")) else "test"
        return cls(report.series(split, "angle_deg"), report.series(split, "magnitude_ratio"))


# -- cost model --------------------------------------------------------------------


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


def access_count(m: int, p: int, mode: str) -> int:
    """AD interface operations per sample: every neuron twice minus outputs, or outputs only."""
    _check_mode(mode)
    if p < 1 or m <= p:
        raise TopologyError(f"need M > P >= 1, got M={m}, P={p}")
    return 2 * m - p if mode == "truncated" else p


def access_timesteps(n: int, mode: str) -> int:
    _check_mode(mode)
    if n < 1:
        raise TopologyError("need at least one hidden layer")
    return n + 1 if mode == "truncated" else 1


@dataclass(frozen=True)
class CostModelInput:
    m: int
    p: int
    n: int
    p_photonic: float = 1.0
    t_interface: float = 1e-6
    t_prop: float = 1e-9
    mode: str = "encapsulated"

    def __post_init__(self):
        _check_mode(self.mode)
        if self.p < 1 or self.m <= self.p:
            raise TopologyError(f"need M > P >= 1, got M={self.m}, P={self.p}")
        if self.n < 1:
            raise TopologyError("need at least one hidden layer")
        if min(self.p_photonic, self.t_interface, self.t_prop) <= 0:
            raise ValueError("power and times must be positive")
        if self.t_interface < MIN_INTERFACE_RATIO * self.t_prop:
            raise ValueError("propagation time must be much smaller than interface time")

    @classmethod
    def for_spec(cls, spec: NetworkSpec, **kw) -> "CostModelInput":
        return cls(spec.n_neurons, spec.n_outputs, spec.n_hidden, **kw)


def extraction_time(inp: CostModelInput) -> float:
    return access_count(inp.m, inp.p, inp.mode) * inp.t_interface + access_timesteps(inp.n, inp.mode) * inp.t_prop


def min_energy(p_photonic: float, t_extract: float) -> float:
    if p_photonic <= 0 or t_extract <= 0:
        raise ValueError("power and time must be positive")
    return p_photonic * t_extract


def cost_table(m: int, p: int, n: int, p_photonic=1.0, t_interface=1e-6, t_prop=1e-9) -> list[dict]:
    rows = []
    for mode in MODES:
        inp = CostModelInput(m, p, n, p_photonic, t_interface, t_prop, mode)
        t = extraction_time(inp)
        rows.append({
            "mode": mode,
            "accesses": access_count(m, p, mode),
            "timesteps": access_timesteps(n, mode),
            "t_extract_s": t,
            "energy_j": min_energy(p_photonic, t),
        })
    return rows


# -- stress ------------------------------------------------------------------------


def inject_perturbation(device: DeviceModel, magnitude: float, seed: int = 0) -> DeviceModel:
    """Hard systematic shift of ``magnitude`` sigma_phy; the step is chosen by the training loop."""
    return perturbed_device(device, magnitude, seed)


def alignment_break_probability(distortion_fraction: float, trials: int, seed: int = 0, dim: int = 16, chunk: int = 100_000) -> float:
    """Monte Carlo estimate of P(angle >= 90 deg) between a bounded update and its distorted copy.

    Updates are uniform in the tunable range [-1, 1]^dim; the distorted copy adds
    independent uniform noise of half-width ``distortion_fraction`` times the range
    and is clipped back into it.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if distortion_fraction < 0:
        raise ValueError("distortion_fraction must be non-negative")
    rng = np.random.default_rng(seed)
    breaks, done = 0, 0
    width = 2.0 * distortion_fraction
    while done < trials:
        k = min(chunk, trials - done)
        a = rng.uniform(-1.0, 1.0, size=(k, dim))
        b = np.clip(a + rng.uniform(-width, width, size=(k, dim)), -1.0, 1.0)
        breaks += int(np.count_nonzero(np.einsum("ij,ij->i", a, b) <= 0.0))
        done += k
    return breaks / trials


# -- sweeps ------------------------------------------------------------------------


@dataclass
class SweepRow:
    level_or_step: float
    method: str
    train_acc: float
    test_acc: float
    angle_deg: float = math.nan
    magnitude_ratio: float = math.nan


@dataclass
class RunSpec:
    """Everything one training run needs; picklable so sweeps can fan out to processes."""

    key: float
    config: object
    spec: NetworkSpec
    train_set: Dataset
    test_set: Dataset
    device_seed: int
    sigma_level: float
    # forwarded to sample_device: snr_db, mode, ppm_dim, weight_scale, reinjection_level
    device_kwargs: dict = field(default_factory=dict)


def run_one(run: RunSpec) -> SweepRow:
    from .trainer import train

    device = None
    if run.config.method != "ideal_bp":
        device = sample_device(run.device_seed, run.spec, run.sigma_level, **run.device_kwargs)
    report = train(run.config, run.spec, device, run.train_set, run.test_set)
    return SweepRow(
        run.key,
        run.config.method,
        report.final("train"),
        report.final("test"),
        report.final("train", "angle_deg"),
        report.final("train", "magnitude_ratio"),
    )


def run_all(runs: Sequence[RunSpec], workers: int = 1) -> list[SweepRow]:
    if workers <= 1 or len(runs) <= 1:
        return [run_one(r) for r in runs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, runs))


def _methods_runs(key, config, methods, **kw) -> list[RunSpec]:
    return [RunSpec(key, replace(config, method=m), **kw) for m in methods]


def distortion_sweep(
    levels: Iterable[float],
    config,
    spec: NetworkSpec,
    train_set: Dataset,
    test_set: Dataset,
    methods: Sequence[str] = ("asyt", "in_silico_bp"),
    device_seed: int = 0,
    device_kwargs: dict | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Train at each sigma multiplier; device seeds are fixed per level."""
    levels = list(levels)
    if any(not 0.0 <= lv <= 2.0 for lv in levels):
        raise ValueError("levels must lie in [0, 2]")
    runs = []
    for i, lv in enumerate(levels):
        runs += _methods_runs(lv, config, methods, spec=spec, train_set=train_set, test_set=test_set,
                              device_seed=device_seed + i, sigma_level=lv, device_kwargs=dict(device_kwargs or {}))
    return run_all(runs, workers)


def width_sweep(
    widths: Iterable[int],
    config,
    n_inputs: int,
    n_outputs: int,
    train_set: Dataset,
    test_set: Dataset,
    methods: Sequence[str] = ("asyt", "ideal_bp"),
    sigma_level: float = 1.0,
    device_seed: int = 0,
    device_kwargs: dict | None = None,
    hidden_activation: str = "relu",
    workers: int = 1,
) -> list[SweepRow]:
    """One hidden layer of each width."""
    runs = []
    for w in widths:
        spec = NetworkSpec((n_inputs, int(w), n_outputs), hidden_activation)
        runs += _methods_runs(w, config, methods, spec=spec, train_set=train_set, test_set=test_set,
                              device_seed=device_seed, sigma_level=sigma_level, device_kwargs=dict(device_kwargs or {}))
    return run_all(runs, workers)


def depth_sweep(
    depths: Iterable[int],
    config,
    n_inputs: int,
    n_outputs: int,
    train_set: Dataset,
    test_set: Dataset,
    width: int = 128,
    methods: Sequence[str] = ("asyt", "ideal_bp"),
    sigma_level: float = 1.0,
    device_seed: int = 0,
    device_kwargs: dict | None = None,
    hidden_activation: str = "relu",
    workers: int = 1,
) -> list[SweepRow]:
    runs = []
    for d in depths:
        spec = NetworkSpec((n_inputs,) + (width,) * int(d) + (n_outputs,), hidden_activation)
        runs += _methods_runs(d, config, methods, spec=spec, train_set=train_set, test_set=test_set,
                              device_seed=device_seed, sigma_level=sigma_level, device_kwargs=dict(device_kwargs or {}))
    return run_all(runs, workers)


def sweep_csv_text(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([repr(float(r.level_or_step)), r.method] + [repr(float(getattr(r, c))) for c in SWEEP_COLUMNS[2:]])
    return buf.getvalue()


def write_sweep_csv(path, rows: Iterable[SweepRow]) -> None:
    atomic_write_text(Path(path), sweep_csv_text(rows))
