"""Command-line front end: ``asyt train|sweep|replay|cost|record-trace|sample-device``.

Experiments are described by flat UTF-8 ``key = value`` files. Settings are
layered: built-in defaults, then the dataset's recipe, then ``--preset``, then
``--config``, then ``--set`` pairs, then ``--seed``. Exit codes: 0 success,
2 bad configuration or arguments, 3 incompatible trace or device file,
4 missing dataset files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import diagnostics as dg
from . import hardware as hw
from . import tasks
from . import trainer as tr
from .data import DATA_DIR_ENV, DataConsistencyError, DataFormatError
from .io import atomic_write_text
from .netcore import DimensionError

EXIT_CONFIG = 2
EXIT_INCOMPATIBLE = 3
EXIT_DATA = 4

SWEEP_AXES = ("sigma", "width", "depth")
METHOD_SUFFIXES = {
    "asyt": "asyt",
    "ideal": "ideal_bp",
    "insilico": "in_silico_bp",
    "pseudo": "pseudo_ipbp",
    "pat": "pat",
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


# -- experiment configuration --------------------------------------------------


@dataclass
class ExperimentConfig:
    """One experiment; every field maps to one key of the textual form."""

    train: tr.TrainConfig = field(default_factory=tr.TrainConfig)
    dataset: str = "iris3"
    data_dir: str = ""
    iris_path: str = ""
    hidden: str = "256,256"
    split_seed: int = 0
    # per-class caps for the MNIST family, 0 keeps every sample
    train_per_class: int = 0
    test_per_class: int = 0
    device_seed: int = 0
    sigma_level: float = 1.0
    snr_db: float = math.inf
    mode: str = "transform"
    ppm_dim: int = 0
    weight_scale: float = 1.0
    reinjection_level: float = 0.0
    device_file: str = ""
    save_device: bool = False
    record_trace: bool = False
    trace: str = ""
    devices: str = ""
    fleet_size: int = 5
    live_compare: bool = True
    # comma list run side by side by ``train``; empty runs ``method`` alone
    methods: str = ""
    # tuned settings for the intermediate-access baseline
    pat_optimizer: str = "adam"
    pat_learning_rate: float = 3e-4
    # negative leaves ``perturb_step`` as given
    perturb_fraction: float = -1.0
    sweep: str = "sigma"
    sweep_values: str = "0,0.5,1,1.5,2"
    sweep_methods: str = "asyt,in_silico_bp"
    sweep_width: int = 128
    workers: int = 1
    m: int = 0
    p: int = 0
    n: int = 0
    p_photonic: float = 1.0
    t_interface: float = 1e-6
    t_prop: float = 1e-9

    # -- keys ------------------------------------------------------------------

    @staticmethod
    def train_keys() -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(tr.TrainConfig))

    @classmethod
    def own_keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls) if f.name != "train")

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return cls.train_keys() + cls.own_keys()

    def get(self, key: str):
        return getattr(self.train, key) if key in self.train_keys() else getattr(self, key)

    def as_dict(self) -> dict:
        return {k: self.get(k) for k in self.keys()}

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        unknown = sorted(set(values) - set(cls.keys()))
        if unknown:
            raise CliError(f"unknown config key {unknown[0]!r}")
        train_keys = set(cls.train_keys())
        train = tr.TrainConfig(**{k: v for k, v in values.items() if k in train_keys})
        return cls(train=train, **{k: v for k, v in values.items() if k not in train_keys})

    # -- derived -------------------------------------------------------------------

    def hidden_sizes(self) -> tuple[int, ...]:
        return _int_list(self.hidden, "hidden")

    def method_list(self) -> list[str]:
        names = [s.strip() for s in self.methods.split(",") if s.strip()]
        return names or [self.train.method]

    def device_kwargs(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "mode": self.mode,
            "ppm_dim": self.ppm_dim or None,
            "weight_scale": self.weight_scale,
            "reinjection_level": self.reinjection_level,
        }

    def recipe(self) -> tasks.Recipe:
        return tasks.recipe(self.dataset, self.hidden_sizes())

    def train_config(self, method: str | None = None, steps_per_epoch: int | None = None) -> tr.TrainConfig:
        cfg = self.train
        method = method or cfg.method
        cfg = dataclasses.replace(cfg, method=method)
        if method == "pat":
            cfg = dataclasses.replace(cfg, optimizer=self.pat_optimizer, learning_rate=self.pat_learning_rate)
        if self.perturb_fraction >= 0 and steps_per_epoch is not None:
            cfg = dataclasses.replace(cfg, perturb_step=int(self.perturb_fraction * cfg.epochs * steps_per_epoch))
        return cfg.validate()


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _key_type(key: str) -> type:
    default = ExperimentConfig().get(key)
    return type(default)


def parse_value(key: str, text: str):
    kind = _key_type(key)
    try:
        if kind is bool:
            return _parse_bool(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise CliError(f"bad value for {key!r}: {text!r}") from None
    return text


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "config") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment line. Returns only the keys present."""
    values = {}
    known = set(ExperimentConfig.keys())
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise CliError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = parse_value(key, value)
    return values


def config_to_text(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in cfg.as_dict().items())


def config_from_text(text: str) -> ExperimentConfig:
    return ExperimentConfig.from_dict(parse_config_text(text))


def _int_list(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise CliError(f"bad value for {key!r}: {text!r}") from None


def _float_list(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise CliError(f"bad value for {key!r}: {text!r}") from None


# -- presets -----------------------------------------------------------------------

_STRESS = {"dataset": "mnist", "methods": "asyt,pat", "batch_size": 100, "epochs": 30, "device_seed": 200}

PRESETS: dict[str, dict] = {
    "iris2-encapsulated": {"dataset": "iris2", "device_seed": 100},
    "iris3": {"dataset": "iris3", "device_seed": 100},
    "digits4-tiled": {"dataset": "digits4", "device_seed": 100},
    "mnist": {"dataset": "mnist"},
    "fmnist": {"dataset": "fmnist"},
    "kmnist": {"dataset": "kmnist"},
    "sweep-sigma": {"dataset": "mnist", "sweep": "sigma", "sweep_values": "0,0.5,1,1.5,2",
                    "sweep_methods": "asyt,in_silico_bp,ideal_bp"},
    "sweep-width": {"dataset": "mnist", "sweep": "width", "sweep_values": "64,128,256,512",
                    "sweep_methods": "asyt,ideal_bp"},
    "sweep-depth": {"dataset": "mnist", "sweep": "depth", "sweep_values": "1,2,3,4", "sweep_width": 128,
                    "sweep_methods": "asyt,ideal_bp"},
    "stress-perturb": {**_STRESS, "perturb_fraction": 0.5, "perturb_magnitude": 1.0},
    "stress-noise": {**_STRESS, "readout_snr_db": 5.0},
    "replay-fleet": {"dataset": "mnist", "fleet_size": 5, "device_seed": 200},
}


def preset(name: str) -> dict:
    """Preset values by name; ``<preset>-<method>`` also fixes the method (e.g. ``mnist-asyt``)."""
    if name in PRESETS:
        return dict(PRESETS[name])
    base, _, suffix = name.rpartition("-")
    if base in PRESETS and suffix in METHOD_SUFFIXES:
        return {**PRESETS[base], "method": METHOD_SUFFIXES[suffix], "methods": ""}
    raise CliError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


def resolve_config(overrides: dict) -> ExperimentConfig:
    """Fill everything not given explicitly from the dataset recipe and the defaults."""
    values = ExperimentConfig().as_dict()
    dataset = overrides.get("dataset", values["dataset"])
    hidden = overrides.get("hidden", values["hidden"])
    try:
        r = tasks.recipe(dataset, _int_list(hidden, "hidden"))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    values.update(r.defaults)
    values.update({k: v for k, v in r.device_kwargs().items()})
    values["ppm_dim"] = r.ppm_dim or 0
    values.update(overrides)
    cfg = ExperimentConfig.from_dict(values)
    try:
        cfg.train.validate()
    except tr.ConfigError as exc:
        raise CliError(str(exc)) from None
    if cfg.mode not in hw.MODES:
        raise CliError(f"mode must be one of {hw.MODES}, got {cfg.mode!r}")
    for m in cfg.method_list():
        if m not in tr.METHODS:
            raise CliError(f"unknown method {m!r} in 'methods'")
    return cfg


def gather_overrides(args) -> dict:
    values = {}
    if getattr(args, "preset", None):
        values.update(preset(args.preset))
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config_text(text, str(path)))
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise CliError(f"--set expects key=value, got {pair!r}")
        key, value = (s.strip() for s in pair.split("=", 1))
        if key not in ExperimentConfig.keys():
            raise CliError(f"unknown config key {key!r}")
        values[key] = parse_value(key, value)
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return values


# -- shared plumbing ---------------------------------------------------------------


def _load_task(cfg: ExperimentConfig) -> tasks.Task:
    root = cfg.data_dir or None
    try:
        if cfg.dataset in ("iris2", "iris3"):
            loader = tasks.iris2 if cfg.dataset == "iris2" else tasks.iris3
            task = loader(cfg.split_seed, cfg.iris_path or None)
        elif cfg.dataset == "digits4":
            task = tasks.digits4(root, seed=cfg.split_seed)
        else:
            task = tasks.mnist_family(cfg.dataset, root, cfg.hidden_sizes(), cfg.train_per_class,
                                      cfg.test_per_class, cfg.split_seed)
    except FileNotFoundError as exc:
        hint = "" if DATA_DIR_ENV in str(exc) else f" (check {DATA_DIR_ENV} or data_dir)"
        raise CliError(f"dataset files missing: {exc}{hint}", EXIT_DATA) from None
    except (DataFormatError, DataConsistencyError) as exc:
        raise CliError(f"dataset unreadable: {exc}", EXIT_DATA) from None
    return task


def _device(cfg: ExperimentConfig, spec, seed: int | None = None) -> hw.DeviceModel:
    if cfg.device_file and seed is None:
        return _load_device(cfg.device_file, spec)
    try:
        return hw.sample_device(cfg.device_seed if seed is None else seed, spec, cfg.sigma_level, **cfg.device_kwargs())
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _load_device(path, spec) -> hw.DeviceModel:
    try:
        device = hw.load_device(path)
    except FileNotFoundError:
        raise CliError(f"device file not found: {path}", EXIT_INCOMPATIBLE) from None
    except (ValueError, OSError) as exc:
        raise CliError(f"device file {path}: {exc}", EXIT_INCOMPATIBLE) from None
    if [layer.shape for layer in device.layers] != spec.shapes():
        raise CliError(f"device {path} was sampled for a different network than {list(spec.layer_sizes)}",
                       EXIT_INCOMPATIBLE)
    return device


def _write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _summary(base: dict, cfg: ExperimentConfig, started: float) -> dict:
    # wall-clock is the only run-to-run varying field and sits on its own line
    return {**base, "dataset": cfg.dataset, "wall_clock_s": round(time.perf_counter() - started, 3)}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_one(cfg: ExperimentConfig, task: tasks.Task, method: str, out: Path, trace=None) -> dict:
    started = time.perf_counter()
    steps = math.ceil(len(task.train_set) / cfg.train.batch_size)
    tcfg = cfg.train_config(method, steps)
    device = None if method == "ideal_bp" else _device(cfg, task.spec)
    report = tr.train(tcfg, task.spec, device, task.train_set, task.test_set,
                      record_trace=cfg.record_trace and method == "ideal_bp", trace=trace)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "metrics.csv")
    if cfg.save_device and device is not None:
        hw.save_device(out / "device.asytdev", device)
    if report.trace is not None:
        report.trace.save(out / "trace.asyttrc")
    summary = _summary(report.summary(), cfg, started)
    _write_json(out / "summary.json", summary)
    return summary


# -- commands ------------------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(args)
    task = _load_task(cfg)
    methods = cfg.method_list()
    atomic_write_text(out / "config.txt", config_to_text(cfg))
    if len(methods) == 1:
        s = _train_one(cfg, task, methods[0], out)
        print(_line(s))
        return 0
    for m in methods:
        s = _train_one(cfg, task, m, out / m)
        print(_line(s))
    return 0


def _line(s: dict) -> str:
    return (f"{s['method']}: train {s['final_train_acc']:.4f} test {s['final_test_acc']:.4f} "
            f"epochs {s['epochs']} device {s['device_hash'][:12] or '-'}")


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    task = _load_task(cfg)
    methods = tuple(s.strip() for s in cfg.sweep_methods.split(",") if s.strip())
    for m in methods:
        if m not in tr.METHODS:
            raise CliError(f"unknown method {m!r} in 'sweep_methods'")
    tcfg = cfg.train_config()
    kw = dict(methods=methods, device_seed=cfg.device_seed, device_kwargs=cfg.device_kwargs(), workers=cfg.workers)
    n_in, n_out = task.spec.layer_sizes[0], task.spec.layer_sizes[-1]
    try:
        if cfg.sweep == "sigma":
            rows = dg.distortion_sweep(_float_list(cfg.sweep_values, "sweep_values"), tcfg, task.spec,
                                       task.train_set, task.test_set, **kw)
        elif cfg.sweep == "width":
            rows = dg.width_sweep(_int_list(cfg.sweep_values, "sweep_values"), tcfg, n_in, n_out, task.train_set,
                                  task.test_set, sigma_level=cfg.sigma_level,
                                  hidden_activation=task.spec.hidden_activation, **kw)
        elif cfg.sweep == "depth":
            rows = dg.depth_sweep(_int_list(cfg.sweep_values, "sweep_values"), tcfg, n_in, n_out, task.train_set,
                                  task.test_set, width=cfg.sweep_width, sigma_level=cfg.sigma_level,
                                  hidden_activation=task.spec.hidden_activation, **kw)
        else:
            raise CliError(f"sweep must be one of {SWEEP_AXES}, got {cfg.sweep!r}")
    except ValueError as exc:
        raise CliError(str(exc)) from None
    dg.write_sweep_csv(out / "sweep.csv", rows)
    atomic_write_text(out / "config.txt", config_to_text(cfg))
    _write_json(out / "summary.json", _summary({"sweep": cfg.sweep, "rows": len(rows), "methods": list(methods),
                                               "seed": cfg.train.seed}, cfg, started))
    sys.stdout.write(dg.sweep_csv_text(rows))
    return 0


def _load_trace(path):
    try:
        return tr.load_trace(path)
    except FileNotFoundError:
        raise CliError(f"trace file not found: {path}", EXIT_INCOMPATIBLE) from None
    except (ValueError, OSError) as exc:
        raise CliError(f"trace file {path}: {exc}", EXIT_INCOMPATIBLE) from None


def cmd_record_trace(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    task = _load_task(cfg)
    trace = tr.record_trace(cfg.train_config("asyt"), task.spec, task.train_set)
    path = out / "trace.asyttrc"
    trace.save(path)
    h = trace.header
    _write_json(out / "summary.json", _summary({
        "steps": len(trace), "seed": cfg.train.seed, "spec": list(task.spec.layer_sizes),
        "spec_digest": h.spec_digest, "init_digest": h.init_digest, "batch_digest": h.batch_digest,
        "trace": path.name,
    }, cfg, started))
    print(f"recorded {len(trace)} steps to {path}")
    return 0


def cmd_replay(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(args)
    started = time.perf_counter()
    task = _load_task(cfg)
    steps = math.ceil(len(task.train_set) / cfg.train.batch_size)
    tcfg = cfg.train_config("asyt", steps)
    trace_path = args.trace or cfg.trace
    if trace_path:
        trace = _load_trace(trace_path)
    else:
        trace = tr.record_trace(tcfg, task.spec, task.train_set)
        trace_path = out / "trace.asyttrc"
        trace.save(trace_path)
    try:
        tr.check_trace(trace, tcfg, task.spec, task.train_set)
    except tr.TraceCompatibilityError as exc:
        raise CliError(f"trace header mismatch: {exc}", EXIT_INCOMPATIBLE) from None

    device_paths = list(args.devices or []) or [s.strip() for s in cfg.devices.split(",") if s.strip()]
    if device_paths:
        fleet = [(Path(p).stem, _load_device(p, task.spec)) for p in device_paths]
    else:
        fleet = [(f"device{i}", _device(cfg, task.spec, cfg.device_seed + i)) for i in range(cfg.fleet_size)]

    per_device = []
    total_backprops = 0
    for name, device in fleet:
        run_started = time.perf_counter()
        report = tr.train(tcfg, task.spec, device, task.train_set, task.test_set, trace=trace)
        total_backprops += report.counters.digital_backprops
        entry = {**report.summary(), "device": name}
        if cfg.live_compare:
            live = tr.train(tcfg, task.spec, device, task.train_set, task.test_set)
            entry["live_test_acc"] = live.final("test")
            entry["live_train_acc"] = live.final("train")
        report.write_csv(out / name / "metrics.csv")
        _write_json(out / name / "summary.json", _summary(entry, cfg, run_started))
        per_device.append(entry)
        print(f"{name}: replay test {entry['final_test_acc']:.4f}"
              + (f" live test {entry['live_test_acc']:.4f}" if cfg.live_compare else ""))
    _write_json(out / "summary.json", _summary({
        "method": "asyt", "seed": cfg.train.seed, "spec": list(task.spec.layer_sizes), "trace": str(trace_path),
        "trace_steps": len(trace), "devices": per_device, "digital_backprops": total_backprops,
    }, cfg, started))
    print(f"digital_backprops {total_backprops}")
    return 0


def cmd_cost(cfg: ExperimentConfig, args) -> int:
    m, p, n = cfg.m, cfg.p, cfg.n
    if not (m and p and n):
        inp = dg.CostModelInput.for_spec(cfg.recipe().spec)
        m, p, n = m or inp.m, p or inp.p, n or inp.n
    try:
        rows = dg.cost_table(m, p, n, cfg.p_photonic, cfg.t_interface, cfg.t_prop)
    except (dg.TopologyError, ValueError) as exc:
        raise CliError(str(exc)) from None
    lines = [f"M={m} P={p} N={n} p_photonic={cfg.p_photonic!r} t_interface={cfg.t_interface!r} t_prop={cfg.t_prop!r}",
             f"{'mode':<14}{'accesses':>10}{'timesteps':>11}{'t_extract_s':>14}{'energy_j':>14}"]
    for r in rows:
        lines.append(f"{r['mode']:<14}{r['accesses']:>10}{r['timesteps']:>11}{r['t_extract_s']:>14.6g}{r['energy_j']:>14.6g}")
    print("\n".join(lines))
    if args.out:
        out = _out_dir(args)
        _write_json(out / "cost.json", {"m": m, "p": p, "n": n, "rows": rows})
    return 0


def cmd_sample_device(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(args)
    spec = cfg.recipe().spec
    device = _device(cfg, spec)
    path = out / "device.asytdev"
    hw.save_device(path, device)
    info = {"device_hash": device.digest(), "device_seed": cfg.device_seed, "sigma_level": cfg.sigma_level,
            "spec": list(spec.layer_sizes), "mode": device.mode, "snr_db": device.snr_db, "file": path.name}
    _write_json(out / "device.json", info)
    print(f"{path} {info['device_hash']}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "replay": cmd_replay,
    "cost": cmd_cost,
    "record-trace": cmd_record_trace,
    "sample-device": cmd_sample_device,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asyt", description="Asymmetrical training of emulated photonic networks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value experiment file")
    common.add_argument("--preset", metavar="NAME", help="named experiment; '<preset>-<method>' fixes the method")
    common.add_argument("--seed", type=int, metavar="N", help="training seed")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "sweep", "record-trace", "sample-device"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--out", metavar="DIR", default=f"asyt-{name}")
    p = sub.add_parser("replay", parents=[common])
    p.add_argument("--out", metavar="DIR", default="asyt-replay")
    p.add_argument("--trace", metavar="PATH", help="recorded trace; recorded on the fly when omitted")
    p.add_argument("devices", nargs="*", metavar="DEVICE", help="device files; sampled fleet when omitted")
    p = sub.add_parser("cost", parents=[common])
    p.add_argument("--out", metavar="DIR")
    p.add_argument("-M", type=int, dest="cost_m", help="neurons in all non-input layers")
    p.add_argument("-P", type=int, dest="cost_p", help="output neurons")
    p.add_argument("-N", type=int, dest="cost_n", help="hidden layers")
    p.add_argument("--p-photonic", type=float)
    p.add_argument("--t-interface", type=float)
    p.add_argument("--t-prop", type=float)
    sub.add_parser("presets", help="list preset names")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name, values in PRESETS.items():
            print(f"{name}: " + ", ".join(f"{k}={format_value(v)}" for k, v in values.items()))
        return 0
    try:
        overrides = gather_overrides(args)
        if args.command == "cost":
            for flag, key in (("cost_m", "m"), ("cost_p", "p"), ("cost_n", "n"), ("p_photonic", "p_photonic"),
                              ("t_interface", "t_interface"), ("t_prop", "t_prop")):
                if getattr(args, flag) is not None:
                    overrides[key] = getattr(args, flag)
        cfg = resolve_config(overrides)
        return COMMANDS[args.command](cfg, args)
    except CliError as exc:
        print(f"asyt: error: {exc}", file=sys.stderr)
        return exc.code
    except tr.TraceCompatibilityError as exc:
        print(f"asyt: error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (tr.ConfigError, DimensionError) as exc:
        print(f"asyt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
