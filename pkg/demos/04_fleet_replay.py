"""Record the digital updates once, then train several distinct devices from the stored trace.

Run: python3 demos/04_fleet_replay.py
"""

import tempfile
from pathlib import Path

from asyt import hardware as hw
from asyt import tasks
from asyt import trainer as tr

task = tasks.iris3()
cfg = tr.TrainConfig(seed=0, **task.defaults)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "iris3.asyttrc"
    tr.record_trace(cfg, task.spec, task.train_set).save(path)
    trace = tr.load_trace(path)
    print(f"trace: {len(trace)} steps, {path.stat().st_size} bytes")

    for seed in range(100, 105):
        device = hw.sample_device(seed, task.spec, 1.0, **task.device_kwargs())
        replay = tr.replay_train(trace, device, cfg, task.spec, task.train_set, task.test_set)
        live = tr.train(cfg, task.spec, device, task.train_set, task.test_set)
        print(f"device {seed}: replay test {replay.final():.3f}, live test {live.final():.3f}, "
              f"digital backprops during replay {replay.counters.digital_backprops}, "
              f"same parameters {replay.params_phy.digest() == live.params_phy.digest()}")
