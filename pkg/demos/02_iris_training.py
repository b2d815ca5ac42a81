"""Three-class Iris on one distorted device: AsyT against the baselines, plus alignment angles.

Run: python3 demos/02_iris_training.py   (a few seconds per method)
"""

import numpy as np

from asyt import diagnostics as dg
from asyt import hardware as hw
from asyt import tasks
from asyt import trainer as tr

task = tasks.iris3()
device = hw.sample_device(100, task.spec, 1.0, **task.device_kwargs())
print(f"iris3 {list(task.spec.layer_sizes)}, {len(task.train_set)} train / {len(task.test_set)} test, "
      f"device {device.digest()[:12]}")

for method in ("ideal_bp", "asyt", "pseudo_ipbp", "in_silico_bp", "pat"):
    cfg = tr.TrainConfig(method=method, seed=0, **task.defaults)
    report = tr.train(cfg, task.spec, None if method == "ideal_bp" else device, task.train_set, task.test_set)
    s = report.summary()
    print(f"{method:>13}: train {s['final_train_acc']:.3f} test {s['final_test_acc']:.3f} "
          f"readouts per sample {s['access_per_sample']}")
    if method == "asyt":
        align = dg.AlignmentReport.from_report(report)

# the mixed update should stay inside 90 degrees of the digital one and tighten as training settles
print("\nalignment angle between pseudo and digital updates (deg):")
for lo, hi in ((0, 10), (50, 60), (190, 200)):
    print(f"  epochs {lo + 1:>3}-{hi}: {np.mean(align.angle_deg[lo:hi]):6.2f}")
