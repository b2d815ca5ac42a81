"""MNIST-family stress test: AsyT against physics-aware training under readout noise or a mid-run jolt.

Needs IDX files under $ASYT_DATA_DIR/mnist (or pass a directory as the first argument).
Run: python3 demos/05_mnist_stress.py [data_dir] [noise|perturb]   (a few minutes)
"""

import sys

from asyt import cli

data_dir = sys.argv[1] if len(sys.argv) > 1 else ""
scenario = sys.argv[2] if len(sys.argv) > 2 else "noise"
argv = ["train", "--preset", f"stress-{scenario}", "--out", f"demo-stress-{scenario}"]
if data_dir:
    argv += ["--set", f"data_dir={data_dir}"]
sys.exit(cli.main(argv))
