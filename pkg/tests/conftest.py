import numpy as np
import pytest

from asyt import data

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mnist_subset_root(tmp_path_factory):
    """Data root holding the 5000-digit MNIST sample shipped with mlxtend as IDX files.

    A fixed permutation puts 4000 digits in the train split and 1000 in the test split.
    """
    mlxtend_data = pytest.importorskip("mlxtend.data")
    x, y = mlxtend_data.mnist_data()
    order = np.random.default_rng(0).permutation(len(x))
    images = x.reshape(-1, 28, 28).astype(np.uint8)[order]
    labels = y.astype(np.uint8)[order]
    root = tmp_path_factory.mktemp("mnist_subset")
    for prefix, sl in (("train", slice(0, 4000)), ("t10k", slice(4000, None))):
        data.write_idx(root / "mnist" / f"{prefix}-images-idx3-ubyte", root / "mnist" / f"{prefix}-labels-idx1-ubyte",
                       images[sl], labels[sl])
    return root
