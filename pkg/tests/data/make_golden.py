"""Regenerate the golden MLP logits fixture (run from the repo root)."""

from pathlib import Path

import numpy as np

from resque.tensorio import write_tensor_file
from resque.trainer import ModelSpec, forward, init_params

HERE = Path(__file__).parent


def golden_inputs():
    return np.random.default_rng(2024).random((6, 8, 8, 1))


def golden_params():
    return init_params(ModelSpec("mlp", (8, 8, 1), 4, hidden=(16,)), seed=11)


if __name__ == "__main__":
    logits, _ = forward(golden_params(), golden_inputs())
    write_tensor_file(HERE / "mlp_logits.bin", logits.astype(np.float32))
