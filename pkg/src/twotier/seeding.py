"""Seed-splitting scheme.

Every random draw in the package flows from a single master seed.  Each
component XORs the master seed with its own fixed 64-bit tag and feeds the
result to an independent generator, so adding draws to one component never
perturbs another.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1

# Component tags.  Arbitrary fixed constants; never reuse one.
TAG_FEATURE_MAP = 0x9E37_79B9_7F4A_7C15
TAG_TASK_STREAM = 0x5851_F42D_4C95_7F2D
TAG_TRAIN_SHUFFLE = 0x14057_B7EF_767_814F & _MASK
TAG_HEAD_INIT = 0x2545_F491_4F6C_DD1D
TAG_FISHER = 0x27BB_2EE6_87B0_B0FD


def component_seed(master_seed: int, tag: int) -> int:
    """Sub-seed for one component: master XOR tag, folded to 64 bits."""
    return (int(master_seed) ^ int(tag)) & _MASK


def component_rng(master_seed: int, tag: int) -> np.random.Generator:
    """Fresh generator for one component of a run."""
    return np.random.default_rng(component_seed(master_seed, tag))
