"""Deterministic random-stream derivation.

Every random draw in the package comes from a generator built here. A run is
identified by one master seed; each component draws from an independent
substream keyed by a fixed stream id plus optional indices (typically the task
number). The scheme is

    Generator(PCG64(SeedSequence([master, stream_id, *indices])))

so replaying a single task in isolation reproduces exactly the draws it saw in
the full run, and no component's consumption perturbs another's.

Stream ids (fixed, part of the trace-reproducibility contract):

====================  ===========================================
``STREAM_SUPPORT``    true-support subset of a synthetic environment
``STREAM_COEFF``      per-task reward-function coefficients
``STREAM_NOISE``      per-task observation noise
``STREAM_EXPLORE``    per-task uniform exploration draws
====================  ===========================================
"""

from __future__ import annotations

import numpy as np

STREAM_SUPPORT = 1
STREAM_COEFF = 2
STREAM_NOISE = 3
STREAM_EXPLORE = 4


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for one substream of a master seed.

    Parameters
    ----------
    master_seed : int
        Nonnegative master seed of the run.
    *path : int
        Stream id followed by any indices (e.g. the 1-based task number).
    """
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    entropy = [int(master_seed)] + [int(x) for x in path]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
