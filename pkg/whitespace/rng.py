"""
Seeded random number generators.

All stochastic code draws from numpy's Philox-4x64 counter-based bit
generator, keyed by SeedSequence([seed, stage]). One user seed therefore
drives every pipeline stage without the stages sharing a stream.
"""
import numpy as np

# Stage indices for derived streams
STAGE_DIRECT = 0
STAGE_MMPP = 1
STAGE_PARETO = 2
STAGE_RANDOM_ACCESS = 3
STAGE_CALIBRATION = 4


def make_rng(seed: int, stage: int = STAGE_DIRECT, *extra: int) -> np.random.Generator:
    """Returns a Philox generator for (seed, stage, *extra)."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence([int(seed), int(stage), *[int(e) for e in extra]])
    return np.random.Generator(np.random.Philox(sequence))
