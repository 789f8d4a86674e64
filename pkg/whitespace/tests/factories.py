"""
Synthetic traces shared by the test modules.
"""
import numpy as np

from whitespace.mmpp import Mmpp2Params, generate_trace
from whitespace.rng import make_rng
from whitespace.trace_io import PacketTrace, write_trace

# Dense regime: 5 ms mean IAT, sparse regime: 100 ms; each regime lasts 20 s on average
TWO_REGIME = Mmpp2Params(lambda1_per_ms=0.2, lambda2_per_ms=0.01, r1_per_ms=1 / 20000.0, r2_per_ms=1 / 20000.0)

# Regimes lasting 30 s with T = 5 s slots
SLOW_REGIME = Mmpp2Params(lambda1_per_ms=0.2, lambda2_per_ms=0.01, r1_per_ms=1 / 30000.0, r2_per_ms=1 / 30000.0)

# Regimes lasting 2 s: a few seconds of traffic already mixes both
FAST_SWITCHING = Mmpp2Params(lambda1_per_ms=0.2, lambda2_per_ms=0.02, r1_per_ms=1 / 2000.0, r2_per_ms=1 / 2000.0)


def trace_from_ms(times_ms, channel=1) -> PacketTrace:
    times_us = np.rint(np.asarray(times_ms, dtype=float) * 1000.0).astype(np.int64)
    return PacketTrace.from_arrays(times_us, np.full(times_us.shape, channel))


def periodic_trace(iat_ms: float, duration_s: float, start_ms: float = 0.0, channel=1) -> PacketTrace:
    return trace_from_ms(np.arange(start_ms, start_ms + duration_s * 1000.0, iat_ms), channel)


def jittered_trace(iat_ms: float, jitter_ms: float, duration_s: float, seed: int = 0) -> PacketTrace:
    """Near-periodic arrivals; C is far below 1/sqrt(2)."""
    n = int(duration_s * 1000.0 / iat_ms)
    gaps = iat_ms + make_rng(seed).uniform(-jitter_ms, jitter_ms, n)
    return trace_from_ms(np.cumsum(gaps), channel=1)


def two_regime_trace(duration_s: float, seed: int = 0, params: Mmpp2Params = TWO_REGIME) -> PacketTrace:
    return generate_trace(params, duration_s * 1000.0, seed)


def write_channel_split(trace: PacketTrace, directory) -> list:
    """Splits a trace over channels 1 and 6 (alternate records) and writes one CSV per channel."""
    paths = []
    for offset, channel in ((0, 1), (1, 6)):
        part = PacketTrace.from_arrays(trace.timestamps_us[offset::2],
                                       np.full(trace.timestamps_us[offset::2].shape, channel))
        path = f"{directory}/ch{channel}.csv"
        write_trace(part, path)
        paths.append(path)
    return paths


def block_trace(cycles: int, dense_ms: float = 5.0, sparse_ms: float = 100.0, block_s: float = 60.0) -> PacketTrace:
    """Strictly periodic dense and sparse blocks of block_s seconds each, dense first."""
    block_ms = block_s * 1000.0
    blocks = []
    for cycle in range(cycles):
        t0 = 2 * cycle * block_ms
        blocks.append(np.arange(t0, t0 + block_ms, dense_ms))
        blocks.append(np.arange(t0 + block_ms, t0 + 2 * block_ms, sparse_ms))
    return trace_from_ms(np.concatenate(blocks))
