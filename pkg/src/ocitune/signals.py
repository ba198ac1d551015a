"""Excitation and noise generation for the simulated experiments.

PRBS channels come from independent 7-bit maximal-length LFSRs with taps
[7, 6] (period 127); each channel's register is seeded from the master seed
so golden data files are reproducible bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPSD, ZeroNoiseVariance
from .transfer import TransferMatrix

__all__ = ["DataBatch", "prbs", "gaussian_noise", "shape_noise", "snr_db"]

_LFSR_BITS = 7
_LFSR_PERIOD = 127


@dataclass
class DataBatch:
    """Closed-loop record: reference, plant input, and plant output series."""

    r: np.ndarray
    u: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.atleast_2d(np.asarray(self.r, dtype=float))
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if not (self.r.shape == self.u.shape == self.y.shape):
            raise ValueError("r, u, y must share one (channels, samples) shape")

    @property
    def n(self) -> int:
        return self.r.shape[0]

    @property
    def length(self) -> int:
        return self.r.shape[1]


def _lfsr_stream(state: int, nbits: int) -> np.ndarray:
    """Fibonacci LFSR over x^7 + x^6 + 1 (primitive, period 127).

    The register shifts right with the feedback entering at the top, so
    stages 7 and 6 are the two lowest bits.
    """
    out = np.empty(nbits, dtype=np.int8)
    s = state & (2 ** _LFSR_BITS - 1)
    if s == 0:
        raise ValueError("LFSR state must be nonzero")
    for i in range(nbits):
        out[i] = s & 1
        fb = (s ^ (s >> 1)) & 1
        s = (s >> 1) | (fb << (_LFSR_BITS - 1))
    return out


def prbs(channels: int, amplitude: float, hold: int, length: int, seed: int) -> np.ndarray:
    """Per-channel PRBS of +/-amplitude, each bit held ``hold`` samples."""
    if hold < 1:
        raise ValueError("hold must be >= 1")
    if length < 1:
        raise ValueError("length must be >= 1")
    words = np.random.SeedSequence(seed).generate_state(channels, dtype=np.uint64)
    nbits = -(-length // hold)
    out = np.empty((channels, length))
    for ch in range(channels):
        state = int(words[ch] % _LFSR_PERIOD) + 1
        bits = _lfsr_stream(state, nbits)
        levels = np.where(bits > 0, amplitude, -amplitude)
        out[ch] = np.repeat(levels, hold)[:length]
    return out


def gaussian_noise(lam: np.ndarray, length: int, seed: int) -> np.ndarray:
    """i.i.d. Gaussian vectors with covariance ``lam`` (PSD factorization
    through the symmetric eigendecomposition, so a zero matrix is allowed)."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    n = lam.shape[0]
    if lam.shape != (n, n) or not np.allclose(lam, lam.T, atol=1e-12):
        raise NonPSD("covariance must be square and symmetric")
    vals, vecs = np.linalg.eigh(lam)
    if np.min(vals) < -1e-12 * max(1.0, np.max(np.abs(vals))):
        raise NonPSD(f"covariance has a negative eigenvalue {np.min(vals):g}")
    factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    white = rng.standard_normal((n, length))
    return factor.dot(white)


def shape_noise(h0: TransferMatrix, w: np.ndarray) -> np.ndarray:
    """Color white noise through the noise model: v = H0 w."""
    return h0.simulate(w)


def snr_db(signal: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Per-channel 10 log10(var(signal)/var(noise))."""
    signal = np.atleast_2d(np.asarray(signal, dtype=float))
    noise = np.atleast_2d(np.asarray(noise, dtype=float))
    vs = np.var(signal, axis=1)
    vn = np.var(noise, axis=1)
    if np.any(vn == 0.0):
        raise ZeroNoiseVariance("noise series has zero variance")
    return 10.0 * np.log10(vs / vn)
