"""FFT, Hamming window, Welch periodogram and band-power integration.

All routines operate along the last axis, so a whole trial
(channels x samples) or a stack of windows can be transformed in one call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import RangeError, SizeError


def _check_pow2(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise SizeError(f"FFT length must be a power of two >= 2, got {n}")


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(size: int, sign: int) -> np.ndarray:
    k = np.arange(size // 2)
    return np.exp(sign * 2j * np.pi * k / size)


def _radix2(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    _check_pow2(n)
    lead = x.shape[:-1]
    out = x[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(*lead, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(size, sign)
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(*lead, n)
        size *= 2
    return out


def fft(signal) -> np.ndarray:
    """Iterative radix-2 decimation-in-time DFT along the last axis.

    ``X[k] = sum_n x[n] exp(-2j pi k n / N)``; bin ``k`` sits at ``k * fs / N`` Hz.
    Raises :class:`SizeError` unless ``N`` is a power of two.
    """
    return _radix2(np.asarray(signal, dtype=np.complex128), -1)


def rfft(signal) -> np.ndarray:
    """Bins ``0..N/2`` of the DFT of a real signal.

    Even and odd samples are packed into one complex sequence of length
    N/2, transformed, and split apart again.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[-1]
    _check_pow2(n)
    if n == 2:
        return np.stack((x[..., 0] + x[..., 1], x[..., 0] - x[..., 1]), axis=-1).astype(np.complex128)
    half = n // 2
    z = _radix2(x[..., 0::2] + 1j * x[..., 1::2], -1)
    zk = np.concatenate((z, z[..., :1]), axis=-1)  # Z[0..N/2], periodic
    zr = np.conj(zk[..., ::-1])  # conj(Z[N/2 - k])
    even = 0.5 * (zk + zr)
    odd = -0.5j * (zk - zr)
    return even + np.exp(-2j * np.pi * np.arange(half + 1) / n) * odd


def ifft(spectrum) -> np.ndarray:
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    return _radix2(spectrum, +1) / spectrum.shape[-1]


def fft_freqs(n: int, fs: float) -> np.ndarray:
    return np.arange(n) * (fs / n)


def hamming_window(m: int) -> np.ndarray:
    """``0.54 - 0.46 cos(2 pi n / M)`` for ``n = 0..M-1``.

    The denominator is M, not the textbook M - 1, so the taper is the
    periodic variant (``w[0] = 0.08``, ``w[M/2] = 1``).
    """
    if m < 2:
        raise SizeError(f"window length must be >= 2, got {m}")
    n = np.arange(m)
    return 0.54 - 0.46 * np.cos(2 * np.pi * n / m)


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided PSD in µV²/Hz; ``power`` may carry leading batch axes."""

    freqs_hz: np.ndarray
    power: np.ndarray
    segment_len: int
    n_segments: int
    window_energy: float
    fs: float

    @property
    def df(self) -> float:
        return self.fs / self.segment_len


def segment_step(m: int, overlap: float) -> int:
    if not 0 <= overlap < 1:
        raise RangeError(f"overlap must lie in [0, 1), got {overlap}")
    return max(1, int(round(m * (1 - overlap))))


def n_segments(n_samples: int, m: int, overlap: float) -> int:
    if n_samples < m:
        raise SizeError(f"signal of {n_samples} samples is shorter than segment length {m}")
    return (n_samples - m) // segment_step(m, overlap) + 1


def segment_periodograms(signal, fs: float, m: int = 256, overlap: float = 0.5, window=None):
    """Windowed one-sided periodogram of every segment.

    Returns ``(freqs, P, window_energy)`` with ``P`` shaped
    ``(..., n_segments, m // 2 + 1)``. Trailing samples that do not fill a
    segment are dropped.
    """
    x = np.asarray(signal, dtype=np.float64)
    _check_pow2(m)
    n = x.shape[-1]
    step = segment_step(m, overlap)
    count = n_segments(n, m, overlap)
    w = hamming_window(m) if window is None else np.asarray(window, dtype=np.float64)
    if w.shape != (m,):
        raise SizeError(f"window must have length {m}")

    starts = np.arange(count) * step
    segments = x[..., starts[:, None] + np.arange(m)]
    energy = float(np.sum(w * w))
    spec = rfft(segments * w)
    p = (spec.real**2 + spec.imag**2) / (energy * fs)
    # fold negative frequencies into the interior bins; DC and Nyquist are unique
    p[..., 1 : m // 2] *= 2
    return fft_freqs(m, fs)[: m // 2 + 1], p, energy


def welch_psd(signal, fs: float, m: int = 256, overlap: float = 0.5, window=None) -> PsdEstimate:
    """Welch estimate: mean of the segment periodograms.

    Density normalisation ``1 / (fs * sum w^2)`` makes ``sum(power) * fs / m``
    equal the mean power of the windowed signal.
    """
    freqs, p, energy = segment_periodograms(signal, fs, m, overlap, window)
    return PsdEstimate(freqs, p.mean(axis=-2), m, p.shape[-2], energy, float(fs))


def band_mask(freqs, low: float, high: float) -> np.ndarray:
    return (freqs >= low) & (freqs < high)


def band_power(psd: PsdEstimate, band) -> np.ndarray | float:
    """Integrate ``psd`` over the half-open interval ``[low, high)``.

    ``band`` is a ``(low, high)`` pair or anything with ``low_hz``/``high_hz``.
    An interval containing no bins yields 0 and a ``RuntimeWarning``.
    """
    low, high = (band.low_hz, band.high_hz) if hasattr(band, "low_hz") else band
    if not 0 <= low < high <= psd.fs / 2:
        raise RangeError(f"band [{low}, {high}) outside [0, {psd.fs / 2}]")
    mask = band_mask(psd.freqs_hz, low, high)
    if not mask.any():
        warnings.warn(f"band [{low}, {high}) contains no frequency bins", RuntimeWarning, stacklevel=2)
    total = psd.power[..., mask].sum(axis=-1) * psd.df
    return float(total) if np.ndim(total) == 0 else total


def band_powers(freqs, power, bands, df: float) -> np.ndarray:
    """Band powers for every band in ``bands``, stacked on a new last axis."""
    return np.stack(
        [power[..., band_mask(freqs, b.low_hz, b.high_hz)].sum(axis=-1) * df for b in bands],
        axis=-1,
    )
