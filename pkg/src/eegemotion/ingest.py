"""EEGT tensor files, ratings CSVs and the seeded synthetic-EEG generator.

EEGT layout (little-endian)::

    0-3    b"EEGT"
    4-7    version (u32, currently 1)
    8-11   n_trials (u32)
    12-15  n_channels (u32)
    16-19  n_samples (u32)
    20-23  subject_id (u32)
    24-31  sample_rate_hz (f64)
    32-    n_trials * n_channels * n_samples float32, trial-major
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ChannelLayout, Ratings, TrialTensor, default_channel_layout
from .errors import ConfigError, CorruptionError, FormatError, ValidationError

MAGIC = b"EEGT"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIId")
HEADER_SIZE = _HEADER.size  # 32


@dataclass(frozen=True)
class TensorFileHeader:
    magic: bytes
    version: int
    n_trials: int
    n_channels: int
    n_samples: int
    sample_rate_hz: float
    subject_id: int

    @property
    def payload_bytes(self) -> int:
        return 4 * self.n_trials * self.n_channels * self.n_samples


def read_header(buf: bytes) -> TensorFileHeader:
    if len(buf) < HEADER_SIZE:
        raise FormatError(f"file too short for EEGT header ({len(buf)} bytes)")
    magic, version, nt, nc, ns, subject, fs = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported EEGT version {version}")
    if min(nt, nc, ns) < 1:
        raise FormatError("EEGT dimensions must be >= 1")
    return TensorFileHeader(magic, version, nt, nc, ns, fs, subject)


def read_tensor(path, layout: ChannelLayout | None = None) -> TrialTensor:
    buf = Path(path).read_bytes()
    h = read_header(buf)
    actual = len(buf) - HEADER_SIZE
    if actual != h.payload_bytes:
        raise CorruptionError(h.payload_bytes, actual, path)
    data = np.frombuffer(buf, dtype="<f4", offset=HEADER_SIZE)
    data = data.reshape(h.n_trials, h.n_channels, h.n_samples).astype(np.float64)
    return TrialTensor(h.subject_id, data, h.sample_rate_hz, layout or default_channel_layout())


def write_tensor(tensor: TrialTensor, path) -> None:
    path = Path(path)
    if not str(path) or str(path) == ".":
        raise FileNotFoundError("empty output path")
    nt, nc, ns = tensor.data.shape
    header = _HEADER.pack(MAGIC, VERSION, nt, nc, ns, tensor.subject_id, tensor.sample_rate_hz)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())


def read_ratings(path) -> Ratings:
    """Load ``trial,valence,arousal`` rows; trials must cover 0..n-1 exactly."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["trial", "valence", "arousal"]:
            raise ValidationError(f"{path}: header must be 'trial,valence,arousal'")
        for lineno, row in enumerate(reader, 2):
            try:
                trial = int(row["trial"])
                v, a = float(row["valence"]), float(row["arousal"])
            except (TypeError, ValueError):
                raise ValidationError(f"{path}:{lineno}: malformed row {row}") from None
            for name, value in (("valence", v), ("arousal", a)):
                if not 1 <= value <= 9:
                    raise ValidationError(f"{path}:{lineno}: {name} {value} outside [1, 9]")
            if trial in rows:
                raise ValidationError(f"{path}:{lineno}: duplicate trial {trial}")
            rows[trial] = (v, a)
    if not rows:
        raise ValidationError(f"{path}: no ratings")
    missing = sorted(set(range(len(rows))) - set(rows))
    if missing:
        raise ValidationError(f"{path}: missing trial {missing[0]}")
    ordered = [rows[i] for i in range(len(rows))]
    return Ratings([r[0] for r in ordered], [r[1] for r in ordered])


def write_ratings(ratings: Ratings, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "valence", "arousal"])
        for i, (v, a) in enumerate(zip(ratings.valence, ratings.arousal)):
            w.writerow([i, repr(float(v)), repr(float(a))])


@dataclass(frozen=True)
class SyntheticBand:
    name: str
    low_hz: float
    high_hz: float
    amplitude: float
    center_hz: float


def _default_bands():
    return (
        SyntheticBand("Theta", 4, 8, 4.0, 6.0),
        SyntheticBand("Alpha", 8, 16, 5.0, 10.0),
        SyntheticBand("Beta", 16, 32, 3.0, 20.0),
        SyntheticBand("Gamma", 32, 64, 1.5, 36.0),
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """Sum of one sinusoid per band plus white Gaussian noise.

    Trials flagged high-valence (high-arousal) get the amplitude of
    ``valence_band`` (``arousal_band``) multiplied by the matching gain, so
    the median split of the generated ratings recovers the planted flags.
    Set a band to ``None`` or its gain to 1 to plant nothing.
    """

    bands: tuple[SyntheticBand, ...] = field(default_factory=_default_bands)
    noise_sigma: float = 2.0
    valence_band: str | None = "Alpha"
    valence_gain: float = 2.5
    arousal_band: str | None = "Beta"
    arousal_gain: float = 2.5
    rng_seed: int = 0

    def __post_init__(self):
        names = [b.name for b in self.bands]
        for b in self.bands:
            if not b.low_hz <= b.center_hz < b.high_hz:
                raise ConfigError(f"{b.name}: center {b.center_hz} Hz outside [{b.low_hz}, {b.high_hz})")
            if b.amplitude < 0:
                raise ConfigError(f"{b.name}: negative amplitude")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        for which in (self.valence_band, self.arousal_band):
            if which is not None and which not in names:
                raise ConfigError(f"label band {which!r} not among {names}")
        if self.valence_gain <= 0 or self.arousal_gain <= 0:
            raise ConfigError("label gains must be positive")

    @classmethod
    def single_band(cls, name="Alpha", amplitude=10.0, center_hz=10.0, noise_sigma=0.0, rng_seed=0):
        """Only ``name`` is active; no labels are planted."""
        bands = tuple(
            SyntheticBand(b.name, b.low_hz, b.high_hz, amplitude if b.name == name else 0.0,
                          center_hz if b.name == name else b.center_hz)
            for b in _default_bands()
        )
        return cls(bands, noise_sigma, None, 1.0, None, 1.0, rng_seed)


def _planted_ratings(rng, n_trials):
    """Ratings whose median split puts exactly the returned mask on the high side."""
    n_high = math.ceil(n_trials / 2)
    high = np.zeros(n_trials, dtype=bool)
    high[rng.permutation(n_trials)[:n_high]] = True
    values = np.where(high, rng.uniform(5.5, 9.0, n_trials), rng.uniform(1.0, 4.5, n_trials))
    return np.round(values, 3), high


def generate_synthetic(spec: SyntheticSpec, n_trials=40, n_channels=32, n_samples=8064, fs=128.0,
                       subject_id=1):
    """Deterministic synthetic subject: ``(TrialTensor, Ratings)``."""
    if min(n_trials, n_channels, n_samples) < 1:
        raise ConfigError("dimensions must be >= 1")
    max_center = max(b.center_hz for b in spec.bands)
    if not fs > 2 * max_center:
        raise ConfigError(f"sample rate {fs} Hz violates Nyquist for a {max_center} Hz component")

    rng = np.random.default_rng(spec.rng_seed)
    valence, v_high = _planted_ratings(rng, n_trials)
    arousal, a_high = _planted_ratings(rng, n_trials)
    phases = rng.uniform(0, 2 * np.pi, size=(n_trials, n_channels, len(spec.bands)))
    t = np.arange(n_samples) / fs

    data = np.zeros((n_trials, n_channels, n_samples))
    for j, b in enumerate(spec.bands):
        amp = np.full(n_trials, b.amplitude)
        if b.name == spec.valence_band:
            amp = np.where(v_high, amp * spec.valence_gain, amp)
        if b.name == spec.arousal_band:
            amp = np.where(a_high, amp * spec.arousal_gain, amp)
        if not amp.any():
            continue
        data += amp[:, None, None] * np.sin(2 * np.pi * b.center_hz * t + phases[:, :, j, None])
    if spec.noise_sigma > 0:
        data += rng.normal(0.0, spec.noise_sigma, size=data.shape)
    # round-trip through the f32 file format leaves these values unchanged
    data = data.astype(np.float32).astype(np.float64)
    return TrialTensor(subject_id, data, fs), Ratings(valence, arousal)
