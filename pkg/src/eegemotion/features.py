"""Feature sets: sliding-window band-power meta-vectors and per-trial
regional band-power statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ELECTRODES, PipelineConfig, Region, TABLE_ONE_BANDS, TrialTensor, band_set
from .errors import ConfigError, SizeError, ValidationError
from .spectral import band_powers, segment_periodograms

STATISTICS = ("mean", "std", "min", "q1", "median", "q3", "max")
PROVENANCE_COLUMNS = ("subject", "trial", "window")


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    col_names: tuple[str, ...]
    # (subject, trial, window) per row; window is -1 for per-trial rows
    row_prov: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        prov = np.asarray(self.row_prov, dtype=np.int64).reshape(-1, 3)
        if values.ndim != 2:
            raise ValidationError("feature values must be 2-D")
        if values.shape[1] != len(self.col_names):
            raise ValidationError(f"{values.shape[1]} columns but {len(self.col_names)} names")
        if prov.shape[0] != values.shape[0]:
            raise ValidationError("one provenance triple per row required")
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature matrix contains NaN or Inf")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "col_names", tuple(self.col_names))
        object.__setattr__(self, "row_prov", prov)

    @property
    def shape(self):
        return self.values.shape

    @property
    def trials(self) -> np.ndarray:
        return self.row_prov[:, 1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*PROVENANCE_COLUMNS, *self.col_names])
            for prov, row in zip(self.row_prov.tolist(), self.values.tolist()):
                w.writerow([*prov, *map(repr, row)])

    @classmethod
    def from_csv(cls, path) -> FeatureMatrix:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header[:3]) != PROVENANCE_COLUMNS:
                raise ValidationError(f"{path}: header must start with subject,trial,window")
            rows = [r for r in reader if r]
        n_cols = len(header) - 3
        try:
            prov = np.array([r[:3] for r in rows], dtype=np.int64).reshape(-1, 3)
            values = np.array([r[3:] for r in rows], dtype=np.float64).reshape(-1, n_cols)
        except ValueError as exc:
            raise ValidationError(f"{path}: malformed feature rows ({exc})") from None
        return cls(values, tuple(header[3:]), prov)


@dataclass(frozen=True)
class WindowPlan:
    window_len: int
    step: int
    n_windows: int

    @property
    def starts(self) -> np.ndarray:
        return np.arange(self.n_windows) * self.step


def sliding_windows(n_samples: int, window_len: int, step: int) -> WindowPlan:
    if window_len < 1 or step < 1:
        raise SizeError("window_len and step must be >= 1")
    if n_samples < window_len:
        raise SizeError(f"{n_samples} samples cannot hold a {window_len}-sample window")
    return WindowPlan(window_len, step, (n_samples - window_len) // step + 1)


def meta_vectors(tensor: TrialTensor, config: PipelineConfig | None = None) -> FeatureMatrix:
    """Band powers of every sliding window, one row per (trial, window).

    Each window is a single Hamming-tapered segment; columns run
    channel-major over ``config.channel_subset`` x ``config.band_set``.
    """
    config = config or PipelineConfig()
    subset = np.asarray(config.channel_subset)
    if subset[-1] >= tensor.n_channels:
        raise ConfigError(f"channel {subset[-1]} not present in a {tensor.n_channels}-channel tensor")
    bands = band_set(config.band_set)
    plan = sliding_windows(tensor.n_samples, config.window_len, config.window_step)
    fs = tensor.sample_rate_hz
    idx = plan.starts[:, None] + np.arange(plan.window_len)
    df = fs / plan.window_len

    blocks = []
    for trial in range(tensor.n_trials):
        windows = tensor.data[trial, subset][:, idx]  # channels x windows x samples
        freqs, p, _ = segment_periodograms(windows, fs, plan.window_len, 0.0)
        bp = band_powers(freqs, p[..., 0, :], bands, df)  # channels x windows x bands
        blocks.append(bp.transpose(1, 0, 2).reshape(plan.n_windows, -1))

    names = [ELECTRODES[c] if c < len(ELECTRODES) else f"ch{c}" for c in subset]
    cols = tuple(f"{ch}_{b.name}" for ch in names for b in bands)
    trials = np.repeat(np.arange(tensor.n_trials), plan.n_windows)
    windows = np.tile(np.arange(plan.n_windows), tensor.n_trials)
    prov = np.column_stack([np.full_like(trials, tensor.subject_id), trials, windows])
    return FeatureMatrix(np.concatenate(blocks), cols, prov)


def describe(values: np.ndarray) -> np.ndarray:
    """The seven summary statistics along the last axis.

    Quartiles interpolate linearly between order statistics; std divides by n.
    """
    q1, med, q3 = np.percentile(values, [25, 50, 75], axis=-1)
    return np.stack(
        [values.mean(axis=-1), values.std(axis=-1), values.min(axis=-1), q1, med, q3, values.max(axis=-1)],
        axis=-1,
    )


def region_stats(tensor: TrialTensor, config: PipelineConfig | None = None) -> FeatureMatrix:
    """Per-trial statistics of theta, alpha, beta and gamma band powers pooled
    over each region.

    For every channel the trial is cut into Welch segments; the band powers
    of all segments of all channels in a region form the pooled sample.
    Columns are ordered region, band, statistic.
    """
    config = config or PipelineConfig()
    layout = tensor.channel_layout
    if tensor.n_channels != len(layout):
        raise ConfigError(f"region statistics need all {len(layout)} channels, got {tensor.n_channels}")
    region_channels = {r: layout.channels_in(r) for r in Region}
    empty = [r.value for r, chs in region_channels.items() if not chs]
    if empty:
        raise ConfigError(f"regions without channels: {empty}")

    m = config.welch_segment_len
    fs = tensor.sample_rate_hz
    rows = []
    for trial in range(tensor.n_trials):
        freqs, p, _ = segment_periodograms(tensor.data[trial], fs, m, config.welch_overlap)
        bp = band_powers(freqs, p, TABLE_ONE_BANDS, fs / m)  # channels x segments x bands
        feats = []
        for region in Region:
            pooled = bp[region_channels[region]]  # region channels x segments x bands
            pooled = pooled.transpose(2, 0, 1).reshape(len(TABLE_ONE_BANDS), -1)
            feats.append(describe(pooled).ravel())
        rows.append(np.concatenate(feats))

    cols = tuple(
        f"{r.value}_{b.name}_{s}" for r in Region for b in TABLE_ONE_BANDS for s in STATISTICS
    )
    trials = np.arange(tensor.n_trials)
    prov = np.column_stack([np.full_like(trials, tensor.subject_id), trials, np.full_like(trials, -1)])
    return FeatureMatrix(np.array(rows), cols, prov)
