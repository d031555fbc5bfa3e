"""Shared domain types: electrode layout, scalp regions, frequency bands,
trial tensors, ratings and pipeline configuration."""

from __future__ import annotations

import ast
import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ValidationError

# DEAP 32-channel montage order. C4 and CP6 complete the 30 names usually
# quoted for this montage.
ELECTRODES: tuple[str, ...] = (
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7",
    "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz", "Pz",
    "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz",
    "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
)

# 0-based offsets into ELECTRODES.
DEFAULT_CHANNEL_SUBSET: tuple[int, ...] = (1, 2, 3, 4, 6, 11, 13, 17, 19, 20, 21, 25, 29, 31)

META_BAND_EDGES: tuple[float, ...] = (4, 8, 12, 16, 25, 45)


class Region(str, enum.Enum):
    PREFRONTAL = "Prefrontal"
    FRONTAL = "Frontal"
    CENTRAL = "Central"
    TEMPORAL = "Temporal"
    PARIETAL = "Parietal"
    OCCIPITAL = "Occipital"


DEFAULT_REGIONS: Mapping[Region, tuple[str, ...]] = MappingProxyType({
    Region.PREFRONTAL: ("Fp1", "Fp2", "AF3", "AF4"),
    Region.FRONTAL: ("F3", "F4", "F7", "F8", "Fz", "FC1", "FC2", "FC5", "FC6"),
    Region.CENTRAL: ("C3", "C4", "Cz"),
    Region.TEMPORAL: ("T7", "T8"),
    Region.PARIETAL: ("P3", "P4", "P7", "P8", "Pz", "CP1", "CP2", "CP5", "CP6"),
    Region.OCCIPITAL: ("O1", "O2", "Oz", "PO3", "PO4"),
})


@dataclass(frozen=True)
class ChannelLayout:
    names: tuple[str, ...]
    region_of: Mapping[str, Region]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ConfigError("duplicate electrode names in layout")
        missing = [n for n in self.names if n not in self.region_of]
        if missing:
            raise ConfigError(f"electrodes without a region: {missing}")
        object.__setattr__(self, "region_of", MappingProxyType(dict(self.region_of)))

    def __len__(self):
        return len(self.names)

    def __getitem__(self, i):
        return self.names[i]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown electrode {name!r}") from None

    def channels_in(self, region: Region) -> list[int]:
        """Indices of the electrodes belonging to ``region``, in layout order."""
        return [i for i, n in enumerate(self.names) if self.region_of[n] is region]


def default_channel_layout(regions: Mapping[Region, Sequence[str]] | None = None) -> ChannelLayout:
    regions = DEFAULT_REGIONS if regions is None else regions
    region_of = {}
    for region, members in regions.items():
        for name in members:
            if name in region_of:
                raise ConfigError(f"electrode {name} assigned to two regions")
            region_of[name] = Region(region)
    return ChannelLayout(ELECTRODES, region_of)


@dataclass(frozen=True)
class Band:
    name: str
    low_hz: float
    high_hz: float

    def contains(self, f):
        return (f >= self.low_hz) & (f < self.high_hz)


@dataclass(frozen=True)
class BandSet:
    bands: tuple[Band, ...]

    def __post_init__(self):
        prev_high = -np.inf
        for b in self.bands:
            if not b.low_hz < b.high_hz:
                raise ConfigError(f"band {b.name}: low must be below high")
            if b.low_hz < prev_high:
                raise ConfigError("bands must be sorted and non-overlapping")
            prev_high = b.high_hz

    def __len__(self):
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    def __getitem__(self, i):
        return self.bands[i]

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.bands]

    def by_name(self, name: str) -> Band:
        for b in self.bands:
            if b.name.lower() == name.lower():
                return b
        raise ConfigError(f"unknown band {name!r}; choose from {self.names}")


TABLE_ONE_BANDS = BandSet((
    Band("Theta", 4, 8),
    Band("Alpha", 8, 16),
    Band("Beta", 16, 32),
    Band("Gamma", 32, 64),
))

META_BANDS = BandSet(tuple(
    Band(f"{lo:g}-{hi:g}Hz", lo, hi)
    for lo, hi in zip(META_BAND_EDGES[:-1], META_BAND_EDGES[1:])
))


def band_set(selector: str) -> BandSet:
    if selector == "table_one":
        return TABLE_ONE_BANDS
    if selector == "meta":
        return META_BANDS
    raise ConfigError(f"unknown band set {selector!r} (expected 'table_one' or 'meta')")


@dataclass(frozen=True)
class TrialTensor:
    """One subject's recordings, ``data`` shaped trials x channels x samples (µV)."""

    subject_id: int
    data: np.ndarray
    sample_rate_hz: float
    channel_layout: ChannelLayout = field(default_factory=default_channel_layout)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValidationError(f"trial tensor must be 3-D and non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("trial tensor contains NaN or Inf")
        if not self.sample_rate_hz > 0:
            raise ValidationError("sample rate must be positive")
        if data.shape[1] > len(self.channel_layout):
            raise ValidationError(
                f"{data.shape[1]} channels but layout has only {len(self.channel_layout)}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Ratings:
    valence: np.ndarray
    arousal: np.ndarray

    def __post_init__(self):
        v = np.array(self.valence, dtype=np.float64)
        a = np.array(self.arousal, dtype=np.float64)
        if v.ndim != 1 or v.shape != a.shape:
            raise ValidationError("valence and arousal must be 1-D and of equal length")
        for name, col in (("valence", v), ("arousal", a)):
            bad = np.flatnonzero(~((col >= 1) & (col <= 9)))
            if bad.size:
                raise ValidationError(f"{name} rating out of [1, 9] at trial {bad[0]}: {col[bad[0]]}")
        v.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "valence", v)
        object.__setattr__(self, "arousal", a)

    def __len__(self):
        return len(self.valence)


@dataclass(frozen=True)
class LstmConfig:
    hidden: tuple[int, ...] = (32, 16, 8, 8, 4)
    # one rate per recurrent layer, then the rate before the output dense layer
    dropout: tuple[float, ...] = (0.3, 0.5, 0.3, 0.3, 0.3, 0.2)
    head_hidden: int = 32
    n_outputs: int = 2
    seq_len: int = 10
    batch_size: int = 64
    epochs: int = 100
    lr: float = 0.001
    rho: float = 0.9
    eps: float = 1e-8
    momentum: float = 0.0
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    checkpoint_every: int = 50
    train_fraction: float = 0.75
    split: str = "trial"

    def __post_init__(self):
        if len(self.hidden) < 1 or min(self.hidden) < 1:
            raise ConfigError("lstm hidden sizes must be positive")
        if len(self.dropout) != len(self.hidden) + 1:
            raise ConfigError(
                f"need {len(self.hidden) + 1} dropout rates (one per layer plus head), "
                f"got {len(self.dropout)}"
            )
        if any(not 0 <= p < 1 for p in self.dropout):
            raise ConfigError("dropout rates must lie in [0, 1)")
        if self.split not in ("trial", "window"):
            raise ConfigError("lstm split must be 'trial' or 'window'")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train fraction must lie in (0, 1)")
        if self.seq_len < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("seq_len and batch_size must be >= 1, epochs >= 0")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")

    @classmethod
    def full_size(cls, **overrides) -> LstmConfig:
        """Full-size network: hidden layers 512/256/128/64/10, 1000 epochs."""
        return cls(**{"hidden": (512, 256, 128, 64, 10), "epochs": 1000, **overrides})


@dataclass(frozen=True)
class PipelineConfig:
    window_len: int = 256
    window_step: int = 16
    welch_segment_len: int = 256
    welch_overlap: float = 0.5
    channel_subset: tuple[int, ...] = DEFAULT_CHANNEL_SUBSET
    band_set: str = "meta"
    rng_seed: int = 0
    knn_k: int = 5
    svm_c: float = 1.0
    svm_epochs: int = 100
    cv_folds: int = 5
    sample_rate_hz: float = 128.0
    lstm: LstmConfig = field(default_factory=LstmConfig)

    def __post_init__(self):
        if self.window_step < 1:
            raise ConfigError("window_step must be >= 1")
        if self.window_len < 2 or self.window_len & (self.window_len - 1):
            raise ConfigError("window_len must be a power of two >= 2")
        if self.welch_segment_len < 2 or self.welch_segment_len & (self.welch_segment_len - 1):
            raise ConfigError("welch_segment_len must be a power of two >= 2")
        if not 0 <= self.welch_overlap < 1:
            raise ConfigError("welch_overlap must lie in [0, 1)")
        subset = tuple(int(i) for i in self.channel_subset)
        if not subset or any(b <= a for a, b in zip(subset, subset[1:])):
            raise ConfigError("channel_subset must be non-empty and strictly increasing")
        if subset[0] < 0 or subset[-1] > len(ELECTRODES) - 1:
            raise ConfigError(f"channel_subset indices must lie in [0, {len(ELECTRODES) - 1}]")
        object.__setattr__(self, "channel_subset", subset)
        band_set(self.band_set)
        if self.knn_k < 1 or self.cv_folds < 2 or self.svm_c <= 0:
            raise ConfigError("need knn_k >= 1, cv_folds >= 2, svm_c > 0")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be non-negative")

    def replace(self, **changes) -> PipelineConfig:
        lstm_changes = {k[5:]: changes.pop(k) for k in list(changes) if k.startswith("lstm_")}
        if lstm_changes:
            changes["lstm"] = dataclasses.replace(self.lstm, **lstm_changes)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_TUPLE_FIELDS = {"channel_subset", "lstm_hidden", "lstm_dropout"}


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        values[key] = _parse_value(raw)
    return values


def config_from_mapping(values: Mapping, base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    known = {f.name for f in dataclasses.fields(PipelineConfig)} - {"lstm"}
    known |= {"lstm_" + f.name for f in dataclasses.fields(LstmConfig)}
    changes = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _TUPLE_FIELDS:
            value = tuple(value)
        changes[key] = value
    try:
        return base.replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None = None, overrides: Mapping | None = None) -> PipelineConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text))
    values.update(overrides or {})
    return config_from_mapping(values)
