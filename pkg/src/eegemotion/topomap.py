"""Scalp maps: 2-D electrode positions, inverse-distance-weighted grids and
SVG rendering."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ELECTRODES, TABLE_ONE_BANDS, TrialTensor
from .errors import RangeError
from .spectral import band_power, welch_psd

# Azimuthal projection of the 10-20 positions: (radius, angle in degrees
# clockwise from the nose). Cz is the origin, the nasion-inion equator sits
# at radius 0.9, so every electrode lies strictly inside the unit circle.
POLAR_POSITIONS: dict[str, tuple[float, float]] = {
    "Fp1": (0.90, -18), "Fp2": (0.90, 18),
    "AF3": (0.71, -27), "AF4": (0.71, 27),
    "F7": (0.90, -54), "F3": (0.57, -40), "Fz": (0.45, 0), "F4": (0.57, 40), "F8": (0.90, 54),
    "FC5": (0.66, -70), "FC1": (0.30, -43), "FC2": (0.30, 43), "FC6": (0.66, 70),
    "T7": (0.90, -90), "C3": (0.45, -90), "Cz": (0.00, 0), "C4": (0.45, 90), "T8": (0.90, 90),
    "CP5": (0.66, -110), "CP1": (0.30, -137), "CP2": (0.30, 137), "CP6": (0.66, 110),
    "P7": (0.90, -126), "P3": (0.57, -140), "Pz": (0.45, 180), "P4": (0.57, 140), "P8": (0.90, 126),
    "PO3": (0.71, -153), "PO4": (0.71, 153),
    "O1": (0.90, -162), "Oz": (0.90, 180), "O2": (0.90, 162),
}


def electrode_xy(names=ELECTRODES) -> np.ndarray:
    """Cartesian positions (x to the right ear, y to the nose)."""
    out = []
    for name in names:
        r, deg = POLAR_POSITIONS[name]
        a = math.radians(deg)
        out.append((r * math.sin(a), r * math.cos(a)))
    return np.array(out)


def idw_grid(points, values, size: int = 64, power: float = 2.0, neighbours: int = 4):
    """Interpolate ``values`` at ``points`` onto a ``size`` x ``size`` grid over [-1, 1]^2.

    Each grid node averages its ``neighbours`` nearest electrodes with
    weights ``1 / d^power``; a node on an electrode takes its value.
    Returns ``(xs, ys, grid)`` with ``grid[row, col]`` at ``(xs[col], ys[row])``.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    axis = np.linspace(-1.0, 1.0, size)
    gx, gy = np.meshgrid(axis, axis)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    d = np.sqrt(((nodes[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1))
    k = min(neighbours, len(points))
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    dn = np.take_along_axis(d, nearest, axis=1)
    vn = values[nearest]
    exact = dn[:, 0] == 0
    with np.errstate(divide="ignore"):
        w = np.where(exact[:, None], 0.0, 1.0 / dn**power)
    est = np.where(exact, vn[:, 0], (w * vn).sum(axis=1) / np.where(exact, 1.0, w.sum(axis=1)))
    return axis, axis, est.reshape(size, size)


@dataclass(frozen=True)
class TopomapGrid:
    band: str
    t_start: float
    t_end: float
    xs: np.ndarray
    ys: np.ndarray
    grid: np.ndarray
    electrodes: tuple[str, ...]
    positions: np.ndarray
    electrode_values: np.ndarray
    sample_span: tuple[int, int]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "value"])
            for r, y in enumerate(self.ys):
                for c, x in enumerate(self.xs):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(self.grid[r, c]))])

    def to_svg(self, path, pixels: int = 384) -> None:
        path_text = render_svg(self, pixels)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(path_text)


def analysis_span(t_start: float, t_end: float, fs: float, n_samples: int, min_len: int = 256):
    """Sample range for ``[t_start, t_end)``; spans shorter than ``min_len``
    grow to a ``min_len`` window centred on the span, shifted to stay in
    the trial."""
    if not 0 <= t_start < t_end <= n_samples / fs:
        raise RangeError(f"time range [{t_start}, {t_end}) outside trial of {n_samples / fs:g} s")
    lo = int(math.floor(t_start * fs))
    hi = min(n_samples, int(math.ceil(t_end * fs)))
    if hi - lo >= min_len:
        return lo, hi
    if n_samples < min_len:
        raise RangeError(f"trial of {n_samples} samples is shorter than a {min_len}-sample window")
    centre = (lo + hi) / 2
    lo = int(round(centre - min_len / 2))
    lo = min(max(lo, 0), n_samples - min_len)
    return lo, lo + min_len


def topomap(tensor: TrialTensor, trial: int, t_start: float, t_end: float, band: str = "Alpha",
            size: int = 64, segment_len: int = 256) -> TopomapGrid:
    """Band power per electrode over a time span, interpolated to a grid."""
    if not 0 <= trial < tensor.n_trials:
        raise RangeError(f"trial {trial} not in [0, {tensor.n_trials})")
    b = TABLE_ONE_BANDS.by_name(band)
    fs = tensor.sample_rate_hz
    lo, hi = analysis_span(t_start, t_end, fs, tensor.n_samples, segment_len)
    names = tensor.channel_layout.names[: tensor.n_channels]
    psd = welch_psd(tensor.data[trial, :, lo:hi], fs, segment_len, 0.5)
    values = np.atleast_1d(band_power(psd, b))
    pos = electrode_xy(names)
    xs, ys, grid = idw_grid(pos, values, size)
    return TopomapGrid(b.name, t_start, t_end, xs, ys, grid, tuple(names), pos, values, (lo, hi))


def _colour(u: float) -> str:
    # blue -> white -> red
    u = min(max(u, 0.0), 1.0)
    if u < 0.5:
        s = u / 0.5
        r, g, b = int(255 * s), int(255 * s), 255
    else:
        s = (1.0 - u) / 0.5
        r, g, b = 255, int(255 * s), int(255 * s)
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(tm: TopomapGrid, pixels: int = 384) -> str:
    """Heatmap clipped to the head circle, with electrode markers and labels."""
    n = tm.grid.shape[0]
    cell = pixels / n
    lo, hi = float(tm.grid.min()), float(tm.grid.max())
    span = hi - lo if hi > lo else 1.0
    half = pixels / 2

    def to_px(x, y):
        return half + x * half, half - y * half

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{pixels}" height="{pixels + 30}" '
        f'viewBox="0 0 {pixels} {pixels + 30}">',
        f'<defs><clipPath id="head"><circle cx="{half}" cy="{half}" r="{half}"/></clipPath></defs>',
        '<g clip-path="url(#head)" shape-rendering="crispEdges">',
    ]
    for r in range(n):
        y_px = pixels - (r + 1) * cell
        for c in range(n):
            colour = _colour((tm.grid[r, c] - lo) / span)
            out.append(f'<rect x="{c * cell:.2f}" y="{y_px:.2f}" width="{cell:.2f}" '
                       f'height="{cell:.2f}" fill="{colour}"/>')
    out.append("</g>")
    out.append(f'<circle cx="{half}" cy="{half}" r="{half - 0.5}" fill="none" stroke="black"/>')
    for name, (x, y) in zip(tm.electrodes, tm.positions):
        px, py = to_px(x, y)
        out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.5" fill="black"/>')
        out.append(f'<text x="{px + 3:.2f}" y="{py - 3:.2f}" font-size="9">{name}</text>')
    out.append(
        f'<text x="4" y="{pixels + 20}" font-size="12">{tm.band} {tm.t_start:g}-{tm.t_end:g} s, '
        f'{lo:.3g} to {hi:.3g} uV^2</text>'
    )
    out.append("</svg>\n")
    return "\n".join(out)
