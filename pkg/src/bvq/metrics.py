"""Evaluation metrics for gridded forecasts.

All functions are pure and operate on numpy arrays. Range conventions:
mse/rmse/relative_l2 >= 0, ssim in [-1, 1], csi in [0, 1], tke >= 0.
"""

import csv as _csv
import io
import json
from dataclasses import dataclass, field, asdict

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericsError, ShapeError


def mse(pred, true):
    """Mean squared difference over all elements."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(true, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"mse: shapes differ, {p.shape} vs {t.shape}")
    return float(((p - t) ** 2).mean())


def rmse(pred, true):
    return float(np.sqrt(mse(pred, true)))


def relative_l2(pred, true):
    """||pred - true||_2 / ||true||_2; the reference must be nonzero."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(true, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"relative_l2: shapes differ, {p.shape} vs {t.shape}")
    denom = np.linalg.norm(t.ravel())
    if denom == 0.0:
        raise NumericsError("relative_l2: reference field has zero norm")
    return float(np.linalg.norm((p - t).ravel()) / denom)


def ssim(a, b, c1=None, c2=None, window=7, data_range=None):
    """Mean local structural similarity over sliding uniform windows.

    For [H,W] inputs this is the plain 2D index; [C,H,W] and [T,C,H,W]
    inputs are averaged over the leading axes. When c1/c2 are not given they
    default to (0.01*L)^2 and (0.03*L)^2 with L the data range of `b` (or the
    explicit `data_range`, which is what evaluation uses so models share
    constants).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shapes differ, {a.shape} vs {b.shape}")
    if a.ndim > 2:
        flat_a = a.reshape(-1, *a.shape[-2:])
        flat_b = b.reshape(-1, *b.shape[-2:])
        if c1 is None or c2 is None:
            if data_range is None:
                data_range = float(b.max() - b.min()) or 1.0
        return float(np.mean([
            ssim(x, y, c1, c2, window, data_range) for x, y in zip(flat_a, flat_b)
        ]))
    h, w = a.shape
    if window > h or window > w:
        raise ShapeError(f"ssim: window {window} larger than image {h}x{w}")
    if c1 is None or c2 is None:
        if data_range is None:
            data_range = float(b.max() - b.min()) or 1.0
        c1 = (0.01 * data_range) ** 2 if c1 is None else c1
        c2 = (0.03 * data_range) ** 2 if c2 is None else c2

    def win_mean(x):
        return sliding_window_view(x, (window, window)).mean(axis=(2, 3))

    mu_a = win_mean(a)
    mu_b = win_mean(b)
    var_a = win_mean(a * a) - mu_a * mu_a
    var_b = win_mean(b * b) - mu_b * mu_b
    cov = win_mean(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def csi(pred, true, threshold):
    """Critical success index over cells exceeding the threshold.

    hits / (hits + misses + false alarms); returns 1 when no cell on either
    side exceeds the threshold (perfect agreement that nothing happened).
    """
    if not np.isfinite(threshold):
        raise NumericsError("csi: threshold must be finite")
    p = np.asarray(pred) > threshold
    t = np.asarray(true) > threshold
    if p.shape != t.shape:
        raise ShapeError(f"csi: shapes differ, {p.shape} vs {t.shape}")
    hits = int(np.sum(p & t))
    misses = int(np.sum(~p & t))
    false_alarms = int(np.sum(p & ~t))
    denom = hits + misses + false_alarms
    if denom == 0:
        return 1.0
    return hits / denom


def tke(u, v):
    """Mean kinetic energy of velocity fluctuations about the spatial mean."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"tke: shapes differ, {u.shape} vs {v.shape}")
    du = u - u.mean()
    dv = v - v.mean()
    return float(0.5 * (du * du + dv * dv).mean())


def energy_spectrum(field):
    """Radially binned power of the 2D DFT; bin b collects |wavevector| ~ b.

    Every Fourier cell lands in exactly one of the H/2 bins (corner modes go
    to the last bin), so the binned power sums to the total spatial power.
    """
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ShapeError(f"energy_spectrum: expected square [H,W], got {f.shape}")
    n = f.shape[0]
    n_bins = n // 2
    if n_bins < 1:
        raise ShapeError("energy_spectrum: grid too small")
    power = np.abs(np.fft.fft2(f)) ** 2 / (n * n)
    k = np.fft.fftfreq(n) * n
    radius = np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)
    bins = np.minimum(np.rint(radius).astype(np.intp), n_bins - 1)
    spectrum = np.zeros(n_bins)
    np.add.at(spectrum, bins.ravel(), power.ravel())
    return spectrum


@dataclass
class MetricReport:
    """Per-model metric scalars plus per-timestep curves."""

    model_id: str
    dataset_id: str
    horizon: int
    scalars: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def csv_rows(self):
        """One (model, metric, timestep, value) row per curve point."""
        rows = []
        for metric in sorted(self.curves):
            for step, value in enumerate(self.curves[metric]):
                rows.append((self.model_id, metric, step, value))
        return rows


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "metric", "timestep", "value"])
    for report in reports:
        for row in report.csv_rows():
            writer.writerow(row)
    return buf.getvalue()
