"""Semantic interference factor and SINR/rate arithmetic.

The interference factor rho in [0, 1] scales the partner's power inside the
SINR denominator: rho = 1 recovers the conventional SINR, rho = 0 removes
cross-user interference entirely. rho is modeled over (group power, link
SNR) because the semantic decoders' separation ability was measured on that
grid; three interchangeable profile kinds are provided so the optimizer does
not depend on any particular measurement campaign:

* ``constant`` -- one fixed value,
* ``table``    -- bilinear interpolation over a measured (power dBW, SNR dB)
                  grid, clamped at the grid edges,
* ``parametric`` -- logistic decay
  limit / (1 + exp(snr_slope*(snr_db - snr_mid_db)
                   + power_coeff*10*log10(p / power_ref_w))).

The SNR coordinate is always the receiver's own-link SNR when the group
power is split equally between the two users, matching the regime in which
the group-level allocation stage evaluates rho.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple

import numpy as np

__all__ = [
    "Link",
    "LogisticRhoParams",
    "InterferenceProfile",
    "CalibratedRho",
    "rho",
    "rho_derivative",
    "sinr_conventional",
    "sinr_semantic",
    "calibrate_rho",
    "user_rate",
    "pair_sum_rate",
    "load_rho_table",
    "save_rho_table",
]

_LN10 = float(np.log(10.0))
_DEFAULT_TABLE_RESOURCE = "rho_default.csv"


@dataclass(frozen=True)
class Link:
    """One downlink: linear power gain |h|^2 and receiver noise power in watts."""

    gain: float
    noise: float

    def __post_init__(self):
        if np.any(np.asarray(self.gain) <= 0):
            raise ValueError(f"link gain must be strictly positive, got {self.gain}")
        if np.any(np.asarray(self.noise) <= 0):
            raise ValueError(f"link noise must be strictly positive, got {self.noise}")


@dataclass(frozen=True)
class LogisticRhoParams:
    """Coefficients of the logistic-decay interference model."""

    limit: float = 0.95        # high-interference plateau, in [0, 1]
    snr_slope: float = 0.42    # decay rate per dB of link SNR
    snr_mid_db: float = 6.0    # SNR at which rho crosses half the plateau
    power_coeff: float = 0.015 # sensitivity to group power in dB
    power_ref_w: float = 1.0   # reference power for the dB conversion

    def __post_init__(self):
        if not 0.0 <= self.limit <= 1.0:
            raise ValueError(f"limit must lie in [0, 1], got {self.limit}")
        if self.power_ref_w <= 0:
            raise ValueError("power_ref_w must be positive")


class CalibratedRho(NamedTuple):
    value: float
    clamped: bool


@dataclass(frozen=True)
class InterferenceProfile:
    """Interference factor model; use the classmethod constructors."""

    kind: str
    constant_value: float = 1.0
    power_axis_dbw: np.ndarray | None = None
    snr_axis_db: np.ndarray | None = None
    values: np.ndarray | None = None
    params: LogisticRhoParams | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if not 0.0 <= self.constant_value <= 1.0:
                raise ValueError(f"constant rho must lie in [0, 1], got {self.constant_value}")
        elif self.kind == "table":
            p_ax = np.asarray(self.power_axis_dbw, dtype=float)
            s_ax = np.asarray(self.snr_axis_db, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            object.__setattr__(self, "power_axis_dbw", p_ax)
            object.__setattr__(self, "snr_axis_db", s_ax)
            object.__setattr__(self, "values", vals)
            if p_ax.ndim != 1 or s_ax.ndim != 1 or p_ax.size == 0 or s_ax.size == 0:
                raise ValueError("table axes must be non-empty 1-D arrays")
            if np.any(np.diff(p_ax) <= 0) or np.any(np.diff(s_ax) <= 0):
                raise ValueError("table axes must be strictly increasing")
            if vals.shape != (p_ax.size, s_ax.size):
                raise ValueError(
                    f"table must be rectangular with shape {(p_ax.size, s_ax.size)}, got {vals.shape}"
                )
            if np.any(vals < 0) or np.any(vals > 1):
                raise ValueError("table rho values must lie in [0, 1]")
        elif self.kind == "parametric":
            if self.params is None:
                raise ValueError("parametric profile requires params")
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "InterferenceProfile":
        return cls(kind="constant", constant_value=float(value))

    @classmethod
    def from_table(cls, power_axis_dbw, snr_axis_db, values) -> "InterferenceProfile":
        return cls(
            kind="table",
            power_axis_dbw=np.asarray(power_axis_dbw, dtype=float),
            snr_axis_db=np.asarray(snr_axis_db, dtype=float),
            values=np.asarray(values, dtype=float),
        )

    @classmethod
    def parametric(cls, params: LogisticRhoParams | None = None) -> "InterferenceProfile":
        return cls(kind="parametric", params=params or LogisticRhoParams())

    @classmethod
    def from_csv(cls, path) -> "InterferenceProfile":
        return load_rho_table(path)

    @classmethod
    def default_table(cls) -> "InterferenceProfile":
        """The bundled calibration table (qualitative measured shape)."""
        text = resources.files("sfma.data").joinpath(_DEFAULT_TABLE_RESOURCE).read_text()
        return _parse_rho_table(io.StringIO(text), source=_DEFAULT_TABLE_RESOURCE)


def _equal_split_snr_db(group_power, gain, noise):
    """Receiver SNR in dB with the group power split equally, -inf at p = 0."""
    p_half = np.asarray(group_power, dtype=float) / 2.0
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p_half * np.asarray(gain) / np.asarray(noise))


def _axis_locate(axis: np.ndarray, x):
    """Clamped cell index and fractional offset along one grid axis."""
    if axis.size == 1:
        idx = np.zeros(np.shape(x), dtype=np.intp)
        return idx, np.zeros(np.shape(x))
    x = np.minimum(np.maximum(x, axis[0]), axis[-1])
    idx = np.searchsorted(axis, x, side="right") - 1
    idx = np.minimum(np.maximum(idx, 0), axis.size - 2)
    t = (x - axis[idx]) / (axis[idx + 1] - axis[idx])
    return idx, t


def _bilinear(profile: InterferenceProfile, p_dbw, snr_db_val):
    p_ax, s_ax, vals = profile.power_axis_dbw, profile.snr_axis_db, profile.values
    ip, tp = _axis_locate(p_ax, np.asarray(p_dbw, dtype=float))
    js, ts = _axis_locate(s_ax, np.asarray(snr_db_val, dtype=float))
    ip1 = np.minimum(ip + 1, p_ax.size - 1)
    js1 = np.minimum(js + 1, s_ax.size - 1)
    v00, v01 = vals[ip, js], vals[ip, js1]
    v10, v11 = vals[ip1, js], vals[ip1, js1]
    return (1 - tp) * ((1 - ts) * v00 + ts * v01) + tp * ((1 - ts) * v10 + ts * v11)


def _parametric_rho(params: LogisticRhoParams, group_power, gain, noise):
    snr = _equal_split_snr_db(group_power, gain, noise)
    p = np.asarray(group_power, dtype=float)
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(p / params.power_ref_w)
    expo = params.snr_slope * (snr - params.snr_mid_db) + params.power_coeff * power_db
    expo = np.clip(expo, -60.0, 60.0)
    return params.limit / (1.0 + np.exp(expo))


def _rho_kernel(profile: InterferenceProfile, p, gain, noise):
    """Unvalidated rho evaluation on arrays (hot path)."""
    if profile.kind == "constant":
        return np.full(np.shape(p), profile.constant_value)
    if profile.kind == "table":
        with np.errstate(divide="ignore"):
            p_dbw = 10.0 * np.log10(p)
        out = _bilinear(profile, p_dbw, _equal_split_snr_db(p, gain, noise))
    else:
        out = _parametric_rho(profile.params, p, gain, noise)
    return np.minimum(np.maximum(out, 0.0), 1.0)


def rho_eval(profile: InterferenceProfile, group_power, gain, noise):
    """Vector-friendly rho evaluation; scalar inputs give a float."""
    p = np.asarray(group_power, dtype=float)
    if np.any(p < 0):
        raise ValueError("group power must be nonnegative")
    out = _rho_kernel(profile, p, gain, noise)
    return float(out) if np.ndim(out) == 0 else out


def rho(profile: InterferenceProfile, group_power: float, link: Link) -> float:
    """Interference factor for a group transmitting at ``group_power`` toward ``link``."""
    return rho_eval(profile, group_power, link.gain, link.noise)


def _rho_derivative_kernel(profile: InterferenceProfile, p, gain, noise):
    """Unvalidated d(rho)/dp on arrays (hot path)."""
    if profile.kind == "constant":
        return np.zeros(np.shape(p))
    if profile.kind == "parametric":
        prm = profile.params
        snr = _equal_split_snr_db(p, gain, noise)
        with np.errstate(divide="ignore"):
            power_db = 10.0 * np.log10(p / prm.power_ref_w)
        expo = np.clip(prm.snr_slope * (snr - prm.snr_mid_db) + prm.power_coeff * power_db, -60.0, 60.0)
        sig = 1.0 / (1.0 + np.exp(expo))
        # d(expo)/dp: both the SNR and power terms move by 10/(p ln10) per watt
        dexpo = 10.0 * (prm.snr_slope + prm.power_coeff) / (p * _LN10)
        return -prm.limit * sig * (1.0 - sig) * dexpo
    h = np.maximum(1e-9, 1e-4 * p)
    lo = p - h
    hi = p + h
    # fall back to a forward difference when the lower sample would be <= 0
    fwd = lo <= 0
    lo = np.where(fwd, p, lo)
    denom = np.where(fwd, h, 2.0 * h)
    return (_rho_kernel(profile, hi, gain, noise) - _rho_kernel(profile, lo, gain, noise)) / denom


def rho_derivative_eval(profile: InterferenceProfile, group_power, gain, noise):
    """d(rho)/d(group power), vector-friendly.

    Analytic for constant and parametric kinds; central finite difference
    with step max(1e-9, 1e-4 * p) for the table kind.
    """
    p = np.asarray(group_power, dtype=float)
    if np.any(p <= 0):
        raise ValueError("group power must be positive for the derivative")
    out = _rho_derivative_kernel(profile, p, gain, noise)
    return float(out) if np.ndim(out) == 0 else out


def rho_derivative(profile: InterferenceProfile, group_power: float, link: Link) -> float:
    return rho_derivative_eval(profile, group_power, link.gain, link.noise)


def sinr_conventional(p_self: float, p_other: float, link: Link):
    """Standard SINR with the partner's full power as interference."""
    return p_self * link.gain / (p_other * link.gain + link.noise)


def sinr_semantic(p_self: float, p_other: float, rho_val: float, link: Link):
    """SINR with the partner's power scaled by the interference factor."""
    return p_self * link.gain / (rho_val * p_other * link.gain + link.noise)


def calibrate_rho(p_self: float, p_other: float, link: Link, mse: float) -> CalibratedRho:
    """Invert an empirical distortion measurement into an interference factor.

    Solves ``p_self*gain / mse == p_self*gain / (rho*p_other*gain + noise)``
    for rho; the self power cancels. The result is clamped to [0, 1] and the
    flag records whether clamping occurred.
    """
    if mse <= 0:
        raise ValueError(f"mse must be positive, got {mse}")
    denom = p_other * link.gain
    if denom == 0:
        raise ValueError("p_other * gain must be nonzero to calibrate rho")
    raw = (mse - link.noise) / denom
    clamped = raw < 0.0 or raw > 1.0
    return CalibratedRho(value=float(min(max(raw, 0.0), 1.0)), clamped=clamped)


def user_rate(p_self: float, p_other: float, rho_val: float, link: Link):
    """Achievable rate log2(1 + semantic SINR) in bits/s/Hz."""
    return np.log2(1.0 + sinr_semantic(p_self, p_other, rho_val, link))


def pair_sum_rate(
    p1: float,
    p2: float,
    profile: InterferenceProfile,
    link1: Link,
    link2: Link,
    profile2: InterferenceProfile | None = None,
) -> float:
    """Group sum rate: both users' rates with rho evaluated at the group power.

    One shared profile is evaluated on each receiver's own link by default;
    pass ``profile2`` to model asymmetric interference factors.
    """
    p_group = p1 + p2
    rho_21 = rho_eval(profile, p_group, link1.gain, link1.noise)
    rho_12 = rho_eval(profile2 or profile, p_group, link2.gain, link2.noise)
    return float(user_rate(p1, p2, rho_21, link1) + user_rate(p2, p1, rho_12, link2))


def _parse_rho_table(handle, source: str) -> InterferenceProfile:
    rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise ValueError(f"{source}: rho table needs a header row and at least one data row")
    try:
        snr_axis = [float(cell) for cell in rows[0][1:]]
    except ValueError as exc:
        raise ValueError(f"{source}: header row must be ',snr1,snr2,...' with numeric SNRs") from exc
    if not snr_axis:
        raise ValueError(f"{source}: header row lists no SNR values")
    power_axis, values = [], []
    for idx, row in enumerate(rows[1:], start=2):
        if len(row) != len(snr_axis) + 1:
            raise ValueError(f"{source}: row {idx} has {len(row)} cells, expected {len(snr_axis) + 1}")
        try:
            power_axis.append(float(row[0]))
            values.append([float(cell) for cell in row[1:]])
        except ValueError as exc:
            raise ValueError(f"{source}: row {idx} contains a non-numeric cell") from exc
    return InterferenceProfile.from_table(power_axis, snr_axis, values)


def load_rho_table(path) -> InterferenceProfile:
    """Load a rho table: first row SNR axis (dB), first column power axis (dBW)."""
    with open(path, newline="") as handle:
        return _parse_rho_table(handle, source=str(path))


def save_rho_table(profile: InterferenceProfile, path) -> None:
    if profile.kind != "table":
        raise ValueError("only table profiles can be saved")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([""] + [f"{v:g}" for v in profile.snr_axis_db])
        for p_dbw, row in zip(profile.power_axis_dbw, profile.values):
            writer.writerow([f"{p_dbw:g}"] + [f"{v:g}" for v in row])
