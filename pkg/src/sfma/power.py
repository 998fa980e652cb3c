"""Group power allocation: budget split across pairs, then within each pair.

The group-level stage runs a water-filling bisection on the budget
multiplier mu. For each mu and each group it evaluates three candidate
group powers under an equal intra-pair split: two fixed points where a
user's minimum-rate constraint binds, and the root of the rate-derivative
stationarity condition; the group keeps the largest feasible candidate and
mu is driven until the totals meet the budget. The pair-level stage then
reoptimizes each group's internal split by golden-section search with the
interference factors frozen at the group total. A residual report checks
the first-order optimality system of the allocation.

Internals are vectorized across groups. The stationarity curve of every
group is sampled once on a dense log grid; the mu search first bisects on
the interpolated curves and then polishes with a few exactly-evaluated
secant steps, so the per-instance cost stays flat in the drop count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .pairing import PairingAssignment, UserTerminal, pair_users
from .semantic_rate import (
    InterferenceProfile,
    _rho_derivative_kernel,
    _rho_kernel,
)

__all__ = [
    "Group",
    "PowerAllocation",
    "SolverConfig",
    "SolveResult",
    "KKTReport",
    "MinRateInfeasible",
    "ConvergenceError",
    "extreme_point_min_rate",
    "extreme_point_stationary",
    "inter_group_allocate",
    "intra_group_allocate",
    "kkt_residuals",
    "solve",
]

logger = logging.getLogger(__name__)

_LN2 = float(np.log(2.0))
_PHI = (np.sqrt(5.0) - 1.0) / 2.0  # golden-section step
_GRID_N = 1024                     # stationarity-curve samples per group

# stationary-point resolution markers
_ROOT, _ZERO, _CAP = 0, 1, 2


class MinRateInfeasible(RuntimeError):
    """A minimum-rate constraint cannot be met at any power under this profile."""


class ConvergenceError(RuntimeError):
    """An iterative stage failed to converge; indicates a pathological input."""


@dataclass(frozen=True)
class Group:
    """Two paired users sharing one resource block.

    ``eta`` holds the intra-pair power fractions (p_i = eta_i * p_k). The
    group-level stage always works at the equal split, where the fraction
    and amplitude-ratio conventions coincide.
    """

    users: tuple  # (UserTerminal, UserTerminal)
    profile: InterferenceProfile
    eta: tuple = (0.5, 0.5)
    profile2: InterferenceProfile | None = None

    def __post_init__(self):
        if len(self.users) != 2:
            raise ValueError("a group holds exactly two users")
        e1, e2 = self.eta
        if not (0 < e1 < 1 and 0 < e2 < 1) or abs(e1 + e2 - 1.0) > 1e-9:
            raise ValueError(f"eta must be fractions in (0,1) summing to 1, got {self.eta}")


@dataclass
class PowerAllocation:
    """Group totals, per-user splits, and dual variables of one allocation."""

    group_totals: np.ndarray          # (K,) watts
    splits: np.ndarray                # (K, 2) watts
    mu: float                         # budget multiplier
    lambdas: np.ndarray               # (K, 2) min-rate multipliers
    feasible: bool = True
    budget_exhausted: bool = True
    status: str = "ok"


@dataclass
class KKTReport:
    """Raw and normalized residuals of the first-order optimality system."""

    stationarity: np.ndarray          # (K,) raw
    stationarity_norm: np.ndarray     # (K,)
    rate_comp: np.ndarray             # (K, 2) raw |lambda * slack|
    rate_comp_norm: np.ndarray        # (K, 2)
    budget_comp: float                # raw mu * (p_max - total)
    budget_comp_norm: float
    power_excess: float               # raw watts above the budget
    rate_violation: np.ndarray        # (K, 2) raw rate shortfalls
    rate_violation_norm: np.ndarray
    negative_power: float             # raw watts below zero
    dual_negative: float              # most negative multiplier, as a positive number

    @property
    def max_normalized(self) -> float:
        return max(
            float(np.max(self.stationarity_norm, initial=0.0)),
            float(np.max(self.rate_comp_norm, initial=0.0)),
            self.budget_comp_norm,
            float(np.max(self.rate_violation_norm, initial=0.0)),
            self.dual_negative,
        )


@dataclass(frozen=True)
class SolverConfig:
    """Inputs of the pairing + allocation pipeline for one scenario."""

    p_max_w: float
    alpha: float = 0.1
    delta_max: float = 4.0
    profile: InterferenceProfile = field(default_factory=lambda: InterferenceProfile.constant(1.0))
    profile2: InterferenceProfile | None = None
    inter_tol_w: float | None = None     # default 1e-8 * p_max
    intra_tol_frac: float = 1e-9         # split tolerance as a fraction of p_k
    enforce_min_rate_split: bool = True

    def __post_init__(self):
        if self.p_max_w <= 0:
            raise ValueError(f"p_max_w must be positive, got {self.p_max_w}")
        if self.alpha < 0 or self.delta_max < 0:
            raise ValueError("alpha and delta_max must be nonnegative")


@dataclass
class SolveResult:
    pairing: PairingAssignment
    allocation: PowerAllocation | None
    sum_rate: float
    user_rates: dict
    feasible: bool
    stage: str | None = None  # failing stage when infeasible


class _GroupArrays:
    """Column-wise numpy views of a list of groups with fused rho dispatch."""

    def __init__(self, groups):
        self.groups = list(groups)
        self.k = len(self.groups)
        self.gain = np.array([[u.link.gain for u in g.users] for g in self.groups])
        self.noise = np.array([[u.link.noise for u in g.users] for g in self.groups])
        self.min_rate = np.array([[u.min_rate for u in g.users] for g in self.groups])
        self.eta = np.array([g.eta for g in self.groups])
        self.pow2r = 2.0 ** self.min_rate
        self.profiles = [
            [g.profile for g in self.groups],
            [(g.profile2 or g.profile) for g in self.groups],
        ]
        uniq = {id(p) for col in self.profiles for p in col}
        self._fused = self.profiles[0][0] if len(uniq) == 1 else None

    def _dispatch(self, kernel, col: int, p):
        gain, noise = self.gain[:, col], self.noise[:, col]
        if p.ndim == 2:
            p = np.broadcast_to(p, (self.k, p.shape[-1]))
            gain, noise = gain[:, None], noise[:, None]
        plan = {}
        for idx, prof in enumerate(self.profiles[col]):
            plan.setdefault(id(prof), (prof, []))[1].append(idx)
        if len(plan) == 1:
            return kernel(self.profiles[col][0], p, gain, noise)
        out = np.empty(p.shape)
        for prof, rows in plan.values():
            rows = np.asarray(rows)
            out[rows] = kernel(prof, p[rows], gain[rows], noise[rows])
        return out

    def _pair_eval(self, kernel, p):
        """Evaluate a rho kernel for both receivers; returns (val1, val2)."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 2:
            p = np.broadcast_to(p, (self.k, p.shape[-1]))
        if self._fused is not None:
            stacked_p = np.concatenate([p, p], axis=0)
            if p.ndim == 2:
                gain = np.concatenate([self.gain[:, 0], self.gain[:, 1]])[:, None]
                noise = np.concatenate([self.noise[:, 0], self.noise[:, 1]])[:, None]
            else:
                gain = np.concatenate([self.gain[:, 0], self.gain[:, 1]])
                noise = np.concatenate([self.noise[:, 0], self.noise[:, 1]])
            out = kernel(self._fused, stacked_p, gain, noise)
            return out[: self.k], out[self.k :]
        return self._dispatch(kernel, 0, p), self._dispatch(kernel, 1, p)

    def rho_pair(self, p):
        return self._pair_eval(_rho_kernel, p)

    def rho_prime_pair(self, p):
        p = np.asarray(p, dtype=float)
        safe = np.maximum(p, np.finfo(float).tiny)
        d1, d2 = self._pair_eval(_rho_derivative_kernel, safe)
        if np.any(p <= 0):
            zero = p <= 0
            d1 = np.where(zero, 0.0, d1)
            d2 = np.where(zero, 0.0, d2)
        return d1, d2

    def rho_and_prime_pair(self, p):
        """(rho1, rho2, rho1', rho2') with one fused table lookup on the fast path."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 2:
            p = np.broadcast_to(p, (self.k, p.shape[-1]))
        if self._fused is None or self._fused.kind != "table":
            r1, r2 = self.rho_pair(p)
            d1, d2 = self.rho_prime_pair(p)
            return r1, r2, d1, d2
        safe = np.maximum(p, np.finfo(float).tiny)
        h = np.maximum(1e-9, 1e-4 * safe)
        lo = np.maximum(safe - h, np.finfo(float).tiny)
        stacked_p = np.concatenate([p, safe + h, lo], axis=0)
        stacked_p = np.concatenate([stacked_p, stacked_p], axis=0)
        if p.ndim == 2:
            gain = np.concatenate(
                [np.tile(self.gain[:, 0], 3), np.tile(self.gain[:, 1], 3)]
            )[:, None]
            noise = np.concatenate(
                [np.tile(self.noise[:, 0], 3), np.tile(self.noise[:, 1], 3)]
            )[:, None]
        else:
            gain = np.concatenate([np.tile(self.gain[:, 0], 3), np.tile(self.gain[:, 1], 3)])
            noise = np.concatenate([np.tile(self.noise[:, 0], 3), np.tile(self.noise[:, 1], 3)])
        out = _rho_kernel(self._fused, stacked_p, gain, noise)
        k = self.k
        r1, up1, dn1 = out[:k], out[k : 2 * k], out[2 * k : 3 * k]
        r2, up2, dn2 = out[3 * k : 4 * k], out[4 * k : 5 * k], out[5 * k :]
        denom = (safe + h) - lo
        d1 = (up1 - dn1) / denom
        d2 = (up2 - dn2) / denom
        if np.any(p <= 0):
            zero = p <= 0
            d1 = np.where(zero, 0.0, d1)
            d2 = np.where(zero, 0.0, d2)
        return r1, r2, d1, d2

    def rho_cols(self, p_cols):
        """rho for each user column at column-specific powers; p_cols is (K, 2)."""
        p_cols = np.asarray(p_cols, dtype=float)
        if self._fused is not None:
            pp = np.concatenate([p_cols[:, 0], p_cols[:, 1]])
            gain = np.concatenate([self.gain[:, 0], self.gain[:, 1]])
            noise = np.concatenate([self.noise[:, 0], self.noise[:, 1]])
            out = _rho_kernel(self._fused, pp, gain, noise)
            return np.column_stack([out[: self.k], out[self.k :]])
        return np.column_stack(
            [
                self._dispatch(_rho_kernel, 0, p_cols[:, 0]),
                self._dispatch(_rho_kernel, 1, p_cols[:, 1]),
            ]
        )

    def take(self, rows) -> "_GroupArrays":
        sub = object.__new__(_GroupArrays)
        sub.groups = [self.groups[i] for i in rows]
        sub.k = len(rows)
        sub.gain = self.gain[rows]
        sub.noise = self.noise[rows]
        sub.min_rate = self.min_rate[rows]
        sub.eta = self.eta[rows]
        sub.pow2r = self.pow2r[rows]
        sub.profiles = [[col[i] for i in rows] for col in self.profiles]
        sub._fused = self._fused
        return sub


def _pair_rate_terms(arrs: _GroupArrays, p, eta=None, with_derivative=True):
    """Per-group sum rate and its derivative in the group power at fixed fractions.

    ``p`` may be (K,) or (K, G); eta defaults to the stored fractions.
    The derivative is d(r1 + r2)/dp in bits/s/Hz per watt.
    """
    p = np.asarray(p, dtype=float)
    eta = arrs.eta if eta is None else np.asarray(eta, dtype=float)
    if p.ndim == 2:
        e1, e2 = eta[:, 0][:, None], eta[:, 1][:, None]
        g1, g2 = arrs.gain[:, 0][:, None], arrs.gain[:, 1][:, None]
        n1, n2 = arrs.noise[:, 0][:, None], arrs.noise[:, 1][:, None]
    else:
        e1, e2 = eta[..., 0], eta[..., 1]
        g1, g2 = arrs.gain[:, 0], arrs.gain[:, 1]
        n1, n2 = arrs.noise[:, 0], arrs.noise[:, 1]
    if with_derivative:
        rho1, rho2, rp1, rp2 = arrs.rho_and_prime_pair(p)
    else:
        rho1, rho2 = arrs.rho_pair(p)
    d1 = rho1 * e2 * p * g1 + n1
    d2 = rho2 * e1 * p * g2 + n2
    s1 = e1 * p * g1 / d1
    s2 = e2 * p * g2 / d2
    rate = np.log2(1.0 + s1) + np.log2(1.0 + s2)
    if not with_derivative:
        return rate, None
    ds1 = e1 * g1 * (n1 - rp1 * e2 * g1 * p * p) / (d1 * d1)
    ds2 = e2 * g2 * (n2 - rp2 * e1 * g2 * p * p) / (d2 * d2)
    deriv = (ds1 / (1.0 + s1) + ds2 / (1.0 + s2)) / _LN2
    return rate, deriv


def _stationarity_lhs(arrs: _GroupArrays, p, mu: float, eta=None):
    """Stationarity expression d(r1+r2)/dp / ln2 - mu (zero at a candidate)."""
    _, deriv = _pair_rate_terms(arrs, p, eta=eta)
    return deriv / _LN2 - mu


def _min_rate_fixed_points(arrs: _GroupArrays, p_start=None, damping=0.5,
                           rel_tol=1e-8, max_iter=200):
    """Solve both users' rate-binding group powers by damped fixed point.

    Returns a (K, 2) array; raises MinRateInfeasible when a denominator
    turns nonpositive and ConvergenceError when iteration stalls.
    """
    t = arrs.pow2r - 1.0                     # (K, 2): 2^R - 1
    eta_self = arrs.eta
    eta_other = arrs.eta[:, ::-1]
    one_minus = 1.0 - arrs.pow2r
    active = t > 0
    if p_start is None:
        p = np.where(active, arrs.noise * t / (arrs.gain * np.maximum(eta_self, 1e-300)), 0.0)
    else:
        p = np.where(active, float(p_start), 0.0)
    live = active.copy()
    for _ in range(max_iter):
        if not np.any(live):
            break
        rho_here = arrs.rho_cols(p)
        denom = eta_self + eta_other * rho_here * one_minus
        bad = live & (denom <= 0)
        if np.any(bad):
            k_bad, col_bad = np.argwhere(bad)[0]
            raise MinRateInfeasible(
                f"group {k_bad}, user {col_bad + 1}: minimum rate unreachable "
                f"(rate-binding denominator {denom[k_bad, col_bad]:.3e} <= 0)"
            )
        target = arrs.noise * t / (arrs.gain * np.where(denom > 0, denom, 1.0))
        new_p = np.where(live, (1.0 - damping) * p + damping * target, p)
        step = np.abs(new_p - p) / np.maximum(np.abs(new_p), np.finfo(float).tiny)
        p = new_p
        live = live & (step >= rel_tol)
    else:
        bad_rows = sorted({int(r) for r, _ in np.argwhere(live)})
        raise ConvergenceError(f"rate-binding fixed point stalled in groups {bad_rows}")
    if np.any(active):
        # one undamped polish step: exact for power-independent factors and
        # contraction-accurate otherwise
        rho_here = arrs.rho_cols(p)
        denom = eta_self + eta_other * rho_here * one_minus
        bad = active & (denom <= 0)
        if np.any(bad):
            k_bad, col_bad = np.argwhere(bad)[0]
            raise MinRateInfeasible(
                f"group {k_bad}, user {col_bad + 1}: minimum rate unreachable "
                f"(rate-binding denominator {denom[k_bad, col_bad]:.3e} <= 0)"
            )
        p = np.where(active, arrs.noise * t / (arrs.gain * np.where(denom > 0, denom, 1.0)), p)
    return p


def extreme_point_min_rate(group: Group, which_user: int, p_guess: float) -> float:
    """Group power at which ``which_user``'s minimum-rate constraint binds.

    Damped fixed-point iteration of the rate-binding equation under the
    group's stored power fractions. Raises MinRateInfeasible when the
    constraint is unreachable and ConvergenceError when iteration stalls.
    """
    if which_user not in (1, 2):
        raise ValueError("which_user must be 1 or 2")
    if p_guess <= 0:
        raise ValueError("p_guess must be positive")
    # only the requested user's constraint matters here; silence the partner
    users = list(group.users)
    other = 2 - which_user
    users[other] = UserTerminal(
        id=users[other].id, link=users[other].link, min_rate=0.0,
        frame_time=users[other].frame_time,
    )
    probe = Group(users=tuple(users), profile=group.profile, eta=group.eta, profile2=group.profile2)
    arrs = _GroupArrays([probe])
    solved = _min_rate_fixed_points(arrs, p_start=p_guess)
    return float(solved[0, which_user - 1])


def extreme_point_stationary(group: Group, mu: float, bracket) -> float | None:
    """Root of the pair-rate stationarity condition inside ``bracket``.

    Scans a log-spaced grid for a sign change of d(r1+r2)/dp/ln2 - mu, then
    bisects; returns None when the expression never crosses zero on the
    bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0 < lo < hi):
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    arrs = _GroupArrays([group])
    grid = np.geomspace(lo, hi, 96)
    vals = _stationarity_lhs(arrs, grid[None, :], mu)[0]
    sign = vals >= 0
    change = np.flatnonzero(sign[:-1] != sign[1:])
    if change.size == 0:
        return None
    a, b = grid[change[0]], grid[change[0] + 1]
    fa = vals[change[0]]
    for _ in range(80):
        mid = 0.5 * (a + b)
        fm = float(_stationarity_lhs(arrs, np.array([mid]), mu)[0])
        if (fm >= 0) == (fa >= 0):
            a, fa = mid, fm
        else:
            b = mid
        if (b - a) <= 1e-14 * max(b, 1.0):
            break
    return float(0.5 * (a + b))


class _WaterFiller:
    """Shared state of one group-level allocation: dense stationarity curves."""

    def __init__(self, arrs: _GroupArrays, p_max: float, p_req: np.ndarray):
        self.arrs = arrs
        self.p_max = p_max
        self.p_req = p_req
        self.grid = np.geomspace(1e-6 * p_max, p_max, _GRID_N)
        _, deriv = _pair_rate_terms(arrs, self.grid[None, :])
        self.f_grid = deriv / _LN2          # (K, N) stationarity curve samples

    def _locate(self, mu):
        """First high-to-low crossing cell of each group's sampled curve."""
        pos = self.f_grid >= mu
        trans = pos[:, :-1] & ~pos[:, 1:]
        has_root = trans.any(axis=1)
        first = np.argmax(trans, axis=1)
        status = np.where(has_root, _ROOT, np.where(pos[:, -1], _CAP, _ZERO))
        return status, first

    def interp_totals(self, mu):
        """Group powers with roots linearly interpolated on the sampled curve."""
        status, first = self._locate(mu)
        p3 = np.where(status == _CAP, self.grid[-1], 0.0)
        rows = np.flatnonzero(status == _ROOT)
        if rows.size:
            f0 = self.f_grid[rows, first[rows]]
            f1 = self.f_grid[rows, first[rows] + 1]
            t = (f0 - mu) / np.maximum(f0 - f1, np.finfo(float).tiny)
            p3[rows] = self.grid[first[rows]] * (1.0 - t) + self.grid[first[rows] + 1] * t
        return np.maximum(self.p_req, p3), status

    def exact_totals(self, mu, n_bisect=12):
        """Group powers with roots refined inside their sampled cells.

        A short lockstep bisection shrinks the cell, then one secant step on
        the tracked endpoint values pins the root far below the bisection
        width (the curve is smooth inside a cell).
        """
        status, first = self._locate(mu)
        p3 = np.where(status == _CAP, self.grid[-1], 0.0)
        rows = np.flatnonzero(status == _ROOT)
        if rows.size:
            a = self.grid[first[rows]].copy()
            b = self.grid[first[rows] + 1].copy()
            fa = self.f_grid[rows, first[rows]] - mu
            fb = self.f_grid[rows, first[rows] + 1] - mu
            sub = self.arrs.take(rows)
            for _ in range(n_bisect):
                mid = 0.5 * (a + b)
                fm = _stationarity_lhs(sub, mid, mu)
                go_left = fm < 0
                b = np.where(go_left, mid, b)
                fb = np.where(go_left, fm, fb)
                a = np.where(go_left, a, mid)
                fa = np.where(go_left, fa, fm)
            spread = fa - fb
            t = np.where(spread > 0, fa / np.maximum(spread, np.finfo(float).tiny), 0.5)
            p3[rows] = a + (b - a) * np.minimum(np.maximum(t, 0.0), 1.0)
        return np.maximum(self.p_req, p3), status


def inter_group_allocate(groups, p_max: float, tol: float | None = None) -> PowerAllocation:
    """Split the budget across groups by bisection on the water level.

    Every group power is the largest of its two rate-binding fixed points
    and the stationary point at the current multiplier, all under an equal
    intra-pair split. Infeasibility (minimum rates unreachable, or their
    power demand exceeding the budget) is reported on the returned
    allocation rather than raised.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("need at least one group")
    if p_max <= 0:
        raise ValueError(f"p_max must be positive, got {p_max}")
    tol = 1e-8 * p_max if tol is None else float(tol)
    arrs = _GroupArrays(groups)
    k = arrs.k

    def failure(status: str) -> PowerAllocation:
        return PowerAllocation(
            group_totals=np.zeros(k),
            splits=np.zeros((k, 2)),
            mu=float("nan"),
            lambdas=np.zeros((k, 2)),
            feasible=False,
            budget_exhausted=False,
            status=status,
        )

    try:
        binding = _min_rate_fixed_points(arrs)
    except MinRateInfeasible as exc:
        return failure(f"min-rate infeasible: {exc}")
    p_req = binding.max(axis=1)
    if p_req.sum() > p_max * (1.0 + 1e-12):
        return failure(
            f"min-rate power demand {p_req.sum():.6g} W exceeds budget {p_max:.6g} W"
        )

    wf = _WaterFiller(arrs, p_max, p_req)

    p_k0, status0 = wf.interp_totals(0.0)
    if p_k0.sum() <= p_max - tol:
        p_k0, status0 = wf.exact_totals(0.0)
        if p_k0.sum() <= p_max - tol:
            # even a zero water level cannot spend the budget: rates saturate
            lam = _recover_lambdas(arrs, p_k0, p_req, 0.0, binding)
            return PowerAllocation(
                group_totals=p_k0,
                splits=np.column_stack([p_k0 / 2.0, p_k0 / 2.0]),
                mu=0.0,
                lambdas=lam,
                feasible=True,
                budget_exhausted=False,
                status="budget slack at zero water level",
            )

    # upper bracket from the derivative at a vanishing power, doubled to hold
    _, d_small = _pair_rate_terms(arrs, np.full(k, p_max / k * 1e-3))
    mu_hi = max(float(np.max(d_small / _LN2)), 1e-12)
    for _ in range(200):
        if wf.interp_totals(mu_hi)[0].sum() <= p_max:
            break
        mu_hi *= 2.0
    else:
        return failure("could not bracket the water level")

    # phase 1: bisection on the interpolated curves
    mu_lo = 0.0
    mu = mu_hi
    for _ in range(80):
        mu = 0.5 * (mu_lo + mu_hi)
        total = wf.interp_totals(mu)[0].sum()
        if abs(total - p_max) < 0.5 * tol:
            break
        if total > p_max:
            mu_lo = mu
        else:
            mu_hi = mu
        if (mu_hi - mu_lo) <= 1e-16 * max(mu_hi, 1e-300):
            break

    # phase 2: secant polish with exactly-refined roots, bisection-guarded
    b_lo, b_hi = 0.0, None  # totals(b_lo) > p_max >= totals(b_hi)
    prev = None
    p_k, status = wf.exact_totals(mu)
    for _ in range(40):
        total = p_k.sum()
        if abs(total - p_max) < tol:
            break
        if total > p_max:
            b_lo = mu
        else:
            b_hi = mu
        if prev is not None and abs(total - prev[1]) > 0:
            mu_next = mu - (total - p_max) * (mu - prev[0]) / (total - prev[1])
        else:
            mu_next = None
        in_bracket = (
            mu_next is not None
            and mu_next > b_lo
            and (b_hi is None or mu_next < b_hi)
        )
        prev = (mu, total)
        if in_bracket:
            mu = mu_next
        elif b_hi is None:
            mu = max(2.0 * mu, 1e-12)
        else:
            mu = 0.5 * (b_lo + b_hi)
        p_k, status = wf.exact_totals(mu)
    exhausted = abs(p_k.sum() - p_max) < max(tol, 1e-9 * p_max)

    # groups capped at the bracket top pin the multiplier to their own
    # derivative (single-group full-budget case)
    stationary_active = p_k > p_req * (1.0 + 1e-12)
    capped = stationary_active & (status == _CAP)
    if np.any(capped) and not np.any(stationary_active & (status == _ROOT)):
        _, d_cap = _pair_rate_terms(arrs, p_k)
        mu = float(np.min((d_cap / _LN2)[capped]))

    lam = _recover_lambdas(arrs, p_k, p_req, mu, binding)
    return PowerAllocation(
        group_totals=p_k,
        splits=np.column_stack([p_k / 2.0, p_k / 2.0]),
        mu=float(mu),
        lambdas=lam,
        feasible=True,
        budget_exhausted=bool(exhausted),
        status="ok" if exhausted else "budget not exhausted within tolerance",
    )


def _recover_lambdas(arrs: _GroupArrays, p_k, p_req, mu: float, binding) -> np.ndarray:
    """Min-rate multipliers from active-constraint detection.

    Where the group sits on its rate-binding floor, the binding user's
    multiplier is solved from the stationarity row (the other is zero);
    elsewhere both are zero.
    """
    lam = np.zeros((arrs.k, 2))
    at_floor = (p_k <= p_req * (1.0 + 1e-9)) & (p_req > 0)
    if not np.any(at_floor):
        return lam
    which = np.argmax(binding, axis=1)
    _, deriv = _pair_rate_terms(arrs, p_k)
    eq21 = deriv / _LN2
    r1, r2 = arrs.rho_pair(p_k)
    rp1, rp2 = arrs.rho_prime_pair(p_k)
    rho_cols = np.column_stack([r1, r2])
    rhop_cols = np.column_stack([rp1, rp2])
    p_other = arrs.eta[:, ::-1] * p_k[:, None]
    coeff = arrs.gain * (
        (1.0 - arrs.pow2r) * (arrs.eta[:, ::-1] * rho_cols + rhop_cols * p_other)
        + arrs.eta
    )
    for row in np.flatnonzero(at_floor):
        col = which[row]
        a = coeff[row, col]
        if a > 0:
            lam[row, col] = max(0.0, (mu - eq21[row]) / a)
    return lam


def intra_group_allocate(group: Group, p_k: float, tol: float, interval=None):
    """Best intra-pair split of a fixed group power.

    Maximizes the pair sum rate over the first user's share with the
    interference factors frozen at the group total, via a coarse bracket
    scan followed by golden-section refinement to width ``tol``. The
    default search interval is the full [0, p_k]; callers may restrict it.
    """
    if p_k <= 0:
        raise ValueError(f"p_k must be positive, got {p_k}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = (0.0, p_k) if interval is None else (float(interval[0]), float(interval[1]))
    if not (0.0 <= lo <= hi <= p_k * (1 + 1e-12)):
        raise ValueError(f"invalid split interval {interval} for p_k={p_k}")
    arrs = _GroupArrays([group])
    p1 = _intra_split_vec(arrs, np.array([p_k]), np.array([lo]), np.array([hi]), np.array([tol]))[0]
    return float(p1), float(p_k - p1)


def _intra_objective(arrs: _GroupArrays, p_k, rho1, rho2, p1):
    p2 = p_k - p1
    g1, g2 = arrs.gain[:, 0], arrs.gain[:, 1]
    n1, n2 = arrs.noise[:, 0], arrs.noise[:, 1]
    s1 = p1 * g1 / (rho1 * p2 * g1 + n1)
    s2 = p2 * g2 / (rho2 * p1 * g2 + n2)
    return np.log2(1.0 + s1) + np.log2(1.0 + s2)


def _intra_split_vec(arrs: _GroupArrays, p_k, lo, hi, tol, n_scan: int = 33):
    rho1, rho2 = arrs.rho_pair(p_k)

    def j(p1):
        return _intra_objective(arrs, p_k, rho1, rho2, p1)

    width = hi - lo
    degenerate = width <= tol
    mid = 0.5 * (lo + hi)
    # the pair objective can lose concavity in interference-limited regimes;
    # the coarse scan below keeps the golden section on the global basin
    j_lo, j_mid, j_hi = j(lo), j(mid), j(hi)
    non_concave = j_mid < 0.5 * (j_lo + j_hi) - 1e-12 * np.maximum(1.0, np.abs(j_mid))
    if np.any(non_concave):
        logger.debug(
            "intra-group objective not midpoint-concave for %d group(s)",
            int(np.sum(non_concave)),
        )

    ts = np.linspace(0.0, 1.0, n_scan)
    cand = lo[:, None] + width[:, None] * ts[None, :]
    vals = np.stack([j(cand[:, i]) for i in range(n_scan)], axis=1)
    best = np.argmax(vals, axis=1)
    a = lo + width * ts[np.maximum(best - 1, 0)]
    b = lo + width * ts[np.minimum(best + 1, n_scan - 1)]

    span = float(np.max((b - a) / np.maximum(tol, np.finfo(float).tiny), initial=1.0))
    n_iter = int(np.ceil(np.log(max(span, 1.0)) / -np.log(_PHI))) + 1
    x1 = b - _PHI * (b - a)
    x2 = a + _PHI * (b - a)
    f1, f2 = j(x1), j(x2)
    for _ in range(max(n_iter, 1)):
        pick_left = f1 >= f2
        b = np.where(pick_left, x2, b)
        a = np.where(pick_left, a, x1)
        x1_new = np.where(pick_left, b - _PHI * (b - a), x2)
        x2_new = np.where(pick_left, x1, a + _PHI * (b - a))
        x1, x2 = x1_new, x2_new
        f_old1, f_old2 = f1, f2
        f1 = np.where(pick_left, j(x1), f_old2)
        f2 = np.where(pick_left, f_old1, j(x2))
    out = 0.5 * (a + b)
    out = np.where(degenerate, np.minimum(np.maximum(mid, lo), hi), out)
    out = np.minimum(np.maximum(out, lo), hi)
    # boundary optima are returned exactly: golden section can only approach
    # an endpoint to within its width, which a steep objective turns into a
    # visible rate gap
    j_out = j(out)
    out = np.where(j(hi) > j_out, hi, out)
    out = np.where(j(lo) > np.maximum(j_out, j(hi)), lo, out)
    return out


def kkt_residuals(groups, alloc: PowerAllocation, p_max: float) -> KKTReport:
    """First-order optimality residuals of an allocation with its duals.

    Raw residuals keep physical units (watts, rate); normalized ones are
    scaled by the natural magnitude of each condition. Groups at exactly
    zero power bind the nonnegativity constraint, whose multiplier is not
    modeled; their stationarity residual reflects that boundary honestly.
    """
    arrs = _GroupArrays(groups)
    p_k = np.asarray(alloc.group_totals, dtype=float)
    splits = np.asarray(alloc.splits, dtype=float)
    lam = np.asarray(alloc.lambdas, dtype=float)
    mu = float(alloc.mu)
    eta = np.where(p_k[:, None] > 0, splits / np.maximum(p_k, np.finfo(float).tiny)[:, None], 0.5)

    _, deriv = _pair_rate_terms(arrs, p_k, eta=eta)
    eq21 = deriv / _LN2
    r1, r2 = arrs.rho_pair(p_k)
    rp1, rp2 = arrs.rho_prime_pair(p_k)
    rho_cols = np.column_stack([r1, r2])
    rhop_cols = np.column_stack([rp1, rp2])
    p_other = splits[:, ::-1]
    coeff = arrs.gain * (
        (1.0 - arrs.pow2r) * (eta[:, ::-1] * rho_cols + rhop_cols * p_other) + eta
    )
    stationarity = np.abs(eq21 + (lam * coeff).sum(axis=1) - mu)
    stat_norm = stationarity / np.maximum(
        np.maximum(np.abs(eq21), abs(mu)), 1e-12
    )

    # rate-constraint slack in the linearized form used by the multiplier system
    interference = rho_cols * p_other * arrs.gain
    slack = (splits * arrs.gain + interference + arrs.noise) - arrs.pow2r * (interference + arrs.noise)
    rate_comp = np.abs(lam * slack)
    scale = arrs.pow2r * (interference + arrs.noise)
    rate_comp_norm = np.where(lam > 0, np.abs(slack) / scale, 0.0)

    total = float(p_k.sum())
    budget_comp = abs(mu * (p_max - total))
    budget_comp_norm = abs(p_max - total) / p_max if mu > 0 else 0.0
    power_excess = max(0.0, total - p_max)

    sinr = splits * arrs.gain / (interference + arrs.noise)
    rates = np.log2(1.0 + sinr)
    rate_violation = np.maximum(0.0, arrs.min_rate - rates)
    rate_violation_norm = rate_violation / np.maximum(arrs.min_rate, 1.0)

    negative_power = max(0.0, float(-np.min(splits, initial=0.0)))
    dual_negative = max(0.0, -mu, float(-np.min(lam, initial=0.0)))

    return KKTReport(
        stationarity=stationarity,
        stationarity_norm=stat_norm,
        rate_comp=rate_comp,
        rate_comp_norm=rate_comp_norm,
        budget_comp=budget_comp,
        budget_comp_norm=budget_comp_norm,
        power_excess=power_excess,
        rate_violation=rate_violation,
        rate_violation_norm=rate_violation_norm,
        negative_power=negative_power,
        dual_negative=dual_negative,
    )


def _min_rate_split_interval(arrs: _GroupArrays, p_k):
    """Feasible range of the first user's share keeping both min rates."""
    rho1, rho2 = arrs.rho_pair(p_k)
    t = arrs.pow2r - 1.0
    g1, g2 = arrs.gain[:, 0], arrs.gain[:, 1]
    n1, n2 = arrs.noise[:, 0], arrs.noise[:, 1]
    lo = t[:, 0] * (rho1 * p_k * g1 + n1) / (g1 * (1.0 + t[:, 0] * rho1))
    p2_min = t[:, 1] * (rho2 * p_k * g2 + n2) / (g2 * (1.0 + t[:, 1] * rho2))
    hi = p_k - p2_min
    lo = np.minimum(np.maximum(lo, 0.0), p_k)
    hi = np.minimum(np.maximum(hi, 0.0), p_k)
    bad = lo > hi
    if np.any(bad):
        # numerically empty interval: fall back to the equal split
        lo = np.where(bad, p_k / 2.0, lo)
        hi = np.where(bad, p_k / 2.0, hi)
    return lo, hi


def solve(users, config: SolverConfig) -> SolveResult:
    """Pairing followed by group-level and pair-level power allocation.

    Users are matched under fixed equal-split powers, the budget is spread
    across the resulting groups, and each group's split is then reoptimized
    (restricted to its min-rate-feasible range unless disabled). Returns
    the realized system sum rate; infeasibility carries the failing stage.
    """
    users = list(users)
    if len(users) < 2 or len(users) % 2 != 0:
        raise ValueError(f"user count must be even and >= 2, got {len(users)}")
    per_user_power = config.p_max_w / len(users)
    assignment = pair_users(users, per_user_power, config.profile, config.alpha, config.delta_max)
    if not assignment.feasible:
        return SolveResult(
            pairing=assignment,
            allocation=None,
            sum_rate=float("nan"),
            user_rates={},
            feasible=False,
            stage="pairing",
        )

    by_id = {u.id: u for u in users}
    groups = [
        Group(users=(by_id[a], by_id[b]), profile=config.profile, profile2=config.profile2)
        for a, b in assignment.pairs
    ]
    alloc = inter_group_allocate(groups, config.p_max_w, tol=config.inter_tol_w)
    if not alloc.feasible:
        return SolveResult(
            pairing=assignment,
            allocation=alloc,
            sum_rate=float("nan"),
            user_rates={},
            feasible=False,
            stage="power",
        )

    arrs = _GroupArrays(groups)
    p_k = alloc.group_totals
    p1 = np.zeros_like(p_k)
    rows = np.flatnonzero(p_k > 0)
    if rows.size:
        sub = arrs.take(rows)
        if config.enforce_min_rate_split:
            lo, hi = _min_rate_split_interval(sub, p_k[rows])
        else:
            lo, hi = np.zeros(rows.size), p_k[rows].copy()
        tol = np.maximum(config.intra_tol_frac * p_k[rows], 1e-18)
        p1[rows] = _intra_split_vec(sub, p_k[rows], lo, hi, tol)
    splits = np.column_stack([p1, p_k - p1])
    alloc.splits = splits

    rho1, rho2 = arrs.rho_pair(p_k)
    rates = np.column_stack(
        [
            np.log2(1.0 + splits[:, 0] * arrs.gain[:, 0]
                    / (rho1 * splits[:, 1] * arrs.gain[:, 0] + arrs.noise[:, 0])),
            np.log2(1.0 + splits[:, 1] * arrs.gain[:, 1]
                    / (rho2 * splits[:, 0] * arrs.gain[:, 1] + arrs.noise[:, 1])),
        ]
    )
    user_rates = {}
    for (a, b), r in zip(assignment.pairs, rates):
        user_rates[a] = float(r[0])
        user_rates[b] = float(r[1])
    if np.any(arrs.min_rate - rates > 1e-6):
        return SolveResult(
            pairing=assignment,
            allocation=alloc,
            sum_rate=float("nan"),
            user_rates=user_rates,
            feasible=False,
            stage="power",
        )
    return SolveResult(
        pairing=assignment,
        allocation=alloc,
        sum_rate=float(rates.sum()),
        user_rates=user_rates,
        feasible=True,
        stage=None,
    )
