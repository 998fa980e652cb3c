"""User pairing by preference-driven matching under a temporal-gap cap.

The preference value between two users is their pair sum rate (at fixed
equal-split powers) minus a weighted temporal gap. Because that value is
symmetric in the pair, a proposal dynamic with strict-improvement
acceptance always terminates in a matching with no mutually-improving
feasible pair; users whose every gap-feasible candidate is exhausted are
reported as unmatchable rather than silently dropped.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .semantic_rate import InterferenceProfile, Link, pair_sum_rate, rho_eval

__all__ = [
    "UserTerminal",
    "PairingAssignment",
    "temporal_gap",
    "preference_value",
    "preference_matrix",
    "build_preference_lists",
    "pair_users",
]


@dataclass(frozen=True)
class UserTerminal:
    """One downlink user with its channel, rate demand, and requested frame index."""

    id: int
    link: Link
    min_rate: float = 0.0
    frame_time: int = 0

    def __post_init__(self):
        if self.min_rate < 0:
            raise ValueError(f"min_rate must be >= 0, got {self.min_rate}")


@dataclass(frozen=True)
class PairingAssignment:
    """A matching of users into 2-user groups plus per-pair temporal gaps."""

    pairs: tuple        # ((id, id), ...) with the lower id first
    gaps: tuple         # per-pair temporal gap, aligned with pairs
    unmatched: tuple = ()
    feasible: bool = True

    def __post_init__(self):
        seen = [u for pair in self.pairs for u in pair] + list(self.unmatched)
        if len(seen) != len(set(seen)):
            raise ValueError("users may appear in at most one pair")
        if len(self.pairs) != len(self.gaps):
            raise ValueError("gaps must align with pairs")

    def partner_of(self, user_id: int) -> int | None:
        for a, b in self.pairs:
            if a == user_id:
                return b
            if b == user_id:
                return a
        return None


def temporal_gap(u: UserTerminal, v: UserTerminal) -> int:
    """Absolute difference of the two users' requested frame indices."""
    return abs(u.frame_time - v.frame_time)


def preference_value(
    u: UserTerminal,
    v: UserTerminal,
    p_u: float,
    p_v: float,
    profile: InterferenceProfile,
    alpha: float,
) -> float:
    """Pair sum rate minus alpha times the temporal gap."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return pair_sum_rate(p_u, p_v, profile, u.link, v.link) - alpha * temporal_gap(u, v)


def preference_matrix(users, power_per_user: float, profile: InterferenceProfile, alpha: float) -> np.ndarray:
    """All pairwise preference values; the diagonal is -inf.

    Under equal splits the group power is identical for every candidate
    pair, so each user's own rate term can be computed once and the pair
    value assembled additively.
    """
    gains = np.array([u.link.gain for u in users])
    noises = np.array([u.link.noise for u in users])
    frames = np.array([u.frame_time for u in users])
    group_power = 2.0 * power_per_user
    rho_own = rho_eval(profile, np.full(len(users), group_power), gains, noises)
    rates = np.log2(1.0 + power_per_user * gains / (rho_own * power_per_user * gains + noises))
    gaps = np.abs(frames[:, None] - frames[None, :])
    values = rates[:, None] + rates[None, :] - alpha * gaps
    np.fill_diagonal(values, -np.inf)
    return values


def build_preference_lists(users, powers: float, profile: InterferenceProfile, alpha: float) -> dict:
    """Per-user candidate ranking: descending preference value, ties by ascending id."""
    if len(users) < 2:
        raise ValueError("need at least 2 users to build preference lists")
    values = preference_matrix(users, powers, profile, alpha)
    ids = [u.id for u in users]
    lists = {}
    for i, u in enumerate(users):
        order = sorted((j for j in range(len(users)) if j != i), key=lambda j: (-values[i, j], ids[j]))
        lists[u.id] = [ids[j] for j in order]
    return lists


def pair_users(
    users,
    powers: float,
    profile: InterferenceProfile,
    alpha: float,
    delta_max: float,
) -> PairingAssignment:
    """Match users into pairs by iterated proposals under the gap cap.

    Users propose down their preference lists; a proposal to a matched user
    succeeds only when it strictly improves that user's preference value and
    respects the gap cap. Users dumped in the process restart their lists,
    and a matched user keeps proposing while better candidates remain, so
    the dynamic cannot settle on a matching that leaves two users mutually
    better off. Accepted proposals strictly raise the sorted vector of
    matched preference values, which bounds the number of re-matchings.
    """
    m = len(users)
    if m < 2 or m % 2 != 0:
        raise ValueError(f"user count must be even and >= 2, got {m}")
    if len({u.id for u in users}) != m:
        raise ValueError("user ids must be unique")
    by_index = sorted(range(m), key=lambda i: users[i].id)
    users = [users[i] for i in by_index]
    values = preference_matrix(users, powers, profile, alpha)
    frames = np.array([u.frame_time for u in users])
    gaps = np.abs(frames[:, None] - frames[None, :])

    prefs = [
        sorted((j for j in range(m) if j != i), key=lambda j: (-values[i, j], users[j].id))
        for i in range(m)
    ]
    partner = [None] * m
    pointer = [0] * m

    def val(i):
        return values[i, partner[i]] if partner[i] is not None else -np.inf

    queue = deque(range(m))
    in_queue = [True] * m
    budget = 16 * m * m * m + 64  # termination guard; the dynamic stops far earlier
    proposals = 0
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        while pointer[u] < m - 1:
            v = prefs[u][pointer[u]]
            if values[u, v] <= val(u):
                break  # everything further down is no better than the current match
            proposals += 1
            if proposals > budget:
                raise RuntimeError("pairing proposal budget exhausted")
            if gaps[u, v] > delta_max:
                pointer[u] += 1
                continue
            if partner[v] is None or values[u, v] > val(v):
                dumped = [w for w in (partner[u], partner[v]) if w is not None]
                if partner[u] is not None:
                    partner[partner[u]] = None
                if partner[v] is not None:
                    partner[partner[v]] = None
                partner[u], partner[v] = v, u
                for w in dumped:
                    pointer[w] = 0  # restart so newly worse-off users can be re-courted
                    if not in_queue[w]:
                        queue.append(w)
                        in_queue[w] = True
                if not in_queue[v]:  # the acceptor may still prefer someone above its new match
                    queue.append(v)
                    in_queue[v] = True
                break
            pointer[u] += 1

    pairs, gaps_out, seen = [], [], set()
    for i in range(m):
        if partner[i] is not None and i not in seen:
            j = partner[i]
            seen.update((i, j))
            a, b = sorted((users[i].id, users[j].id))
            pairs.append((a, b))
            gaps_out.append(int(gaps[i, j]))
    order = np.argsort([p[0] for p in pairs]) if pairs else []
    pairs = tuple(pairs[k] for k in order)
    gaps_out = tuple(gaps_out[k] for k in order)
    unmatched = tuple(sorted(users[i].id for i in range(m) if partner[i] is None))
    return PairingAssignment(
        pairs=pairs, gaps=gaps_out, unmatched=unmatched, feasible=not unmatched
    )
