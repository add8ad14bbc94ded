"""Discounted-UCB allocation, its potential function, and baseline policies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matroid as mat
from .core import (
    Allocation,
    ConfigurationError,
    InputError,
    Instance,
    PreconditionError,
    RngHandle,
    UtilityLedger,
)
from .env import ValueStream
from .estimator import UcbState, default_c_rad

EPS_FLOOR = 1e-3
EPS_CEIL = 0.5

ALGORITHM1 = "algorithm1"
ALGORITHM1_MATROID = "algorithm1_matroid"
UCB_GREEDY = "ucb_greedy_no_discount"
ROUND_ROBIN = "round_robin"
FIXED = "fixed_allocation"
ORACLE = "oracle_discounted"
POLICIES = (ALGORITHM1, ALGORITHM1_MATROID, UCB_GREEDY, ROUND_ROBIN, FIXED, ORACLE)
TRACKS_POTENTIAL = (ALGORITHM1, ALGORITHM1_MATROID, ORACLE)

SCHEDULES = ("manual", "log_over_sqrt", "sqrt_n_log_n")


@dataclass(frozen=True)
class PolicyConfig:
    """Tuning for a run.

    ``utility_source="observed"`` credits agents with realized values instead
    of UCBs when discounting; it is an ablation, not the reference rule.
    """

    epsilon: float = 0.1
    epsilon_schedule: str = "manual"
    clip_ucb: bool = True
    tie_break: str = "lowest_agent_index"
    c_rad: float | None = None
    utility_source: str = "ucb"

    def __post_init__(self):
        if self.epsilon_schedule not in SCHEDULES:
            raise ConfigurationError(f"epsilon_schedule must be one of {SCHEDULES}")
        if self.epsilon_schedule == "manual" and not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.tie_break != "lowest_agent_index":
            raise ConfigurationError("only lowest_agent_index tie-breaking is supported")
        if self.utility_source not in ("ucb", "observed"):
            raise ConfigurationError("utility_source must be 'ucb' or 'observed'")
        if self.c_rad is not None and self.c_rad <= 0:
            raise ConfigurationError("c_rad must be positive")


@dataclass(frozen=True)
class Policy:
    name: str
    owner: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ConfigurationError(f"unknown policy {self.name!r}; choose from {POLICIES}")
        if (self.name == FIXED) != (self.owner is not None):
            raise ConfigurationError("fixed_allocation needs an owner list, other policies take none")

    @classmethod
    def parse(cls, spec) -> "Policy":
        """Accepts a Policy, a name, ``"fixed_allocation:0,1"`` or a mapping."""
        if isinstance(spec, Policy):
            return spec
        if isinstance(spec, dict):
            owner = spec.get("owner")
            return cls(spec["name"], None if owner is None else tuple(int(o) for o in owner))
        if isinstance(spec, str) and ":" in spec:
            name, rest = spec.split(":", 1)
            return cls(name, tuple(int(o) for o in rest.split(",")))
        return cls(str(spec))

    @property
    def label(self) -> str:
        if self.owner is None:
            return self.name
        return f"{self.name}:{','.join(map(str, self.owner))}"


def resolve_epsilon(schedule: str, n: int, m: int, T: int, p_star: float | None = None,
                    manual: float | None = None) -> float:
    """Turn a schedule name into a concrete epsilon clamped to [1e-3, 1/2]."""
    if schedule == "manual":
        if manual is None or not 0.0 < manual < 1.0:
            raise ConfigurationError(f"manual epsilon must lie in (0, 1), got {manual}")
        eps = manual
    elif schedule == "log_over_sqrt":
        if T <= n:
            raise ConfigurationError(f"log_over_sqrt schedule needs T > n (T={T}, n={n})")
        eps = math.log(T - n) / math.sqrt(T - n)
    elif schedule == "sqrt_n_log_n":
        if n < 2:
            raise ConfigurationError("sqrt_n_log_n schedule needs n >= 2 so that ln n > 0")
        if T < n:
            raise ConfigurationError(f"sqrt_n_log_n schedule needs T >= n (T={T}, n={n})")
        eps = math.sqrt(n * math.log(n) / T)
    else:
        raise ConfigurationError(f"unknown epsilon schedule {schedule!r}")
    return min(max(eps, EPS_FLOOR), EPS_CEIL)


def log_over_sqrt_applies(n: int, m: int, T: int, p_star: float) -> bool:
    """Whether T >= exp(2m/P*) + n, the horizon the log-over-sqrt schedule assumes."""
    if p_star <= 0:
        return False
    expo = 2.0 * m / p_star
    return expo < 700 and T >= math.exp(expo) + n


def init_phase_allocation(t: int, n: int, m: int) -> Allocation:
    """Round t (1-based) of the warm-up gives every item to agent t - 1."""
    if not 1 <= t <= n:
        raise PreconditionError(f"warm-up round {t} outside [1, {n}]")
    return Allocation((t - 1,) * m)


def _discount_log(u: np.ndarray, m: int, epsilon: float) -> np.ndarray:
    return u * (math.log1p(-epsilon) / m)


def choose_allocation(state: UcbState, ledger: UtilityLedger, cfg: PolicyConfig,
                      epsilon: float | None = None) -> Allocation:
    """Give each item to the agent with the largest discounted UCB.

    The objective separates over items, so the per-item argmax is a global
    maximizer. Scores are compared as ln(ucb) + (u_i / m) ln(1 - eps).
    """
    if np.any(state.counts < 1):
        raise PreconditionError("every (agent, item) cell needs a sample first")
    eps = cfg.epsilon if epsilon is None else epsilon
    m = state.shape[1]
    with np.errstate(divide="ignore"):
        score = np.log(state.ucb_matrix()) + _discount_log(ledger.ucb, m, eps)[:, None]
    return Allocation(np.argmax(score, axis=0))


@dataclass
class PotentialTracker:
    """Running potential sum_i (1-eps)^(S_i/m) (1 - eps P*/m)^(T-s) in log form.

    S_i is agent i's UCB reward accumulated after the warm-up rounds.
    """

    p_star: float
    epsilon: float
    T: int
    m: int
    init_rounds: int
    ucb_reward_sums: np.ndarray

    def __post_init__(self):
        if self.p_star <= 0:
            raise ConfigurationError("the potential needs P* > 0")
        if self.epsilon * self.p_star / self.m >= 1:
            raise ConfigurationError("the potential needs eps * P* / m < 1")
        self.ucb_reward_sums = np.asarray(self.ucb_reward_sums, dtype=float)

    @classmethod
    def start(cls, n: int, m: int, T: int, init_rounds: int, p_star: float, epsilon: float):
        return cls(p_star, epsilon, T, m, init_rounds, np.zeros(n))

    def add(self, rewards) -> None:
        rewards = np.asarray(rewards, dtype=float)
        if np.any(rewards < 0) or np.any(rewards > self.m + 1e-12):
            raise InputError("per-round UCB rewards must lie in [0, m]")
        self.ucb_reward_sums = self.ucb_reward_sums + rewards

    def log_value(self, s: int) -> float:
        if not self.init_rounds <= s <= self.T:
            raise InputError(f"s={s} outside [{self.init_rounds}, {self.T}]")
        terms = _discount_log(self.ucb_reward_sums, self.m, self.epsilon)
        return float(np.logaddexp.reduce(terms)) + (self.T - s) * math.log1p(
            -self.epsilon * self.p_star / self.m)


def potential(tracker: PotentialTracker, s: int) -> float:
    return math.exp(tracker.log_value(s))


@dataclass
class RunRecord:
    """Full trajectory of one run; cumulative arrays are indexed by round - 1."""

    policy: str
    T: int
    n: int
    m: int
    epsilon: float
    c_rad: float
    init_rounds: int
    owners: np.ndarray
    realized: np.ndarray
    expected: np.ndarray
    ucb: np.ndarray
    clean: np.ndarray
    log_phi: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ledger(self) -> UtilityLedger:
        return self.ledger_at(self.T)

    def ledger_at(self, t: int) -> UtilityLedger:
        if t == 0:
            return UtilityLedger.zeros(self.n)
        return UtilityLedger(self.realized[t - 1].copy(), self.expected[t - 1].copy(),
                             self.ucb[t - 1].copy(), t)

    @property
    def all_clean(self) -> bool:
        return bool(self.clean.all())

    @property
    def first_violation(self) -> int | None:
        bad = np.flatnonzero(~self.clean)
        return int(bad[0]) + 1 if bad.size else None

    def phi_monotone(self, tol: float = 1e-9) -> bool | None:
        """Whether log Phi never rises by more than tol; None without a trace."""
        if self.log_phi is None:
            return None
        return bool(np.all(np.diff(self.log_phi) <= tol))

    def allocation(self, t: int) -> Allocation:
        return Allocation(self.owners[t - 1])


def _matroid_warmup(n: int, m: int, oracle: mat.MatroidOracle) -> list[np.ndarray]:
    rounds = []
    for i in range(n):
        for e in range(m):
            if oracle.is_independent({mat.element_id(i, e, m)}):
                owner = np.full(m, -1)
                owner[e] = i
                rounds.append(owner)
    return rounds


def run_policy(inst: Instance, policy, cfg: PolicyConfig | None = None,
               rng: RngHandle | None = None, p_star: float | None = None,
               matroid: mat.MatroidOracle | None = None) -> RunRecord:
    """Simulate one policy for the instance's horizon.

    ``p_star`` enables the potential trace for the discounted policies;
    ``matroid`` is the per-agent constraint used by algorithm1_matroid.
    """
    cfg = cfg or PolicyConfig()
    policy = Policy.parse(policy)
    rng = rng or RngHandle(0)
    name = policy.name
    n, m, T = inst.n, inst.m, inst.T
    c_rad = cfg.c_rad if cfg.c_rad is not None else default_c_rad(n, m, T)
    eps = resolve_epsilon(cfg.epsilon_schedule, n, m, T, p_star, cfg.epsilon)
    cols = np.arange(m)

    warmup: list[np.ndarray] = []
    if name in (ALGORITHM1, UCB_GREEDY, ORACLE):
        if T < n:
            raise ConfigurationError(f"{name} needs T >= n for its warm-up (T={T}, n={n})")
        warmup = [np.full(m, i) for i in range(n)]
    elif name == ALGORITHM1_MATROID:
        if matroid is None:
            raise ConfigurationError("algorithm1_matroid needs a matroid")
        if matroid.ground_size != n * m:
            raise ConfigurationError("matroid ground set must be [n] x [m]")
        if T < n * m:
            raise ConfigurationError(f"algorithm1_matroid needs T >= m * n (T={T}, mn={n * m})")
        warmup = _matroid_warmup(n, m, matroid)
        item_side = mat.item_partition(n, m)
    elif name == FIXED:
        Allocation(policy.owner).validate(n, m)
        fixed_owner = np.array(policy.owner)
    init_rounds = len(warmup)

    track = p_star is not None and name in TRACKS_POTENTIAL and p_star > 0
    tracker = PotentialTracker.start(n, m, T, init_rounds, p_star, eps) if track else None
    log_phi = np.empty(T - init_rounds + 1) if track else None
    if track:
        log_phi[0] = tracker.log_value(init_rounds)
    phi_step = math.log1p(-eps * p_star / m) if track else 0.0
    lg = math.log1p(-eps) / m

    stream = ValueStream(inst, rng)
    means = inst.means
    with np.errstate(divide="ignore"):
        log_mu = np.log(means)
    counts = np.zeros((n, m), dtype=np.int64)
    sums = np.zeros((n, m))
    ucb = np.zeros((n, m))
    log_ucb = np.full((n, m), -np.inf)
    cell_ok = np.ones((n, m), dtype=bool)
    n_bad = 0
    u = np.zeros(n)
    real_c = np.zeros(n)
    exp_c = np.zeros(n)
    ucb_c = np.zeros(n)

    owners = np.empty((T, m), dtype=np.int64)
    realized = np.empty((T, n))
    expected = np.empty((T, n))
    ucb_hist = np.empty((T, n))
    clean = np.empty(T, dtype=bool)
    credit = name in TRACKS_POTENTIAL or name == UCB_GREEDY
    observed_credit = cfg.utility_source == "observed"

    for t in range(1, T + 1):
        vals = stream.round(t)
        if t <= init_rounds:
            owner = warmup[t - 1]
        elif name == ALGORITHM1:
            owner = np.argmax(log_ucb + (u * lg)[:, None], axis=0)
        elif name == UCB_GREEDY:
            owner = np.argmax(log_ucb, axis=0)
        elif name == ORACLE:
            owner = np.argmax(log_mu + (u * lg)[:, None], axis=0)
        elif name == ROUND_ROBIN:
            owner = (t - 1 + cols) % n
        elif name == FIXED:
            owner = fixed_owner
        else:
            disc = np.exp((u - u.min()) * lg)
            w = disc[:, None] * ucb
            chosen = mat.max_weight_common_independent(item_side, matroid, w.ravel())
            owner = np.array(mat.owners_from_set(chosen, n, m))

        if name == ALGORITHM1_MATROID:
            hit = owner >= 0
            rows, cs = owner[hit], cols[hit]
        else:
            rows, cs = owner, cols
        v = vals[rows, cs]
        real_c += np.bincount(rows, v, n)
        exp_c += np.bincount(rows, means[rows, cs], n)
        if credit and t > init_rounds:
            source = means if name == ORACLE else ucb
            xbar = np.bincount(rows, source[rows, cs], n)
            ucb_c += xbar
            u += np.bincount(rows, v, n) if observed_credit else xbar
            if track:
                log_phi[t - init_rounds] = (np.logaddexp.reduce(ucb_c * lg)
                                            + (T - t) * phi_step)

        counts[rows, cs] += 1
        sums[rows, cs] += v
        k = counts[rows, cs]
        vh = sums[rows, cs] / k
        r = np.sqrt(c_rad * vh / k) + c_rad / k
        new = vh + r
        if cfg.clip_ucb:
            new = np.minimum(new, 1.0)
        ucb[rows, cs] = new
        log_ucb[rows, cs] = np.log(new)
        ok = np.abs(means[rows, cs] - vh) <= r
        was = cell_ok[rows, cs]
        n_bad += int(np.count_nonzero(was & ~ok)) - int(np.count_nonzero(~was & ok))
        cell_ok[rows, cs] = ok

        owners[t - 1] = owner
        realized[t - 1] = real_c
        expected[t - 1] = exp_c
        ucb_hist[t - 1] = ucb_c
        clean[t - 1] = n_bad == 0

    return RunRecord(policy=policy.label, T=T, n=n, m=m, epsilon=eps, c_rad=c_rad,
                     init_rounds=init_rounds, owners=owners, realized=realized,
                     expected=expected, ucb=ucb_hist, clean=clean, log_phi=log_phi)
