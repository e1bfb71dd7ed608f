"""Quantitative attack analysis: catch-up races, cascades, robustness ratios.

The attack model is the classic block race: each new block belongs to the
attacker with probability q, to the honest majority with probability
p = 1 - q.  An attacker starting z blocks behind catches up with probability
min(1, (q/p)^z) - the gambler's-ruin closed form - and `simulate_attack`
estimates the same quantity by Monte Carlo so each side checks the other.

Per-trial randomness is counter-based: the draw for (trial i, step t) is a
64-bit hash of (seed, i, t).  Trials can therefore run in any order, in any
batch split, or in parallel, and still produce bit-identical results for a
fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence, Union

import numpy as np

DEFAULT_HORIZON = 10_000
DEFAULT_RATE = 1.0 / 600.0  # blocks per second; descriptive only

_MASK = (1 << 64) - 1
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_C_TRIAL = 0x9E3779B97F4A7C15
_C_STEP = 0xD1B54A32D192ED03
_C_SEED = 0x2545F4914F6CDD1D

Probability = Union[float, Fraction]


class SecurityError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class AttackParams:
    """Attack scenario: hash share q, deficit z, cascade depth n.

    The closed forms assume q < 0.5; parameters outside that range are
    still accepted (the simulator handles them) but `closed_form_valid`
    is False so callers can flag the regime.
    """

    q: float
    z: int
    n: int = 1
    rate: float = DEFAULT_RATE
    trials: int = 100_000
    seed: int = 0
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self) -> None:
        if not 0.0 <= self.q < 1.0:
            raise SecurityError(f"attacker share q must be in [0, 1), got {self.q}")
        if self.z < 0:
            raise SecurityError(f"confirmation depth z must be >= 0, got {self.z}")
        if self.n < 1:
            raise SecurityError(f"cascade depth n must be >= 1, got {self.n}")
        if self.trials < 1:
            raise SecurityError(f"trials must be >= 1, got {self.trials}")
        if self.horizon < 1:
            raise SecurityError(f"horizon must be >= 1, got {self.horizon}")
        if self.rate <= 0:
            raise SecurityError(f"mining rate must be positive, got {self.rate}")

    @property
    def closed_form_valid(self) -> bool:
        return self.q < 0.5


@dataclass(frozen=True, slots=True)
class SimResult:
    """Monte Carlo estimate with its binomial standard error.

    `truncated` counts runs still undecided at the horizon; the true
    probability lies within [estimate, estimate + truncated/trials].
    """

    estimate: float
    stderr: float
    trials: int
    seed: int
    successes: int
    truncated: int
    horizon: int

    @property
    def truncation_bound(self) -> float:
        return self.truncated / self.trials

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "trials": self.trials,
            "seed": self.seed,
            "successes": self.successes,
            "truncated": self.truncated,
            "truncation_bound": self.truncation_bound,
            "horizon": self.horizon,
        }


def catch_up_probability(q: float, z: int) -> float:
    """Chance an attacker z blocks behind ever erases the deficit.

    Biased random walk, attacker +1 with probability q, honest -1 with
    p = 1 - q: the hitting probability is (q/p)^z, capped at 1.  z = 0
    means the race is already level, so 1 regardless of q.
    """
    if not 0.0 <= q < 1.0:
        raise SecurityError(f"q must be in [0, 1), got {q}")
    if z < 0:
        raise SecurityError(f"z must be >= 0, got {z}")
    if z == 0:
        return 1.0
    if q == 0.0:
        return 0.0
    p = 1.0 - q
    if q >= p:
        return 1.0
    return (q / p) ** z


def cascade_breach_probability(p_malicious: Probability, n: int) -> Probability:
    """Chance of breaching all n levels of a vault cascade: p^n.

    Levels are assumed independent and identically distributed.  Pass a
    Fraction for exact arithmetic; floats stay floats.
    """
    if n < 1:
        raise SecurityError(f"cascade depth must be >= 1, got {n}")
    if not 0 <= p_malicious <= 1:
        raise SecurityError(f"probability must be in [0, 1], got {p_malicious}")
    return p_malicious**n


def epsilon_robustness_ratio(p_malicious: Probability, p_accepted: Probability) -> Probability:
    """Malicious-to-accepted probability ratio; below epsilon means robust."""
    if p_accepted == 0:
        raise SecurityError("acceptance probability of zero leaves the ratio undefined")
    return p_malicious / p_accepted


def model_robustness(per_height: Sequence[Probability] | Iterable[Probability]) -> float:
    """Average per-height malicious-acceptance probability across a run.

    The caller compares the mean against epsilon; with per-level breach
    probability below one half, deeper cascades drive this to zero.
    """
    values = list(per_height)
    if not values:
        raise SecurityError("need at least one per-height probability")
    for v in values:
        if not 0 <= v <= 1:
            raise SecurityError(f"probability out of range: {v}")
    return float(sum(values) / len(values))


# --- Monte Carlo ----------------------------------------------------------

def _draws(seed: int, ids: np.ndarray, step: int) -> np.ndarray:
    """64-bit mixed hash of (seed, trial id, step); splitmix64 finalizer."""
    offset = (step * _C_STEP + seed * _C_SEED + 0x632BE59BD9B4E019) & _MASK
    x = ids * np.uint64(_C_TRIAL)
    x += np.uint64(offset)
    x ^= x >> np.uint64(30)
    x *= _M1
    x ^= x >> np.uint64(27)
    x *= _M2
    x ^= x >> np.uint64(31)
    return x


def _threshold(q: float) -> np.uint64:
    return np.uint64(min(int(q * 2.0**64), _MASK))


def _margin(q: float, z: int) -> int | None:
    """Deficit at which the residual catch-up chance is below ~1e-12.

    Only meaningful in the subcritical regime q < p; at or above the
    critical point the walk is recurrent and no finite barrier is safe.
    """
    p = 1.0 - q
    if not 0.0 < q < p:
        return None
    excess = math.ceil(27.7 / math.log(p / q))
    return z + min(512, max(16, excess))


def simulate_attack(params: AttackParams) -> SimResult:
    """Monte Carlo estimate of the catch-up probability for params.q, params.z.

    Each trial walks the deficit from z until it hits zero (success), drifts
    past the safety margin (failure), or exhausts the horizon (truncated,
    reported separately).  Deterministic for a fixed seed regardless of how
    trials are batched.
    """
    q, z, trials, seed, horizon = (
        params.q,
        params.z,
        params.trials,
        params.seed,
        params.horizon,
    )
    if z == 0:
        return _result(trials, trials, 0, seed, horizon)
    if q == 0.0:
        # Every step is honest; the deficit only grows.
        return _result(0, trials, 0, seed, horizon)

    thresh = _threshold(q)
    margin = _margin(q, z)
    ids = np.arange(trials, dtype=np.uint64)
    pos = np.full(trials, z, dtype=np.int64)
    successes = 0
    for step in range(horizon):
        if ids.size == 0:
            break
        attacker = _draws(seed, ids, step) < thresh
        pos += np.where(attacker, -1, 1)
        caught_up = pos <= 0
        successes += int(np.count_nonzero(caught_up))
        alive = ~caught_up
        if margin is not None:
            alive &= pos < margin
        ids = ids[alive]
        pos = pos[alive]
    return _result(successes, trials, int(ids.size), seed, horizon)


def _result(successes: int, trials: int, truncated: int, seed: int, horizon: int) -> SimResult:
    estimate = successes / trials
    return SimResult(
        estimate=estimate,
        stderr=math.sqrt(estimate * (1.0 - estimate) / trials),
        trials=trials,
        seed=seed,
        successes=successes,
        truncated=truncated,
        horizon=horizon,
    )


def walk_single(seed: int, trial: int, q: float, z: int, horizon: int) -> str:
    """Reference scalar walk for one trial; must agree with simulate_attack.

    Returns "success", "failure" or "truncated".
    """
    if z == 0:
        return "success"
    if q == 0.0:
        return "failure"
    thresh = int(_threshold(q))
    margin = _margin(q, z)
    pos = z
    ids = np.array([trial], dtype=np.uint64)
    for step in range(horizon):
        attacker = int(_draws(seed, ids, step)[0]) < thresh
        pos += -1 if attacker else 1
        if pos <= 0:
            return "success"
        if margin is not None and pos >= margin:
            return "failure"
    return "truncated"


def acceptance_probability_estimate(
    q: float, confirmations: int, trials: int = 100_000, seed: int = 0,
    horizon: int = DEFAULT_HORIZON,
) -> SimResult:
    """Chance an honest transaction survives a depth-`confirmations` rewrite race.

    Interpreted operationally as the complement of the attacker catch-up
    event in the same random-walk model; the literature offers no other
    computable reading.
    """
    race = simulate_attack(
        AttackParams(q=q, z=confirmations, trials=trials, seed=seed, horizon=horizon)
    )
    survived = race.trials - race.successes
    return SimResult(
        estimate=survived / race.trials,
        stderr=race.stderr,
        trials=race.trials,
        seed=race.seed,
        successes=survived,
        truncated=race.truncated,
        horizon=race.horizon,
    )


def exact_decimal(value: Fraction) -> str:
    """Render a Fraction exactly: plain decimal when the denominator allows,
    `num/den` otherwise."""
    if value < 0:
        return "-" + exact_decimal(-value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = value.numerator * 10**digits // value.denominator
    whole, frac = divmod(scaled, 10**digits)
    if digits == 0 or frac == 0:
        return str(whole)
    frac_text = str(frac).rjust(digits, "0").rstrip("0")
    return f"{whole}.{frac_text}"
