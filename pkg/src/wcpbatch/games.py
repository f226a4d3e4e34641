"""Monte Carlo engines for the classical correctness and security games.

The correctness game replays the honest run's accept/abort logic: thinned
Poisson photon counts, a uniform size-K acknowledgement among the non-vacuum
pulses, then the estimation test.  The security game gives the cheating
receiver everything the reduction allows: lossless-channel photon counts,
the census (c_n) of pulses per photon number, and a free choice of how many
n-photon pulses to acknowledge (d_n), with the acknowledged pulses drawn
uniformly inside each photon-number class.  The cheat succeeds (verdict
"fail") only if the estimation test accepts while no vacuum or single-photon
pulse was acknowledged.

Trials are independent, one RNG stream per trial, and reductions are plain
integer sums, so results are identical for any worker count.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .estimation import EstimationAlgorithm, TwoIntensityEstimator
from .numerics import ParameterError, Probability, RngStream, poisson_counts, wilson_interval
from .protocol import ProtocolParams

__all__ = [
    "AdversaryContractError",
    "PhotonCensus",
    "AdversaryDecision",
    "GameOutcome",
    "AdversaryStrategy",
    "adversary_pns_greedy",
    "adversary_beta",
    "adversary_honest_mimic",
    "ADVERSARIES",
    "game_cor",
    "game_sim",
    "GameRunStats",
    "run_game_cor_trials",
    "run_game_sim_trials",
]


class AdversaryContractError(RuntimeError):
    """An adversary produced a decision outside its contract (d_n > c_n or d_n < 0)."""


@dataclass(frozen=True, eq=False)
class PhotonCensus:
    """Pulse counts per photon number, with the per-intensity split hidden from adversaries."""

    counts_by_n: np.ndarray
    low_by_n: np.ndarray
    high_by_n: np.ndarray

    def __post_init__(self) -> None:
        if not np.array_equal(self.counts_by_n, self.low_by_n + self.high_by_n):
            raise ParameterError("census split must sum to the totals")

    @property
    def n_pulses(self) -> int:
        return int(self.counts_by_n.sum())

    def low_at_least(self, k: int) -> int:
        """Low-intensity pulses carrying k or more photons."""
        return int(self.low_by_n[k:].sum())

    def high_at_least(self, k: int) -> int:
        return int(self.high_by_n[k:].sum())

    def at_least(self, k: int) -> int:
        return int(self.counts_by_n[k:].sum())


@dataclass(frozen=True, eq=False)
class AdversaryDecision:
    """How many n-photon pulses the receiver acknowledges, per photon number n."""

    accept_by_n: np.ndarray

    def validated(self, census: PhotonCensus) -> "AdversaryDecision":
        d = np.asarray(self.accept_by_n, dtype=np.int64)
        c = census.counts_by_n
        if d.shape != c.shape or np.any(d < 0) or np.any(d > c):
            raise AdversaryContractError("decision must satisfy 0 <= d_n <= c_n for all n")
        return AdversaryDecision(accept_by_n=d)

    @property
    def total(self) -> int:
        return int(self.accept_by_n.sum())


@dataclass(frozen=True, eq=False)
class GameOutcome:
    """Verdict plus the realized quantities needed to recompute it offline.

    verdict is "accept"/"abort" for the correctness game and
    "fail"/"success" for the security game.  estimator_accepted is None when
    the run never reached the estimation test.  The d_*_by_n arrays count the
    acknowledged pulses per photon number and intensity class.
    """

    verdict: str
    estimator_accepted: bool | None
    p_low: int
    p_high: int
    d_low_by_n: np.ndarray
    d_high_by_n: np.ndarray
    census: PhotonCensus
    decision: AdversaryDecision | None = None

    @property
    def d_low_at_least_3(self) -> int:
        return int(self.d_low_by_n[3:].sum())

    @property
    def d_high_at_least_3(self) -> int:
        return int(self.d_high_by_n[3:].sum())


class AdversaryStrategy(ABC):
    """Census-only cheating interface: (c_n) and the public K go in, (d_n) comes out.

    This is deliberately the whole interface; richer receiver behaviour
    belongs in protocol runs and is cross-checked against its census-only
    projection.
    """

    name: str = "adversary"

    @abstractmethod
    def decide(self, counts_by_n: np.ndarray, batch_size: int, rng: RngStream) -> np.ndarray:
        """Return d_n per photon number; best effort when K is unreachable."""


def _fill_greedy(d: np.ndarray, counts: np.ndarray, remaining: int, lowest_n: int) -> int:
    """Take pulses from the highest photon number down to lowest_n; returns what is left."""
    for n in range(len(counts) - 1, lowest_n - 1, -1):
        take = min(int(counts[n]) - int(d[n]), remaining)
        if take > 0:
            d[n] += take
            remaining -= take
        if remaining == 0:
            break
    return remaining


class _PnsGreedy(AdversaryStrategy):
    name = "pns_greedy"

    def decide(self, counts_by_n, batch_size, rng):
        d = np.zeros_like(counts_by_n)
        _fill_greedy(d, counts_by_n, batch_size, lowest_n=2)
        return d


class _Beta(AdversaryStrategy):
    """Acknowledges a fixed ratio beta of the two-photon pulses, rest from n >= 3."""

    def __init__(self, beta: float) -> None:
        self.beta = float(Probability(beta))
        self.name = f"beta({self.beta:g})"

    def decide(self, counts_by_n, batch_size, rng):
        d = np.zeros_like(counts_by_n)
        if len(counts_by_n) > 2:
            d[2] = min(round(self.beta * int(counts_by_n[2])), batch_size)
        _fill_greedy(d, counts_by_n, batch_size - int(d.sum()), lowest_n=3)
        return d


class _HonestMimic(AdversaryStrategy):
    """Acknowledges each n-photon pulse as often as a lossy channel would deliver it.

    d_n ~ Binomial(c_n, 1 - (1-eta)^n), then trimmed or padded uniformly to
    the batch size, so the acceptance statistics match the honest channel.
    """

    def __init__(self, eta: float) -> None:
        self.eta = float(Probability(eta))
        self.name = f"honest_mimic({self.eta:g})"

    def decide(self, counts_by_n, batch_size, rng):
        n_values = np.arange(len(counts_by_n))
        deliver_p = 1.0 - (1.0 - self.eta) ** n_values
        d = rng.generator.binomial(counts_by_n, deliver_p).astype(np.int64)
        total = int(d.sum())
        if total > batch_size:
            d = rng.generator.multivariate_hypergeometric(d, batch_size).astype(np.int64)
        elif total < batch_size:
            headroom = counts_by_n - d
            headroom[0] = 0  # an honest channel never delivers a vacuum pulse
            need = batch_size - total
            if headroom.sum() <= need:
                d = d + headroom  # best effort; the game scores the shortfall
            else:
                d = d + rng.generator.multivariate_hypergeometric(headroom, need)
        return d


def adversary_pns_greedy() -> AdversaryStrategy:
    return _PnsGreedy()


def adversary_beta(beta: float) -> AdversaryStrategy:
    return _Beta(beta)


def adversary_honest_mimic(eta: float) -> AdversaryStrategy:
    return _HonestMimic(eta)


ADVERSARIES = {
    "pns": adversary_pns_greedy,
    "pns_greedy": adversary_pns_greedy,
    "beta": adversary_beta,
    "honest_mimic": adversary_honest_mimic,
}


def _estimator_for(params: ProtocolParams, delta0: float | None) -> EstimationAlgorithm:
    if delta0 is not None:
        nu, nu_prime = params.two_intensity_values()
        return TwoIntensityEstimator(
            nu=nu,
            nu_prime=nu_prime,
            eta=params.transmittance,
            n_pulses=params.n_pulses,
            delta0=delta0,
        )
    if params.estimator is None:
        raise ParameterError("either delta0 or params.estimator must be given")
    return params.estimator


def _schedule_counts(params: ProtocolParams, thinned: bool, rng: RngStream) -> np.ndarray:
    """Photon counts per pulse of the unpermuted schedule, one sub-stream per intensity."""
    eta = params.transmittance if thinned else 1.0
    means = params.intensity_array
    counts = np.empty(params.n_pulses, dtype=np.int64)
    for j, mu in enumerate(np.unique(means)):
        mask = means == mu
        counts[mask] = poisson_counts(float(mu) * eta, int(mask.sum()), rng.child(j))
    return counts


def _census(low: np.ndarray, high: np.ndarray) -> PhotonCensus:
    width = int(max(low.max(initial=0), high.max(initial=0))) + 1
    low_by_n = np.bincount(low, minlength=width)
    high_by_n = np.bincount(high, minlength=width)
    return PhotonCensus(
        counts_by_n=low_by_n + high_by_n, low_by_n=low_by_n, high_by_n=high_by_n
    )


def _accepted_split(
    accepted: np.ndarray, counts: np.ndarray, half: int, width: int
) -> tuple[np.ndarray, np.ndarray]:
    low_mask = accepted < half  # schedule places the low intensity first
    d_low = np.bincount(counts[accepted[low_mask]], minlength=width)
    d_high = np.bincount(counts[accepted[~low_mask]], minlength=width)
    return d_low, d_high


def game_cor(
    params: ProtocolParams, delta0: float | None = None, *, rng: RngStream
) -> GameOutcome:
    """One correctness trial: thinned counts, uniform size-K ack, estimation test."""
    estimator = _estimator_for(params, delta0)
    counts = _schedule_counts(params, thinned=True, rng=rng.child(0))
    half = params.n_pulses // 2
    census = _census(counts[:half], counts[half:])
    width = len(census.counts_by_n)
    k = params.batch_size

    nonempty = np.flatnonzero(counts >= 1)
    if len(nonempty) < k:
        return GameOutcome(
            verdict="abort",
            estimator_accepted=None,
            p_low=0,
            p_high=0,
            d_low_by_n=np.zeros(width, dtype=np.int64),
            d_high_by_n=np.zeros(width, dtype=np.int64),
            census=census,
        )
    accepted = rng.child(1).subset(nonempty, k) if k else np.empty(0, dtype=np.int64)
    ok = estimator.evaluate(accepted, params.intensity_array)
    d_low, d_high = _accepted_split(accepted, counts, half, width)
    return GameOutcome(
        verdict="accept" if ok else "abort",
        estimator_accepted=ok,
        p_low=int(d_low.sum()),
        p_high=int(d_high.sum()),
        d_low_by_n=d_low,
        d_high_by_n=d_high,
        census=census,
    )


def game_sim(
    params: ProtocolParams,
    delta0: float | None,
    adversary: AdversaryStrategy,
    *,
    rng: RngStream,
) -> GameOutcome:
    """One security trial against a census-only adversary.

    Counts are lossless (full intensity).  The adversary sees only (c_n) and
    K; acknowledged pulses are drawn uniformly within each photon-number
    class, which is what makes the per-intensity split hypergeometric and
    intensity-blind.  Decisions that do not total K cannot pass the sender's
    size check and score "success" outright.
    """
    estimator = _estimator_for(params, delta0)
    counts = _schedule_counts(params, thinned=False, rng=rng.child(0))
    half = params.n_pulses // 2
    census = _census(counts[:half], counts[half:])
    width = len(census.counts_by_n)
    k = params.batch_size

    raw = adversary.decide(census.counts_by_n.copy(), k, rng.child(1))
    decision = AdversaryDecision(accept_by_n=np.asarray(raw)).validated(census)
    d = decision.accept_by_n

    if decision.total != k:
        return GameOutcome(
            verdict="success",
            estimator_accepted=None,
            p_low=0,
            p_high=0,
            d_low_by_n=np.zeros(width, dtype=np.int64),
            d_high_by_n=np.zeros(width, dtype=np.int64),
            census=census,
            decision=decision,
        )

    pick_rng = rng.child(2)
    parts = []
    for n in np.flatnonzero(d):
        pool = np.flatnonzero(counts == n)
        parts.append(pick_rng.child(int(n)).subset(pool, int(d[n])))
    accepted = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    ok = estimator.evaluate(accepted, params.intensity_array)
    d_low, d_high = _accepted_split(accepted, counts, half, width)
    cheated = bool(ok) and int(d[0]) == 0 and (len(d) < 2 or int(d[1]) == 0)
    return GameOutcome(
        verdict="fail" if cheated else "success",
        estimator_accepted=ok,
        p_low=int(d_low.sum()),
        p_high=int(d_high.sum()),
        d_low_by_n=d_low,
        d_high_by_n=d_high,
        census=census,
        decision=decision,
    )


@dataclass(frozen=True)
class GameRunStats:
    """Aggregated Monte Carlo result with its Wilson confidence interval."""

    game: str
    adversary: str | None
    trials: int
    hits: int  # aborts for the correctness game, fails for the security game
    estimator_accepts: int
    seed: int

    @property
    def rate(self) -> float:
        return self.hits / self.trials

    def wilson(self, z: float = 3.290527) -> tuple[float, float]:
        """Wilson interval for the hit rate (default: two-sided 99.9%)."""
        return wilson_interval(self.hits, self.trials, z)

    def csv_row(self, params: ProtocolParams, delta0: float | None) -> dict:
        nu, nu_prime = params.two_intensity_values()
        low, high = self.wilson()
        return {
            "game": self.game,
            "adversary": self.adversary or "",
            "nu": nu,
            "nu_prime": nu_prime,
            "eta": params.transmittance,
            "N": params.n_pulses,
            "K": params.batch_size,
            "Delta0": "" if delta0 is None else delta0,
            "seed": self.seed,
            "trials": self.trials,
            "failures": self.hits,
            "failure_rate": self.rate,
            "estimator_accepts": self.estimator_accepts,
            "wilson_low": low,
            "wilson_high": high,
        }


def _cor_chunk(params, delta0, seed, start, stop) -> tuple[int, int]:
    aborts = accepts = 0
    for i in range(start, stop):
        out = game_cor(params, delta0, rng=RngStream(seed, i))
        aborts += out.verdict == "abort"
        accepts += bool(out.estimator_accepted)
    return aborts, accepts


def _sim_chunk(params, delta0, adversary, seed, start, stop) -> tuple[int, int]:
    fails = accepts = 0
    for i in range(start, stop):
        out = game_sim(params, delta0, adversary, rng=RngStream(seed, i))
        fails += out.verdict == "fail"
        accepts += bool(out.estimator_accepted)
    return fails, accepts


def _run_chunks(worker, n_trials: int, workers: int) -> tuple[int, int]:
    if n_trials < 1:
        raise ParameterError("need at least one trial")
    workers = max(1, int(workers))
    if workers == 1:
        return worker(0, n_trials)
    n_chunks = min(n_trials, workers * 4)
    edges = np.linspace(0, n_trials, n_chunks + 1, dtype=int)
    results = Parallel(n_jobs=workers)(
        delayed(worker)(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])
    )
    # integer sums commute, so totals do not depend on scheduling order
    return tuple(int(sum(col)) for col in zip(*results))  # type: ignore[return-value]


def run_game_cor_trials(
    params: ProtocolParams,
    delta0: float | None,
    n_trials: int,
    seed: int,
    workers: int = 1,
) -> GameRunStats:
    """Monte Carlo abort rate of the correctness game (trial i uses stream (seed, i))."""
    aborts, accepts = _run_chunks(
        lambda a, b: _cor_chunk(params, delta0, seed, a, b), n_trials, workers
    )
    return GameRunStats(
        game="game_cor", adversary=None, trials=n_trials, hits=aborts,
        estimator_accepts=accepts, seed=seed,
    )


def run_game_sim_trials(
    params: ProtocolParams,
    delta0: float | None,
    adversary: AdversaryStrategy,
    n_trials: int,
    seed: int,
    workers: int = 1,
) -> GameRunStats:
    """Monte Carlo fail rate of the security game for one adversary."""
    fails, accepts = _run_chunks(
        lambda a, b: _sim_chunk(params, delta0, adversary, seed, a, b), n_trials, workers
    )
    return GameRunStats(
        game="game_sim", adversary=adversary.name, trials=n_trials, hits=fails,
        estimator_accepts=accepts, seed=seed,
    )
