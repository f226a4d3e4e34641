"""Parameter optimization, the pulse-budget scaling sweep, and maximal intensities.

The error budget is a sum of exponentials exp(-m_i^2 N) whose rates m_i are
set by seven free constants (six slacks plus the high intensity nu', with
nu = alpha * nu').  `optimize` minimizes the budget with a deterministic
two-stage search: closed-form seeds that equalize the decay rates subject to
the margin identity, a coarse grid over nu', then Nelder-Mead refinement in
transformed coordinates.  `scaling_sweep` finds the minimal pulse count
meeting a target error per transmittance and fits the log-log slope.

The maximal-intensity functions solve the converged-statistics security
criteria: the two-intensity criterion numerically (nu*_GLMO) and the
single-intensity baseline in closed form through the negative Lambert branch
(nu*_DKL).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from .bounds import ErrorBudget, SlackParams, epsilon_ac
from .estimation import Coefficients, coefficients
from .numerics import InfeasibleError, ParameterError, lambert_w_minus1

__all__ = [
    "OptimizationResult",
    "ScalingFit",
    "NuStarPoint",
    "Table",
    "optimize",
    "scaling_sweep",
    "nu_star_dkl",
    "nu_star_glmo",
    "nu_star_point",
    "figure_data",
]

_NU_PRIME_GRID = np.geomspace(1e-2, 2.0, 25)
_ALPHA_GRID = np.linspace(0.1, 0.9, 9)


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Map over independent cells, optionally on a worker pool.

    Results come back in submission order, so the reduction is by cell index
    and identical for every worker count.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return list(Parallel(n_jobs=workers)(delayed(fn)(item) for item in items))


# ---------------------------------------------------------------------------
# constrained minimisation of the error budget


@dataclass(frozen=True)
class OptimizationResult:
    """Best point found for (eta, N); budget is epsilon_ac at exactly that point."""

    eta: float
    n_pulses: int
    alpha: float
    best_slack: SlackParams
    best_intensities: tuple[float, float]
    budget: ErrorBudget
    evaluations: int
    converged: bool

    def to_dict(self) -> dict:
        nu, nu_prime = self.best_intensities
        coeffs = coefficients(nu, nu_prime) if self.converged else None
        out = {
            "eta": self.eta,
            "N": self.n_pulses,
            "alpha": self.alpha,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "nu": nu,
            "nu_prime": nu_prime,
        }
        out.update(
            self.budget.to_dict(slack=self.best_slack)
            if coeffs is None
            else self.budget.to_dict(coeffs=coeffs, eta=self.eta,
                                     n_pulses=self.n_pulses, slack=self.best_slack)
        )
        return out


def _headroom(coeffs: Coefficients, eta: float) -> float:
    """Margin identity right-hand side: what Delta0 + Delta0' + Delta0''-terms must share."""
    signal = (
        coeffs.c_prime * (1.0 - coeffs.a_eta(eta))
        - coeffs.c * (1.0 - coeffs.a_prime_eta(eta))
    ) / coeffs.c_prime
    return signal - (1.0 - coeffs.a - coeffs.b - coeffs.c)


def _allocation_seed(eta: float, nu_prime: float, alpha: float) -> SlackParams | None:
    """Equalize all decay rates at a common m subject to the margin identity.

    Every bound term decays like exp(-m_i^2 N); setting all m_i equal and
    spending the full margin gives a near-optimal, N-independent seed.
    """
    nu = alpha * nu_prime
    try:
        coeffs = coefficients(nu, nu_prime)
    except ParameterError:
        return None
    head = _headroom(coeffs, eta)
    if head <= 0.0:
        return None
    disc, c, cp = coeffs.discriminant, coeffs.c, coeffs.c_prime
    r = disc / cp
    k_big = 2.0 * max(c, cp) / disc       # Delta0 per unit m
    k_d0 = 1.0 / math.sqrt(c)             # delta0_small per unit m (C_2 ~ c N/2)
    k_d0p = 1.0 / math.sqrt(cp)
    k_dp = (c * cp * (k_d0 + k_d0p) + cp + c) / disc  # Delta0' per unit m
    m = head / (1.0 + r * (k_big + k_dp))
    delta_cap = (2.0 - coeffs.a_eta(eta) - coeffs.a_prime_eta(eta)) / 2.0
    gamma0 = min(m, 0.5 * c)
    gamma0p = min(m, 0.5 * cp)
    return SlackParams(
        delta=min(m, 0.5 * delta_cap),
        delta0=k_big * m,
        delta0_small=m / math.sqrt(c - gamma0),
        delta0_small_prime=m / math.sqrt(cp - gamma0p),
        gamma0=gamma0,
        gamma0_prime=gamma0p,
    )


def _low_eta_seed(eta: float, nu_prime: float, alpha: float) -> SlackParams | None:
    """Seed family with every slack proportional to eta (low-transmittance guidance)."""
    nu = alpha * nu_prime
    try:
        coeffs = coefficients(nu, nu_prime)
    except ParameterError:
        return None
    delta_cap = (2.0 - coeffs.a_eta(eta) - coeffs.a_prime_eta(eta)) / 2.0
    return SlackParams(
        delta=min(eta / 3.0, 0.5 * delta_cap),
        delta0=eta / 3.0,
        delta0_small=eta / 10.0,
        delta0_small_prime=eta / 10.0,
        gamma0=min(eta / 10.0, 0.5 * coeffs.c),
        gamma0_prime=min(eta / 10.0, 0.5 * coeffs.c_prime),
    )


def _batch_factor_seed(eta: float, nu_prime: float, alpha: float) -> SlackParams | None:
    """Seed that routes the security budget through the batch-size factor.

    When the cheater is unlikely to even gather K multiphoton pulses
    (delta inside the Gamma branch), the estimation-side exponentials only
    need to stay bounded, so the margin identity can be spent almost
    entirely on the correctness term Delta0.
    """
    nu = alpha * nu_prime
    try:
        coeffs = coefficients(nu, nu_prime)
    except ParameterError:
        return None
    head = _headroom(coeffs, eta)
    margin = (
        coeffs.a + coeffs.b + coeffs.a_prime + coeffs.b_prime
        - coeffs.a_eta(eta) - coeffs.a_prime_eta(eta)
    ) / 2.0
    if head <= 0.0 or margin <= 0.0:
        return None
    budget = head * coeffs.c_prime / coeffs.discriminant  # Delta0 + Delta0' + pinch
    dp_target = 0.1 * budget * coeffs.discriminant
    d0 = min(dp_target / (6.0 * coeffs.c * coeffs.c_prime), 1.0)
    g0 = min(dp_target / (3.0 * coeffs.c_prime * (1.0 + d0)), 0.9 * coeffs.c)
    g0p = min(dp_target / (3.0 * coeffs.c * (1.0 + d0)), 0.9 * coeffs.c_prime)
    return SlackParams(
        delta=margin / 2.0,  # Gamma = margin/2 balances the delta**2 correctness term
        delta0=0.85 * budget,
        delta0_small=d0,
        delta0_small_prime=d0,
        gamma0=g0,
        gamma0_prime=g0p,
    )


_PENALTY = 1e6


class _Objective:
    """log(eps_AC) over transformed coordinates, with run statistics."""

    def __init__(self, eta: float, n_pulses: int, alpha: float | None,
                 m_union_factor: float) -> None:
        self.eta = eta
        self.n = n_pulses
        self.alpha = alpha
        self.m_union_factor = m_union_factor
        self.evaluations = 0

    # coordinates: [log nu', logit-ish delta share, log Delta0, log d0, log d0p,
    #               log g0, log g0p] (+ logit alpha when free)
    def encode(self, nu_prime: float, alpha: float, slack: SlackParams) -> np.ndarray:
        coeffs = coefficients(alpha * nu_prime, nu_prime)
        cap = (2.0 - coeffs.a_eta(self.eta) - coeffs.a_prime_eta(self.eta)) / 2.0
        share = min(max(slack.delta / cap, 1e-12), 1.0 - 1e-12)
        x = [
            math.log(nu_prime),
            math.log(share / (1.0 - share)),
            math.log(slack.delta0),
            math.log(slack.delta0_small),
            math.log(slack.delta0_small_prime),
            math.log(slack.gamma0),
            math.log(slack.gamma0_prime),
        ]
        if self.alpha is None:
            x.append(math.log(alpha / (1.0 - alpha)))
        return np.asarray(x)

    def decode(self, x: np.ndarray) -> tuple[float, float, SlackParams] | None:
        try:
            nu_prime = math.exp(x[0])
            alpha = self.alpha if self.alpha is not None else 1.0 / (1.0 + math.exp(-x[7]))
            if not 0.0 < alpha < 1.0 or not 0.0 < nu_prime < 50.0:
                return None
            coeffs = coefficients(alpha * nu_prime, nu_prime)
            cap = (2.0 - coeffs.a_eta(self.eta) - coeffs.a_prime_eta(self.eta)) / 2.0
            delta = cap / (1.0 + math.exp(-x[1]))
            slack = SlackParams(
                delta=delta,
                delta0=math.exp(x[2]),
                delta0_small=math.exp(x[3]),
                delta0_small_prime=math.exp(x[4]),
                gamma0=math.exp(x[5]),
                gamma0_prime=math.exp(x[6]),
            )
            return nu_prime, alpha, slack
        except (OverflowError, ParameterError):
            return None

    def budget_at(self, nu_prime: float, alpha: float, slack: SlackParams) -> ErrorBudget:
        coeffs = coefficients(alpha * nu_prime, nu_prime)
        return epsilon_ac(coeffs, self.eta, self.n, slack,
                          m_union_factor=self.m_union_factor)

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        decoded = self.decode(x)
        if decoded is None:
            return _PENALTY
        nu_prime, alpha, slack = decoded
        budget = self.budget_at(nu_prime, alpha, slack)
        if not budget.constraints_satisfied:
            # steer back toward the feasible region along the margin violation
            return _PENALTY + min(-budget.delta_double_prime, 1.0) * 1e3
        return budget.eps_ac.log_value


def optimize(
    eta: float,
    n_pulses: int,
    alpha: float | None = 0.5,
    *,
    eps_target: float | None = None,
    extra_seeds: Sequence[tuple[float, float, SlackParams]] = (),
    m_union_factor: float = 32.0,
    refine_iters: int = 600,
    n_refine_seeds: int = 6,
) -> OptimizationResult:
    """Minimize eps_AC over the slack constants and intensities.

    alpha fixes nu = alpha * nu' (pass None to free alpha as well).
    eps_target switches to feasibility mode: refinement stops at the first
    point at or below the target.  extra_seeds entries are
    (nu_prime, alpha, slack) warm starts, so a caller can guarantee the
    result at larger N is no worse than a point already in hand.  The whole
    search is deterministic: fixed grids, fixed iteration budgets.
    """
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"transmittance must lie in (0, 1], got {eta!r}")
    if n_pulses < 2:
        raise ParameterError("n_pulses must be at least 2")
    obj = _Objective(eta, n_pulses, alpha, m_union_factor)

    alphas = [alpha] if alpha is not None else list(_ALPHA_GRID)
    candidates: list[tuple[float, float, SlackParams]] = list(extra_seeds)
    for a in alphas:
        for nu_prime in _NU_PRIME_GRID:
            for seed_fn in (_allocation_seed, _low_eta_seed, _batch_factor_seed):
                s = seed_fn(eta, float(nu_prime), float(a))
                if s is not None:
                    candidates.append((float(nu_prime), float(a), s))

    scored: list[tuple[float, tuple[float, float, SlackParams]]] = []
    for cand in candidates:
        nu_prime, a, slack = cand
        budget = obj.budget_at(nu_prime, a, slack)
        obj.evaluations += 1
        score = budget.eps_ac.log_value if budget.constraints_satisfied else _PENALTY
        scored.append((score, cand))
    scored.sort(key=lambda item: item[0])

    nm_options = {"maxiter": refine_iters, "xatol": 1e-6, "fatol": 1e-9, "adaptive": True}

    def polish(x0: np.ndarray) -> list[tuple[np.ndarray, float]]:
        # slack-only pass at frozen intensities first (the better-conditioned
        # subproblem), then a full pass that can move nu' (and alpha)
        def frozen(x_sub: np.ndarray) -> float:
            full = np.array(x0)
            full[1:7] = x_sub
            return obj(full)

        sub = minimize(frozen, x0[1:7], method="Nelder-Mead", options=nm_options)
        mid = np.array(x0)
        mid[1:7] = sub.x
        full = minimize(obj, mid, method="Nelder-Mead", options=nm_options)
        return [(mid, sub.fun), (full.x, full.fun)]

    best_x = None
    best_val = math.inf
    for score, (nu_prime, a, slack) in scored[:n_refine_seeds]:
        if score >= _PENALTY:
            continue
        x0 = obj.encode(nu_prime, a, slack)
        for cand_x, cand_val in [(x0, score)] + polish(x0):
            if cand_val < best_val:
                best_x, best_val = cand_x, cand_val
        if eps_target is not None and best_val <= math.log(eps_target):
            break

    if best_x is None:
        # no feasible point anywhere on the grid
        fallback = scored[0][1] if scored else (float(_NU_PRIME_GRID[0]), alphas[0],
                                                _low_eta_seed(eta, float(_NU_PRIME_GRID[0]),
                                                              alphas[0]))
        nu_prime, a, slack = fallback
        return OptimizationResult(
            eta=eta, n_pulses=n_pulses, alpha=a,
            best_slack=slack, best_intensities=(a * nu_prime, nu_prime),
            budget=obj.budget_at(nu_prime, a, slack),
            evaluations=obj.evaluations, converged=False,
        )

    nu_prime, a, slack = obj.decode(best_x)  # type: ignore[misc]
    return OptimizationResult(
        eta=eta, n_pulses=n_pulses, alpha=a,
        best_slack=slack, best_intensities=(a * nu_prime, nu_prime),
        budget=obj.budget_at(nu_prime, a, slack),
        evaluations=obj.evaluations, converged=True,
    )


# ---------------------------------------------------------------------------
# pulse-budget scaling in the transmittance


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log N_min against log eta."""

    grid: tuple[tuple[float, int], ...]
    slope: float
    intercept: float
    r_squared: float
    eps_target: float
    alpha: float
    infeasible: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "grid": [{"eta": e, "n_min": n} for e, n in self.grid],
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "eps_target": self.eps_target,
            "alpha": self.alpha,
            "infeasible_etas": list(self.infeasible),
        }


def _min_feasible_index(
    log_eps,  # callable: grid index -> best log eps over candidates
    log_target: float,
    k_max: int,
) -> int | None:
    """Smallest geometric-grid index meeting the target (budgets decay in N)."""
    if log_eps(k_max) > log_target:
        return None
    lo, hi = 0, k_max
    while lo < hi:
        mid = (lo + hi) // 2
        if log_eps(mid) <= log_target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _candidate_slacks(eta: float, alpha: float, m_union_factor: float,
                      refine_iters: int, log_target: float,
                      n_of_index) -> list[tuple[float, float, SlackParams]]:
    """Fixed, N-independent candidate set so min-over-candidates is monotone in N.

    The decay rates of every budget term are N-free, so slacks tuned once
    stay near-optimal at every N.  The reference optimizations run close to
    the threshold N (found with the closed-form seeds first), where the
    landscape actually discriminates; far below it every feasible point
    scores the same trivial value.
    """
    cands: list[tuple[float, float, SlackParams]] = []
    for nu_prime in _NU_PRIME_GRID:
        for seed_fn in (_allocation_seed, _batch_factor_seed):
            s = seed_fn(eta, float(nu_prime), alpha)
            if s is not None:
                cands.append((float(nu_prime), alpha, s))

    def log_eps(k: int) -> float:
        n = n_of_index(k)
        best = math.inf
        for nu_prime, a, slack in cands:
            coeffs = coefficients(a * nu_prime, nu_prime)
            budget = epsilon_ac(coeffs, eta, n, slack, m_union_factor=m_union_factor)
            if budget.constraints_satisfied:
                best = min(best, budget.eps_ac.log_value)
        return best

    k_max_guess = 200  # generous cap just for locating the reference N
    k_rough = _min_feasible_index(log_eps, log_target, k_max_guess)
    if k_rough is None:
        return cands
    # two refinement rounds: tune at the seed threshold, search again, re-tune
    for _ in range(2):
        ref = optimize(eta, n_of_index(k_rough), alpha, refine_iters=refine_iters,
                       m_union_factor=m_union_factor)
        if not ref.converged:
            break
        cand = (ref.best_intensities[1], ref.alpha, ref.best_slack)
        if cand in cands:
            break
        cands.append(cand)
        k_next = _min_feasible_index(log_eps, log_target, k_rough)
        if k_next is None or k_next == k_rough:
            break
        k_rough = k_next
    return cands


def scaling_sweep(
    eta_grid: Sequence[float],
    eps_target: float,
    alpha: float = 0.5,
    *,
    grid_ratio: float = 1.2,
    n_floor: int = 100,
    n_cap: float = 1e13,
    m_union_factor: float = 32.0,
    refine_iters: int = 600,
    workers: int = 1,
) -> ScalingFit:
    """Minimal pulse count meeting eps_target per transmittance, plus the log-log fit.

    For each eta, N_min is the least N on the geometric grid
    n_floor * grid_ratio^k whose optimized budget meets the target;
    transmittances with no feasible point are dropped and reported.  Sweep
    points are independent and run on a worker pool when workers > 1.
    """
    if not 0.0 < eps_target < 1.0:
        raise ParameterError("eps_target must lie in (0, 1)")
    etas = [float(e) for e in eta_grid]
    if len(etas) < 2:
        raise ParameterError("the slope fit needs at least two transmittances")
    if any(not 0.0 < e <= 0.2 for e in etas):
        raise ParameterError("scaling sweep is calibrated for eta in (0, 0.2]")
    log_target = math.log(eps_target)

    k_max = int(math.log(n_cap / n_floor) / math.log(grid_ratio))

    def n_of_index(k: int) -> int:
        return int(round(n_floor * grid_ratio**k))

    def sweep_point(eta: float) -> int | None:
        cands = _candidate_slacks(eta, alpha, m_union_factor, refine_iters,
                                  log_target, n_of_index)

        def log_eps(k: int) -> float:
            n = n_of_index(k)
            best = math.inf
            for nu_prime, a, slack in cands:
                coeffs = coefficients(a * nu_prime, nu_prime)
                budget = epsilon_ac(coeffs, eta, n, slack, m_union_factor=m_union_factor)
                if budget.constraints_satisfied:
                    best = min(best, budget.eps_ac.log_value)
            return best

        k_min = _min_feasible_index(log_eps, log_target, k_max)
        return None if k_min is None else n_of_index(k_min)

    points: list[tuple[float, int]] = []
    infeasible: list[float] = []
    for eta, n_min in zip(etas, _pmap(sweep_point, etas, workers)):
        if n_min is None:
            infeasible.append(eta)
        else:
            points.append((eta, n_min))

    if len(points) < 2:
        raise InfeasibleError(
            f"need at least two feasible grid points to fit a slope, got {len(points)} "
            f"(infeasible etas: {infeasible})"
        )
    x = np.log([p[0] for p in points])
    y = np.log([p[1] for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    r_squared = 1.0 - float(np.sum(residual**2)) / float(np.sum((y - y.mean()) ** 2))
    return ScalingFit(
        grid=tuple(points),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        eps_target=eps_target,
        alpha=alpha,
        infeasible=tuple(infeasible),
    )


# ---------------------------------------------------------------------------
# maximal reachable intensities in the converged-statistics regime


def nu_star_dkl(eta0: float) -> float:
    """Maximal intensity of the single-intensity baseline protocol.

    Closed form W_{-1}((eta0 - 1) e^(eta0 - 1)) / (eta0 - 1) - 1: the
    intensity at which the expected deliveries no longer exceed the expected
    multiphoton (>= 2) pulse count.
    """
    if not 0.0 < eta0 < 1.0:
        raise ParameterError(f"nu_star_dkl requires 0 < eta0 < 1, got {eta0!r}")
    x = (eta0 - 1.0) * math.exp(eta0 - 1.0)
    return lambert_w_minus1(x) / (eta0 - 1.0) - 1.0


def _glmo_gap(nu_prime: float, eta0: float, alpha: float) -> float:
    """Security margin of the two-intensity criterion at expected statistics.

    Positive while the honest-channel signal c'(1-e^(-eta0 nu)) - c(1-e^(-eta0 nu'))
    exceeds the worst-case three-plus-photon contribution c'(1-a-b-c).
    """
    coeffs = coefficients(alpha * nu_prime, nu_prime)
    return (
        coeffs.c_prime * (1.0 - coeffs.a_eta(eta0))
        - coeffs.c * (1.0 - coeffs.a_prime_eta(eta0))
        - coeffs.c_prime * (1.0 - coeffs.a - coeffs.b - coeffs.c)
    )


_GLMO_SCAN = np.geomspace(1e-4, 1e3, 400)


def _glmo_root(eta0: float, alpha: float) -> tuple[float, bool]:
    values = np.array([_glmo_gap(float(v), eta0, alpha) for v in _GLMO_SCAN])
    signs = np.sign(values)
    flips = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    if len(flips) == 0:
        raise InfeasibleError(
            f"no sign change for nu' in [{_GLMO_SCAN[0]:g}, {_GLMO_SCAN[-1]:g}] "
            f"at eta0={eta0!r}, alpha={alpha!r}"
        )
    lo, hi = float(_GLMO_SCAN[flips[0]]), float(_GLMO_SCAN[flips[0] + 1])
    f_lo = _glmo_gap(lo, eta0, alpha)
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        f_mid = _glmo_gap(mid, eta0, alpha)
        if (f_lo > 0) == (f_mid > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi), len(flips) > 1


def nu_star_glmo(eta0: float, alpha: float) -> float:
    """Maximal high intensity nu' of the two-intensity protocol at nu = alpha nu'.

    Smallest root of the converged-statistics margin, found by bracketing
    bisection from the first sign change on a log grid (most conservative
    when several roots appear).
    """
    if not 0.0 < eta0 < 1.0:
        raise ParameterError(f"nu_star_glmo requires 0 < eta0 < 1, got {eta0!r}")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"nu_star_glmo requires 0 < alpha < 1, got {alpha!r}")
    root, _ = _glmo_root(eta0, alpha)
    return root


@dataclass(frozen=True)
class NuStarPoint:
    """Maximal intensities of both protocols at one (eta0, alpha) cell."""

    eta0: float
    alpha: float
    nu_star_glmo: float
    nu_star_dkl: float
    winner: str  # "GLMO" | "DKL"
    glmo_multiple_roots: bool = False


def nu_star_point(eta0: float, alpha: float) -> NuStarPoint:
    glmo, multiple = _glmo_root(eta0, alpha)
    dkl = nu_star_dkl(eta0)
    return NuStarPoint(
        eta0=eta0,
        alpha=alpha,
        nu_star_glmo=glmo,
        nu_star_dkl=dkl,
        winner="GLMO" if glmo > dkl else "DKL",
        glmo_multiple_roots=multiple,
    )


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[dict, ...]


DEFAULT_ETA0_GRID = np.geomspace(1e-3, 0.99, 100)
DEFAULT_ALPHA_GRID = np.linspace(0.005, 0.995, 100)


_NUSTAR_COLUMNS = ("eta0", "alpha", "nu_star_glmo", "nu_star_dkl", "winner",
                   "glmo_multiple_roots")


def _nustar_row(e: float, a: float) -> dict:
    try:
        p = nu_star_point(e, a)
    except (ParameterError, ArithmeticError):
        return {"eta0": e, "alpha": a, "nu_star_glmo": math.nan,
                "nu_star_dkl": math.nan, "winner": "infeasible",
                "glmo_multiple_roots": False}
    return {"eta0": e, "alpha": a, "nu_star_glmo": p.nu_star_glmo,
            "nu_star_dkl": p.nu_star_dkl, "winner": p.winner,
            "glmo_multiple_roots": p.glmo_multiple_roots}


def figure_data(
    which: str,
    *,
    eta0_grid: Sequence[float] | None = None,
    alpha_grid: Sequence[float] | None = None,
    eta0: float = 0.2,
    alpha: float = 0.5,
    workers: int = 1,
) -> Table:
    """Maximal-intensity comparison tables.

    "fig_eta": nu* of both protocols along an eta0 grid at fixed alpha.
    "fig_alpha": the same along an alpha grid at fixed eta0 (the baseline
    has no alpha, so its column is constant).  "density": winner per
    (alpha, eta0) cell.  Cells whose computation fails are marked with
    winner "infeasible" rather than dropped.  Cells are independent; rows
    run on a worker pool when workers > 1.
    """
    etas = np.asarray(DEFAULT_ETA0_GRID if eta0_grid is None else eta0_grid, dtype=float)
    alphas = np.asarray(DEFAULT_ALPHA_GRID if alpha_grid is None else alpha_grid, dtype=float)

    if which == "fig_eta":
        rows = _pmap(lambda e: _nustar_row(float(e), alpha), etas, workers)
        return Table(columns=_NUSTAR_COLUMNS, rows=tuple(rows))
    if which == "fig_alpha":
        rows = _pmap(lambda a: _nustar_row(eta0, float(a)), alphas, workers)
        return Table(columns=_NUSTAR_COLUMNS, rows=tuple(rows))
    if which == "density":

        def density_row(e: float) -> list[dict]:
            dkl = nu_star_dkl(float(e))  # constant along alpha by construction
            out = []
            for a in alphas:
                try:
                    glmo, _ = _glmo_root(float(e), float(a))
                    winner = "GLMO" if glmo > dkl else "DKL"
                except (ParameterError, ArithmeticError):
                    winner = "infeasible"
                out.append({"alpha": float(a), "eta0": float(e), "winner": winner})
            return out

        rows = [cell for row in _pmap(density_row, etas, workers) for cell in row]
        return Table(columns=("alpha", "eta0", "winner"), rows=tuple(rows))
    raise ParameterError(f"unknown figure table {which!r}")
