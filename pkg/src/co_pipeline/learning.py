"""Learning by experience: losses, DIRECT search, and risk bounds.

The pipeline loss is piecewise constant in the weights (finitely many
combinatorial outputs), so gradients carry no signal and training is a
global derivative-free search over the weight box.  DIRECT (DIviding
RECTangles) partitions the box into hyperrectangles, always refining
those that are potentially optimal for some Lipschitz constant.

Also here: the smoothed (perturbed) loss estimated by sample average
approximation with common random numbers, an imitation benchmark trained
with a perturbed Fenchel-Young loss, and the excess-risk bound constants.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import PerturbationConfig, WeightVector, sample_gaussians

__all__ = [
    "LossConfig",
    "LearnerConfig",
    "BoundParams",
    "DirectResult",
    "loss",
    "perturbed_loss_saa",
    "empirical_risk",
    "direct_minimize",
    "learn_by_experience",
    "perturbed_expected_solution",
    "fyl_learn",
    "constant_C",
    "sigma_n",
    "excess_risk_bound",
    "config_hash",
    "parallel_map",
]


@dataclass(frozen=True)
class LossConfig:
    """Application plug-in for the generic learner.

    pipeline_cost(x, w) runs the full pipeline (features, linear model,
    optimization layer, post-processing) and returns the hard-problem
    cost; normalize(x, cost) maps it to a size-comparable non-negative
    loss.  When perturbation is set, the smoothed loss is used.
    """

    pipeline_cost: Callable
    normalize: Callable
    dim: int
    perturbation: PerturbationConfig | None = None


@dataclass(frozen=True)
class LearnerConfig:
    """Multi-seed DIRECT search over the weight box [-M, M]^d."""

    box_radius: float = 10.0
    budget: int = 1000
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)

    def __post_init__(self):
        if self.box_radius <= 0:
            raise ValueError("box_radius must be positive")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if len(self.seeds) < 1:
            raise ValueError("at least one seed is required")


def parallel_map(fn, items, threads: int = 1) -> list:
    """Order-preserving map, optionally on a thread pool."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def loss(x, w, cfg: LossConfig) -> float:
    """Normalized pipeline cost at weights w (deterministic in (x, w))."""
    w = np.asarray(w, dtype=float)
    return float(cfg.normalize(x, cfg.pipeline_cost(x, w)))


def perturbed_loss_saa(x, w, cfg: LossConfig) -> float:
    """Sample-average of the loss at w + sigma*Z_k.

    The Gaussian matrix depends only on the perturbation config, so every
    w is evaluated on the same draws (common random numbers) and the
    smoothed risk surface is deterministic.
    """
    pert = cfg.perturbation
    w = np.asarray(w, dtype=float)
    if pert is None or pert.sigma == 0.0:
        return loss(x, w, cfg)
    gaussians = sample_gaussians(pert, w.shape[0])
    total = 0.0
    for z in gaussians:
        total += cfg.normalize(x, cfg.pipeline_cost(x, w + pert.sigma * z))
    return float(total / pert.nsamples)


def empirical_risk(training_set, w, cfg: LossConfig, threads: int = 1) -> float:
    """Mean (perturbed) loss over the training set."""
    if len(training_set) == 0:
        raise ValueError("training set is empty")
    w = np.asarray(w, dtype=float)
    f = perturbed_loss_saa if cfg.perturbation is not None else loss
    values = parallel_map(lambda x: f(x, w, cfg), training_set, threads)
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# DIRECT


@dataclass
class DirectResult:
    w: np.ndarray
    value: float
    trace: list
    n_evals: int


class _BudgetExhausted(Exception):
    pass


def _potentially_optimal(sizes: np.ndarray, values: np.ndarray, eps: float) -> list[int]:
    """Indices on the lower-right convex hull of (size, value) points.

    A point k qualifies if some Lipschitz constant K >= 0 makes its bound
    value_k - K*size_k minimal and improves the incumbent by at least
    eps*|f_min| (the classic potential-optimality test).
    """
    fmin = values.min()
    selected = []
    for k in range(sizes.shape[0]):
        k_lo, k_hi = 0.0, np.inf
        dominated = False
        for j in range(sizes.shape[0]):
            if j == k:
                continue
            gap = sizes[j] - sizes[k]
            if gap > 0:
                k_hi = min(k_hi, (values[j] - values[k]) / gap)
            elif gap < 0:
                k_lo = max(k_lo, (values[k] - values[j]) / -gap)
            elif values[j] < values[k]:
                dominated = True
                break
        if dominated or k_lo > k_hi * (1 + 1e-12) + 1e-15:
            continue
        if np.isfinite(k_hi) and values[k] - k_hi * sizes[k] > fmin - eps * abs(fmin):
            continue
        selected.append(k)
    return selected


def direct_minimize(objective, bounds, budget: int, seed: int = 0, eps: float = 1e-4):
    """Global minimization of a black box over a box by DIRECT.

    Deterministic given the seed: the unit cube is trisected along
    longest sides (lowest dimension index first on value ties), and the
    seed only permutes the division order among equally-valued candidate
    rectangles.  Non-finite objective values are treated as +inf, so the
    incumbent trace is non-increasing and finite evaluations win.

    Returns a DirectResult with the incumbent point (original
    coordinates), its value, the per-evaluation incumbent trace, and the
    number of evaluations spent (exactly min(budget, ...)).
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError("bounds must be (d, 2)")
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError("bounds must be finite with positive extent")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    lo = bounds[:, 0]
    span = bounds[:, 1] - bounds[:, 0]
    dim = lo.shape[0]
    rng = np.random.default_rng(seed)

    state = {"evals": 0, "best": np.inf, "best_u": np.full(dim, 0.5)}
    trace: list[float] = []

    def evaluate(u: np.ndarray) -> float:
        if state["evals"] >= budget:
            raise _BudgetExhausted
        value = float(objective(lo + u * span))
        if not math.isfinite(value):
            value = np.inf
        state["evals"] += 1
        if value < state["best"]:
            state["best"] = value
            state["best_u"] = u.copy()
        trace.append(state["best"])
        return value

    centers = [np.full(dim, 0.5)]
    levels = [np.zeros(dim, dtype=int)]
    values = [evaluate(centers[0])]

    def rect_size(lv: np.ndarray) -> float:
        # summing in sorted order makes equal level-multisets bit-identical
        return 0.5 * float(np.sqrt((9.0 ** (-np.sort(lv).astype(float))).sum()))

    def divide(idx: int) -> None:
        lv = levels[idx]
        lmin = lv.min()
        dims = np.flatnonzero(lv == lmin)
        delta = 3.0 ** -(lmin + 1)
        children = []
        for i in dims:
            up = centers[idx].copy()
            up[i] += delta
            down = centers[idx].copy()
            down[i] -= delta
            v_up = evaluate(up)
            v_down = evaluate(down)
            children.append((min(v_up, v_down), int(i), up, v_up, down, v_down))
        children.sort(key=lambda item: (item[0], item[1]))
        current = lv.copy()
        for _, i, up, v_up, down, v_down in children:
            current = current.copy()
            current[i] += 1
            centers.append(up)
            levels.append(current)
            values.append(v_up)
            centers.append(down)
            levels.append(current)
            values.append(v_down)
        levels[idx] = current

    try:
        while state["evals"] < budget:
            # group live rectangles into size classes, keep per-class minima
            by_size: dict[float, list[int]] = {}
            for idx in range(len(values)):
                by_size.setdefault(rect_size(levels[idx]), []).append(idx)
            sizes = np.array(sorted(by_size))
            class_rects = []
            class_values = np.empty(sizes.shape[0])
            for pos, size in enumerate(sizes):
                members = by_size[size]
                vmin = min(values[i] for i in members)
                ties = [i for i in members if values[i] == vmin]
                if len(ties) > 1:
                    rng.shuffle(ties)
                class_values[pos] = vmin
                class_rects.append(ties)
            for pos in _potentially_optimal(sizes, class_values, eps):
                for idx in class_rects[pos]:
                    divide(idx)
    except _BudgetExhausted:
        pass

    return DirectResult(
        w=lo + state["best_u"] * span,
        value=float(state["best"]),
        trace=trace,
        n_evals=state["evals"],
    )


def config_hash(payload) -> str:
    """Stable fingerprint of a JSON-serializable configuration."""
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()


def learn_by_experience(
    training_set,
    learner: LearnerConfig,
    loss_cfg: LossConfig,
    threads: int = 1,
):
    """Minimize empirical risk with DIRECT, once per seed; keep the best w.

    No target solutions are involved anywhere: the only training signal
    is the observed pipeline cost on the instances.  Returns the best
    WeightVector and a report with every seed's best risk (their average
    and minimum are the usual summary statistics).
    """
    bounds = [(-learner.box_radius, learner.box_radius)] * loss_cfg.dim

    def objective(w):
        return empirical_risk(training_set, w, loss_cfg, threads)

    per_seed = []
    best = None
    for seed in learner.seeds:
        result = direct_minimize(objective, bounds, learner.budget, seed=seed)
        per_seed.append(
            {"seed": int(seed), "best_value": result.value, "evals": result.n_evals}
        )
        if best is None or result.value < best.value:
            best = result
    report = {
        "per_seed": per_seed,
        "best_w": [float(v) for v in best.w],
        "config_hash": config_hash(
            {
                "box_radius": learner.box_radius,
                "budget": learner.budget,
                "seeds": list(learner.seeds),
                "dim": loss_cfg.dim,
                "perturbation": None
                if loss_cfg.perturbation is None
                else [
                    loss_cfg.perturbation.sigma,
                    loss_cfg.perturbation.nsamples,
                    loss_cfg.perturbation.seed,
                ],
            }
        ),
    }
    return WeightVector(w=best.w, box_radius=learner.box_radius), report


# ---------------------------------------------------------------------------
# Imitation benchmark: perturbed Fenchel-Young loss


def perturbed_expected_solution(argmin_vec, theta: np.ndarray, epsilon: float, gaussians):
    """Monte-Carlo estimate of E_Z[yhat(theta + epsilon Z)].

    This is the gradient of the perturbed layer value
    E_Z[min_y <y, theta + epsilon Z>] and the data-independent half of
    the Fenchel-Young loss gradient.
    """
    acc = None
    count = 0
    for z in gaussians:
        y = np.asarray(argmin_vec(theta + epsilon * z), dtype=float)
        acc = y if acc is None else acc + y
        count += 1
    if acc is None:
        raise ValueError("at least one perturbation sample is required")
    return acc / count


def fyl_learn(
    pairs,
    argmin_vec,
    features_of,
    epsilon: float = 1.0,
    n_z: int = 20,
    steps: int = 500,
    rate: float = 0.05,
    box_radius: float = 10.0,
    seed: int = 0,
) -> WeightVector:
    """SGD on the perturbed Fenchel-Young loss against target solutions.

    pairs are (instance, target incidence vector); argmin_vec(x, theta)
    returns the optimization layer's solution as an incidence vector
    (minimization orientation).  For that orientation the FY-loss
    gradient in theta space is y_target - E_Z[yhat(theta + epsilon Z)],
    pulled back through the feature matrix and followed downhill; w stays
    projected on the box.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if n_z < 1 or steps < 0:
        raise ValueError("n_z must be >= 1 and steps >= 0")
    phis = [np.asarray(features_of(x).values, dtype=float) for x, _ in pairs]
    if not phis:
        raise ValueError("no training pairs")
    dim = phis[0].shape[1]
    rng = np.random.default_rng(seed)
    w = np.zeros(dim)
    for _ in range(steps):
        i = int(rng.integers(len(pairs)))
        x, y_target = pairs[i]
        phi = phis[i]
        theta = phi @ w
        gaussians = rng.standard_normal((n_z, theta.shape[0]))
        y_mean = perturbed_expected_solution(
            lambda th: argmin_vec(x, th), theta, epsilon, gaussians
        )
        grad_w = phi.T @ (np.asarray(y_target, dtype=float) - y_mean)
        w = np.clip(w - rate * grad_w, -box_radius, box_radius)
    return WeightVector(w=w, box_radius=box_radius)


# ---------------------------------------------------------------------------
# Risk bounds


@dataclass(frozen=True)
class BoundParams:
    """Constants entering the excess-risk bound and the sigma_n schedule.

    M and d describe the weight box, sigma the training perturbation, n
    the sample count, delta the confidence level; a, b and beta bound the
    loss by a + b*||theta||_inf^beta, kappa_phi bounds feature row norms
    and expectation_term is E[d(x)^(1/beta) / u(x)].
    """

    M: float
    d: int
    sigma: float = 1.0
    n: int = 1
    delta: float = 0.05
    a: float = 0.0
    b: float = 1.0
    beta: int = 1
    kappa_phi: float = 1.0
    expectation_term: float = 1.0

    def __post_init__(self):
        if self.M <= 0 or self.d < 1 or self.n < 1:
            raise ValueError("require M > 0, d >= 1, n >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.b <= 0 or self.kappa_phi <= 0 or self.expectation_term <= 0:
            raise ValueError("b, kappa_phi and expectation_term must be positive")
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")


def constant_C() -> float:
    """The universal constant 48*Integral_0^1 sqrt(-log x) dx = 24*sqrt(pi)."""
    return 24.0 * math.sqrt(math.pi)


def excess_risk_bound(params: BoundParams) -> float:
    """High-probability excess risk of the perturbed empirical minimizer:
    C*M*d/(sigma*sqrt(n)) + sqrt(2*log(2/delta)/n)."""
    if params.sigma <= 0:
        raise ValueError("the bound needs sigma > 0")
    first = constant_C() * params.M * params.d / (params.sigma * math.sqrt(params.n))
    second = math.sqrt(2.0 * math.log(2.0 / params.delta) / params.n)
    return first + second


def sigma_n(params: BoundParams) -> float:
    """Perturbation schedule balancing smoothing bias against the C-term:
    sqrt(C*M*sqrt(d) / (sqrt(n)*b*kappa_phi*expectation_term)); decays as n^(-1/4)."""
    num = constant_C() * params.M * math.sqrt(params.d)
    den = math.sqrt(params.n) * params.b * params.kappa_phi * params.expectation_term
    return math.sqrt(num / den)
