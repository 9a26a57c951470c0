"""Single-machine scheduling with release dates, minimizing total completion time.

Hard problem: one machine, jobs with processing times p_j >= 1 and
release dates r_j >= 0, no preemption; minimize the sum of completion
times.  Easy layer: sort jobs by a per-job parameter theta (the SPT rule
on predicted virtual processing times).  Post-processing: local search
over adjacent swaps and reinsertions, optionally wrapped in a perturbed
multi-sample decode.

Jobs are indexed 0..n-1; a schedule is a permutation of all job indices.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from . import learning
from .model import FeatureMatrix, PerturbationConfig, _as_weight_array

__all__ = [
    "SchedInstance",
    "SrptStats",
    "SCHED_FEATURE_DIM",
    "BRUTE_FORCE_JOB_LIMIT",
    "evaluate_schedule",
    "spt_layer",
    "srpt_preemptive",
    "features",
    "local_search",
    "perturbed_decode",
    "brute_force_schedule",
    "generate_sched_instance",
    "save_sched_instance",
    "load_sched_instance",
    "pipeline_order",
    "experience_loss_config",
]

SCHED_FEATURE_DIM = 11
BRUTE_FORCE_JOB_LIMIT = 9


@dataclass(frozen=True)
class SchedInstance:
    """Jobs with processing times p >= 1 and release dates r >= 0."""

    p: np.ndarray
    r: np.ndarray
    rho: float | None = None
    seed: int | None = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if p.ndim != 1 or p.shape != r.shape or p.shape[0] < 1:
            raise ValueError("p and r must be equal-length non-empty vectors")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(r))):
            raise ValueError("p and r must be finite")
        if p.min() < 1:
            raise ValueError("processing times must be >= 1")
        if r.min() < 0:
            raise ValueError("release dates must be >= 0")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def dim(self) -> int:
        return self.n


@dataclass(frozen=True)
class SrptStats:
    """Per-job statistics of the preemptive SRPT relaxation."""

    completion: np.ndarray
    first_start: np.ndarray
    preemptions: np.ndarray


def _check_permutation(x: SchedInstance, order) -> np.ndarray:
    order = np.asarray(order, dtype=int)
    if order.shape != (x.n,) or not np.array_equal(np.sort(order), np.arange(x.n)):
        raise ValueError("schedule must be a permutation of all jobs")
    return order


def _totals(p_ord: np.ndarray, r_ord: np.ndarray) -> np.ndarray:
    # C_k = max(r_k, C_{k-1}) + p_k unrolls to a running maximum:
    # C_k = P_k + max_{t<=k} (r_t - P_{t-1}) with P the prefix sums of p.
    pref = np.cumsum(p_ord)
    return pref + np.maximum.accumulate(r_ord - (pref - p_ord))


def evaluate_schedule(x: SchedInstance, order):
    """Total completion time and per-job completion times of a permutation."""
    order = _check_permutation(x, order)
    completions = _totals(x.p[order], x.r[order])
    by_job = np.empty(x.n)
    by_job[order] = completions
    return float(completions.sum()), by_job


def spt_layer(theta) -> np.ndarray:
    """Sort jobs by ascending theta; ties by ascending job index."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("theta must be a vector")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return np.argsort(theta, kind="stable")


def srpt_preemptive(x: SchedInstance) -> SrptStats:
    """Event-driven preemptive SRPT (optimal for the preemptive relaxation).

    At every release or completion the job with the least remaining time
    among released unfinished jobs runs; remaining-time ties go to the
    lower job index.  A job is counted as preempted each time it is
    displaced while unfinished.
    """
    n = x.n
    remaining = x.p.astype(float).copy()
    completion = np.zeros(n)
    first_start = np.zeros(n)
    started = np.zeros(n, dtype=bool)
    preemptions = np.zeros(n, dtype=int)

    release_order = np.argsort(x.r, kind="stable")
    ptr = 0
    t = 0.0
    ready: list[tuple[float, int]] = []
    done = 0
    while done < n:
        while ptr < n and x.r[release_order[ptr]] <= t:
            j = int(release_order[ptr])
            heapq.heappush(ready, (remaining[j], j))
            ptr += 1
        if not ready:
            t = float(x.r[release_order[ptr]])
            continue
        rem, j = heapq.heappop(ready)
        if not started[j]:
            started[j] = True
            first_start[j] = t
        next_release = float(x.r[release_order[ptr]]) if ptr < n else np.inf
        if t + rem <= next_release:
            t += rem
            remaining[j] = 0.0
            completion[j] = t
            done += 1
        else:
            rem -= next_release - t
            remaining[j] = rem
            t = next_release
            while ptr < n and x.r[release_order[ptr]] <= t:
                k = int(release_order[ptr])
                heapq.heappush(ready, (remaining[k], k))
                ptr += 1
            if ready and ready[0] < (rem, j):
                preemptions[j] += 1
            heapq.heappush(ready, (rem, j))
    return SrptStats(completion=completion, first_start=first_start, preemptions=preemptions)


def _min_rank(key: np.ndarray) -> np.ndarray:
    # 1 + #{k : key_k < key_j}; identical jobs get identical ranks.
    return np.searchsorted(np.sort(key), key, side="left") + 1.0


def _group_mean(values: np.ndarray, group: np.ndarray) -> np.ndarray:
    out = np.empty_like(values, dtype=float)
    for g in np.unique(group):
        mask = group == g
        out[mask] = values[mask].mean()
    return out


def features(x: SchedInstance) -> FeatureMatrix:
    """11 per-job features mixing raw data, ranks, and SRPT statistics.

    All entries are normalized by instance quantities (max, sum, horizon),
    so no further standardization is applied.  SRPT statistics are averaged
    over groups of jobs with identical (p, r): exchangeable jobs must get
    identical rows even though the simulation breaks their tie by id.
    """
    n = float(x.n)
    srpt = srpt_preemptive(x)
    horizon = srpt.completion.max()
    _, group = np.unique(np.column_stack([x.p, x.r]), axis=0, return_inverse=True)
    cols = [
        np.ones(x.n),
        x.p / x.p.max(),
        x.r / max(1.0, x.r.max()),
        _min_rank(x.p) / n,
        _min_rank(x.r) / n,
        _min_rank(x.r + x.p) / n,
        _group_mean(srpt.completion, group) / horizon,
        _group_mean(srpt.first_start, group) / horizon,
        _group_mean(srpt.preemptions.astype(float), group) / n,
        x.r / x.p.sum(),
        x.p / x.p.mean(),
    ]
    mat = np.column_stack(cols)
    kappa = float(np.sqrt((mat * mat).sum(axis=1)).max())
    return FeatureMatrix(values=mat, kappa_phi=kappa)


def local_search(x: SchedInstance, order) -> np.ndarray:
    """First-improvement descent over adjacent swaps, then reinsertions.

    Both neighbourhoods are scanned left to right; the first strictly
    improving move is applied and the scan restarts.  Stops at a local
    optimum, so the total never increases.
    """
    order = _check_permutation(x, order).copy()
    p, r = x.p, x.r
    total = float(_totals(p[order], r[order]).sum())
    n = x.n
    while True:
        improved = False
        for i in range(n - 1):
            cand = order.copy()
            cand[i], cand[i + 1] = cand[i + 1], cand[i]
            cand_total = float(_totals(p[cand], r[cand]).sum())
            if cand_total < total:
                order, total = cand, cand_total
                improved = True
                break
        if improved:
            continue
        for i in range(n):
            job = order[i]
            rest = np.delete(order, i)
            for k in range(n):
                if k == i:
                    continue
                cand = np.insert(rest, k, job)
                cand_total = float(_totals(p[cand], r[cand]).sum())
                if cand_total < total:
                    order, total = cand, cand_total
                    improved = True
                    break
            if improved:
                break
        if not improved:
            return order


def pipeline_order(
    x: SchedInstance, w, post: str = "none", phi: FeatureMatrix | None = None
) -> np.ndarray:
    """Pipeline at weights w: features -> theta -> SPT order -> post-processing."""
    if post not in ("none", "ls"):
        raise ValueError("post must be 'none' or 'ls'")
    if phi is None:
        phi = features(x)
    order = spt_layer(phi.values @ _as_weight_array(w))
    return local_search(x, order) if post == "ls" else order


def perturbed_decode(
    x: SchedInstance,
    w,
    sigma: float,
    nsamples: int = 150,
    seed: int = 0,
    post: str = "ls",
) -> np.ndarray:
    """Best schedule over the pipeline at w and at nsamples perturbed copies.

    Sample 0 is the unperturbed w, samples 1..nsamples use w + sigma*Z_k
    with a seed-fixed Gaussian matrix (prefixes are nested, so enlarging
    nsamples can only improve the result).  The winner is the
    deterministic (cost, sample index) minimum.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if nsamples < 0:
        raise ValueError("nsamples must be >= 0")
    w = _as_weight_array(w)
    phi = features(x)

    def run(weights):
        order = spt_layer(phi.values @ weights)
        if post == "ls":
            order = local_search(x, order)
        elif post != "none":
            raise ValueError("post must be 'none' or 'ls'")
        return float(_totals(x.p[order], x.r[order]).sum()), order

    best_cost, best_order = run(w)
    if sigma > 0 and nsamples > 0:
        gaussians = np.random.default_rng(seed).standard_normal((nsamples, w.shape[0]))
        for k in range(nsamples):
            cost, order = run(w + sigma * gaussians[k])
            if cost < best_cost:
                best_cost, best_order = cost, order
    return best_order


def brute_force_schedule(x: SchedInstance):
    """Exact minimum for n <= 9 as (total, permutation).

    Depth-first search over permutations in lexicographic order with a
    sound lower-bound prune (remaining jobs in SPT order, releases
    relaxed), so the returned permutation is exactly the lexicographically
    first optimal one that plain enumeration would select.
    """
    n = x.n
    if n > BRUTE_FORCE_JOB_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_JOB_LIMIT} jobs")
    p, r = x.p, x.r
    best_total = np.inf
    best: list[int] | None = None
    seq: list[int] = []

    def lower_bound(mask: int, t: float) -> float:
        rest = [j for j in range(n) if not mask >> j & 1]
        ps = sorted(p[j] for j in rest)
        acc = 0.0
        c = t
        for dur in ps:
            c += dur
            acc += c
        floor = sum(max(r[j], t) + p[j] for j in rest)
        return max(acc, floor)

    def search(mask: int, t: float, acc: float):
        nonlocal best_total, best
        if mask == (1 << n) - 1:
            if acc < best_total:
                best_total = acc
                best = seq.copy()
            return
        if acc + lower_bound(mask, t) >= best_total:
            return
        for j in range(n):
            if mask >> j & 1:
                continue
            c = max(t, r[j]) + p[j]
            seq.append(j)
            search(mask | 1 << j, c, acc + c)
            seq.pop()

    search(0, 0.0, 0.0)
    return float(best_total), np.asarray(best, dtype=int)


def generate_sched_instance(n: int, rho: float, seed: int) -> SchedInstance:
    """Random instance: p ~ U{1..100}, r ~ U{1..floor(50.5*n*rho)}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if rho <= 0:
        raise ValueError("rho must be positive")
    rng = np.random.default_rng(seed)
    p = rng.integers(1, 101, size=n).astype(float)
    r_max = max(1, int(50.5 * n * rho))
    r = rng.integers(1, r_max + 1, size=n).astype(float)
    return SchedInstance(p=p, r=r, rho=float(rho), seed=seed)


def save_sched_instance(path, x: SchedInstance) -> None:
    payload = {
        "n": x.n,
        "rho": x.rho,
        "p": [int(v) if float(v).is_integer() else float(v) for v in x.p],
        "r": [int(v) if float(v).is_integer() else float(v) for v in x.r],
        "seed": None if x.seed is None else int(x.seed),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_sched_instance(path) -> SchedInstance:
    with open(path) as fh:
        payload = json.load(fh)
    p = np.asarray(payload["p"], dtype=float)
    r = np.asarray(payload["r"], dtype=float)
    if p.shape[0] != int(payload["n"]):
        raise ValueError("instance file job count mismatch")
    return SchedInstance(p=p, r=r, rho=payload.get("rho"), seed=payload.get("seed"))


def experience_loss_config(
    instances,
    post: str = "ls",
    perturbation: PerturbationConfig | None = None,
) -> learning.LossConfig:
    """Loss for learning by experience: pipeline total normalized by n(n+1).

    The normalizer keeps instances of different sizes on one scale (the
    worst total grows quadratically in n).  Features are computed once
    per instance and local-search results are memoized by starting order.
    """
    if post not in ("none", "ls"):
        raise ValueError("post must be 'none' or 'ls'")
    feats: dict[int, np.ndarray] = {}
    searched: dict[tuple[int, tuple], float] = {}

    def pipeline_cost(x: SchedInstance, w: np.ndarray) -> float:
        phi = feats.get(id(x))
        if phi is None:
            phi = feats.setdefault(id(x), features(x).values)
        order = spt_layer(phi @ w)
        if post == "none":
            return float(_totals(x.p[order], x.r[order]).sum())
        key = (id(x), tuple(order.tolist()))
        cost = searched.get(key)
        if cost is None:
            improved = local_search(x, order)
            cost = searched.setdefault(
                key, float(_totals(x.p[improved], x.r[improved]).sum())
            )
        return cost

    def normalize(x: SchedInstance, cost: float) -> float:
        return cost / (x.n * (x.n + 1))

    return learning.LossConfig(
        pipeline_cost=pipeline_cost,
        normalize=normalize,
        dim=SCHED_FEATURE_DIM,
        perturbation=perturbation,
    )
