"""Two-stage maximum-weight spanning trees over scenarios.

Hard problem: pick first-stage edges E1 and, for each scenario s, a
disjoint second-stage set E_s so that E1 ∪ E_s is a spanning tree; costs
are c_e <= 0 for first-stage edges and d_es <= 0 per scenario, and the
objective  sum_{E1} c_e + (1/|S|) sum_s sum_{E_s} d_es  is minimized
(equivalently, maximum weight with the signs flipped).

Easy problem used as the pipeline's optimization layer: a single MST on
parametrized per-edge, per-stage weights (cbar, dbar).  The decoder turns
an easy solution into a feasible hard solution by completing the chosen
first stage optimally per scenario, against the candidate that buys
everything in the second stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import learning
from .graphs import Graph, UnionFind, grid_graph, mst_constrained, mst_kruskal
from .model import FeatureMatrix, PerturbationConfig, _as_weight_array

__all__ = [
    "TwoStageInstance",
    "TwoStageSolution",
    "EasySolution",
    "ThetaVector",
    "SubgradientConfig",
    "TWO_STAGE_FEATURE_DIM",
    "BRUTE_FORCE_EDGE_LIMIT",
    "evaluate_solution",
    "easy_layer",
    "easy_incidence",
    "incidence_vector",
    "decode",
    "features",
    "theta_tilde",
    "approx_baseline",
    "lagrangian_bound",
    "lagrangian_heuristic",
    "brute_force_optimum",
    "generate_instance",
    "save_instance",
    "load_instance",
    "pipeline_solution",
    "experience_loss_config",
]

TWO_STAGE_FEATURE_DIM = 34
BRUTE_FORCE_EDGE_LIMIT = 12

_QS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])

# feature column layout (34 columns; zeros mark the stage a block does
# not apply to)
_COL_BIAS = 0
_COL_C = 1
_COL_DMEAN = 2
_COL_QD = slice(3, 8)       # quantiles of own scenario costs
_COL_QNC = slice(8, 13)     # quantiles of neighbour first-stage costs
_COL_QND = slice(13, 18)    # quantiles of neighbour scenario costs
_COL_MSTC = 18              # in MST of first-stage costs
_COL_QMSTB = slice(19, 24)  # quantiles of per-scenario best-cost MST membership
_COL_QBF = slice(24, 29)    # ... restricted to scenarios where first stage is cheaper
_COL_QBS = slice(29, 34)    # ... restricted to scenarios where second stage is cheaper


@dataclass(frozen=True)
class TwoStageInstance:
    """Grid (or arbitrary connected) graph with first/second-stage costs.

    c has one entry per edge, d one row per edge and one column per
    scenario; all costs are <= 0.
    """

    graph: Graph
    c: np.ndarray
    d: np.ndarray
    width: int | None = None
    K: int | None = None
    seed: int | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if c.shape != (self.graph.num_edges,):
            raise ValueError("c must have one entry per edge")
        if d.ndim != 2 or d.shape[0] != self.graph.num_edges or d.shape[1] < 1:
            raise ValueError("d must be (num_edges, num_scenarios)")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
            raise ValueError("costs must be finite")
        if c.max(initial=0.0) > 0 or d.max(initial=0.0) > 0:
            raise ValueError("costs must be <= 0")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges

    @property
    def num_scenarios(self) -> int:
        return self.d.shape[1]

    @property
    def dim(self) -> int:
        """Number of easy-problem decision dimensions: (edge, stage) pairs."""
        return 2 * self.graph.num_edges


@dataclass(frozen=True)
class TwoStageSolution:
    """Feasible hard solution: first stage plus one completion per scenario."""

    first_stage: frozenset[int]
    second_stage: tuple[frozenset[int], ...]


@dataclass(frozen=True)
class EasySolution:
    """Easy-layer output: one spanning tree split into the two stages."""

    first_stage: frozenset[int]
    second_stage: frozenset[int]


@dataclass(frozen=True)
class ThetaVector:
    """Easy-problem parameters: one weight per (edge, stage)."""

    cbar: np.ndarray
    dbar: np.ndarray

    def __post_init__(self):
        cbar = np.asarray(self.cbar, dtype=float)
        dbar = np.asarray(self.dbar, dtype=float)
        if cbar.shape != dbar.shape or cbar.ndim != 1:
            raise ValueError("cbar and dbar must be vectors of equal length")
        if not (np.all(np.isfinite(cbar)) and np.all(np.isfinite(dbar))):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "cbar", cbar)
        object.__setattr__(self, "dbar", dbar)

    def as_array(self) -> np.ndarray:
        """Stacked layout: first-stage block then second-stage block."""
        return np.concatenate([self.cbar, self.dbar])

    @staticmethod
    def from_array(theta, num_edges: int) -> "ThetaVector":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * num_edges,):
            raise ValueError("theta must have 2*num_edges entries")
        return ThetaVector(cbar=theta[:num_edges], dbar=theta[num_edges:])


def evaluate_solution(x: TwoStageInstance, z: TwoStageSolution) -> float:
    """Hard-problem cost of z; raises if z is infeasible (names the scenario)."""
    if len(z.second_stage) != x.num_scenarios:
        raise ValueError(
            f"expected {x.num_scenarios} second-stage sets, got {len(z.second_stage)}"
        )
    graph = x.graph
    for s, es in enumerate(z.second_stage):
        if z.first_stage & es:
            raise ValueError(f"scenario {s}: first and second stage overlap")
        union = z.first_stage | es
        if len(union) != graph.num_vertices - 1:
            raise ValueError(f"scenario {s}: edge set is not a spanning tree")
        uf = UnionFind(graph.num_vertices)
        for eid in union:
            u, v = graph.edges[eid]
            if not uf.union(u, v):
                raise ValueError(f"scenario {s}: edge set is not a spanning tree")
    first = float(sum(x.c[e] for e in z.first_stage))
    second = sum(sum(x.d[e, s] for e in es) for s, es in enumerate(z.second_stage))
    return first + second / x.num_scenarios


def easy_layer(x: TwoStageInstance, theta: ThetaVector) -> EasySolution:
    """Minimize sum_{E1} cbar + sum_{E2} dbar over trees split in two stages.

    One MST on the pointwise minimum weights; each tree edge goes to the
    stage with the smaller parameter, ties toward the first stage.
    """
    if theta.cbar.shape != (x.num_edges,):
        raise ValueError("theta dimension does not match the instance")
    weights = np.minimum(theta.cbar, theta.dbar)
    tree = mst_kruskal(x.graph, weights)
    first = frozenset(e for e in tree if theta.cbar[e] <= theta.dbar[e])
    return EasySolution(first_stage=first, second_stage=frozenset(tree) - first)


def incidence_vector(x: TwoStageInstance, y: EasySolution) -> np.ndarray:
    """0/1 vector over (edge, stage) pairs, first-stage block first."""
    vec = np.zeros(x.dim)
    for e in y.first_stage:
        vec[e] = 1.0
    for e in y.second_stage:
        vec[x.num_edges + e] = 1.0
    return vec


def easy_incidence(x: TwoStageInstance, theta_array) -> np.ndarray:
    """easy_layer on a stacked theta array, returned as an incidence vector."""
    y = easy_layer(x, ThetaVector.from_array(theta_array, x.num_edges))
    return incidence_vector(x, y)


def decode(x: TwoStageInstance, y: EasySolution) -> TwoStageSolution:
    """Feasible hard solution from an easy one.

    Candidate A keeps y's first stage and completes it per scenario with
    a constrained MST on that scenario's costs (the optimal completion);
    candidate B postpones everything to the second stage.  Returns the
    cheaper candidate, ties toward A.
    """
    first = y.first_stage
    second_a = tuple(
        frozenset(mst_constrained(x.graph, x.d[:, s], first)) - first
        for s in range(x.num_scenarios)
    )
    cand_a = TwoStageSolution(first_stage=first, second_stage=second_a)
    cost_a = evaluate_solution(x, cand_a)
    second_b = tuple(mst_kruskal(x.graph, x.d[:, s]) for s in range(x.num_scenarios))
    cand_b = TwoStageSolution(first_stage=frozenset(), second_stage=second_b)
    cost_b = evaluate_solution(x, cand_b)
    return cand_a if cost_a <= cost_b else cand_b


def theta_tilde(x: TwoStageInstance) -> ThetaVector:
    """Raw-cost parameters (c_e, mean_s d_es) - the approximation baseline's theta."""
    return ThetaVector(cbar=x.c.copy(), dbar=x.d.mean(axis=1))


def approx_baseline(x: TwoStageInstance) -> TwoStageSolution:
    """Decode the easy solution at theta_tilde; 1/2|C*| + additive guarantee."""
    return decode(x, easy_layer(x, theta_tilde(x)))


def _quantiles5(v: np.ndarray) -> np.ndarray:
    return np.quantile(v, _QS)


def features(x: TwoStageInstance, standardize: bool = True) -> FeatureMatrix:
    """Fixed 34-column feature matrix with one row per (edge, stage).

    Rows 0..E-1 are the first-stage rows, rows E..2E-1 the second-stage
    rows.  Quantile blocks are the 5-point (min, 25%, median, 75%, max)
    summaries.  With standardize=True every column except the constant
    bias is shifted/scaled to zero mean and unit deviation over the
    instance's rows; constant columns become 0.
    """
    graph, c, d = x.graph, x.c, x.d
    n_edges, n_scen = x.num_edges, x.num_scenarios

    inc = graph.incident_edges()
    tree_c = mst_kruskal(graph, c)
    ind_c = np.zeros(n_edges)
    ind_c[list(tree_c)] = 1.0

    ind_b = np.zeros((n_edges, n_scen))
    for s in range(n_scen):
        best = np.minimum(c, d[:, s])
        ind_b[list(mst_kruskal(graph, best)), s] = 1.0
    first_cheaper = c[:, None] <= d
    best_first = ind_b * first_cheaper
    best_second = ind_b * ~first_cheaper

    q_d = np.quantile(d, _QS, axis=1).T
    q_mst = np.quantile(ind_b, _QS, axis=1).T
    q_bf = np.quantile(best_first, _QS, axis=1).T
    q_bs = np.quantile(best_second, _QS, axis=1).T

    q_nc = np.empty((n_edges, 5))
    q_nd = np.empty((n_edges, 5))
    for e, (u, v) in enumerate(graph.edges):
        nb = sorted(set(inc[u]) | set(inc[v]))
        q_nc[e] = _quantiles5(c[nb])
        q_nd[e] = _quantiles5(d[nb, :].ravel())

    mat = np.zeros((2 * n_edges, TWO_STAGE_FEATURE_DIM))
    fst = slice(0, n_edges)
    snd = slice(n_edges, 2 * n_edges)
    mat[:, _COL_BIAS] = 1.0
    mat[fst, _COL_C] = c
    mat[snd, _COL_DMEAN] = d.mean(axis=1)
    mat[snd, _COL_QD] = q_d
    mat[fst, _COL_QNC] = q_nc
    mat[snd, _COL_QND] = q_nd
    mat[fst, _COL_MSTC] = ind_c
    mat[snd, _COL_QMSTB] = q_mst
    mat[fst, _COL_QBF] = q_bf
    mat[snd, _COL_QBS] = q_bs

    if standardize:
        data = mat[:, 1:]
        mu = data.mean(axis=0)
        sd = data.std(axis=0)
        keep = sd > 0
        data[:, keep] = (data[:, keep] - mu[keep]) / sd[keep]
        data[:, ~keep] = 0.0

    kappa = float(np.sqrt((mat * mat).sum(axis=1)).max())
    return FeatureMatrix(values=mat, kappa_phi=kappa)


@dataclass(frozen=True)
class SubgradientConfig:
    """Polyak-style step s0*|best|/(||g||^2 + eps); s0 halves after a stall."""

    s0: float = 1.0
    halve_after: int = 50
    eps: float = 1e-12


def _scenario_subproblems(x: TwoStageInstance, lam: np.ndarray):
    """Per-scenario relaxed MSTs at multipliers lam; value and stage picks."""
    value = 0.0
    ybar = np.zeros((x.num_edges, x.num_scenarios))
    for s in range(x.num_scenarios):
        reduced = x.c + lam[:, s]
        weights = np.minimum(reduced, x.d[:, s])
        tree = np.fromiter(mst_kruskal(x.graph, weights), dtype=int)
        value += weights[tree].sum()
        take_first = tree[reduced[tree] <= x.d[tree, s]]
        ybar[take_first, s] = 1.0
    return value / x.num_scenarios, ybar


def lagrangian_bound(
    x: TwoStageInstance,
    iters: int = 500,
    step_cfg: SubgradientConfig | None = None,
):
    """Lower bound by relaxing nonanticipativity of the first stage.

    Scenario copies of the first-stage choice are priced by multipliers
    lam with zero mean across scenarios per edge; each L(lam) is a sum of
    independent per-scenario MSTs on min(c_e + lam_es, d_es) and bounds
    the optimum from below.  Projected subgradient ascent from lam = 0.

    Returns (best bound, final multipliers, best-so-far trace).
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    cfg = step_cfg or SubgradientConfig()
    lam = np.zeros((x.num_edges, x.num_scenarios))
    best = -np.inf
    trace = []
    s0 = cfg.s0
    stall = 0
    for _ in range(iters):
        value, ybar = _scenario_subproblems(x, lam)
        if value > best:
            best = value
            stall = 0
        else:
            stall += 1
            if stall >= cfg.halve_after:
                s0 /= 2.0
                stall = 0
        trace.append(best)
        g = ybar - ybar.mean(axis=1, keepdims=True)
        g_sq = float((g * g).sum())
        if g_sq <= cfg.eps:
            break  # consensus across scenarios: no ascent direction left
        scale = abs(best) if best != 0.0 else 1.0
        lam = lam + (s0 * scale / (g_sq + cfg.eps)) * g
        lam -= lam.mean(axis=1, keepdims=True)
    return best, lam, trace


def lagrangian_heuristic(x: TwoStageInstance, duals: np.ndarray) -> TwoStageSolution:
    """Primal solution from the duals' per-scenario stage votes.

    Edges picked first-stage by at least half the scenario subproblems
    are added greedily (descending vote share, then edge id) while they
    keep a forest; the forest is completed per scenario and compared
    against the empty-first-stage candidate.
    """
    lam = np.asarray(duals, dtype=float)
    if lam.shape != (x.num_edges, x.num_scenarios):
        raise ValueError("duals must be (num_edges, num_scenarios)")
    _, ybar = _scenario_subproblems(x, lam)
    score = ybar.mean(axis=1)
    order = sorted(np.flatnonzero(score >= 0.5), key=lambda e: (-score[e], e))
    uf = UnionFind(x.graph.num_vertices)
    forest = []
    for e in order:
        u, v = x.graph.edges[e]
        if uf.union(u, v):
            forest.append(int(e))
    first = frozenset(forest)
    second = tuple(
        frozenset(mst_constrained(x.graph, x.d[:, s], first)) - first
        for s in range(x.num_scenarios)
    )
    cand = TwoStageSolution(first_stage=first, second_stage=second)
    cost = evaluate_solution(x, cand)
    empty_second = tuple(mst_kruskal(x.graph, x.d[:, s]) for s in range(x.num_scenarios))
    empty = TwoStageSolution(first_stage=frozenset(), second_stage=empty_second)
    return cand if cost <= evaluate_solution(x, empty) else empty


def brute_force_optimum(x: TwoStageInstance):
    """Exact optimum for |E| <= 12 as (cost, solution).

    Every feasible first stage is a forest and the optimal completion
    given the first stage is a constrained MST per scenario, so
    enumerating all forests (by ascending edge-set bitmask, which fixes
    the tie-break) is exhaustive.
    """
    n_edges = x.num_edges
    if n_edges > BRUTE_FORCE_EDGE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_EDGE_LIMIT} edges")
    best_cost = np.inf
    best = None
    max_first = x.graph.num_vertices - 1
    for mask in range(1 << n_edges):
        edges = [e for e in range(n_edges) if mask >> e & 1]
        if len(edges) > max_first:
            continue
        uf = UnionFind(x.graph.num_vertices)
        if not all(uf.union(*x.graph.edges[e]) for e in edges):
            continue
        first = frozenset(edges)
        cost = sum(x.c[e] for e in edges)
        second = []
        acc = 0.0
        for s in range(x.num_scenarios):
            es = frozenset(mst_constrained(x.graph, x.d[:, s], first)) - first
            second.append(es)
            acc += sum(x.d[e, s] for e in es)
        cost += acc / x.num_scenarios
        if cost < best_cost:
            best_cost = cost
            best = TwoStageSolution(first_stage=first, second_stage=tuple(second))
    return float(best_cost), best


def generate_instance(
    width: int, K: int, num_scenarios: int, seed: int
) -> TwoStageInstance:
    """Random width x width grid instance: c ~ U{-20..0}, d ~ U{-K..0}."""
    if width < 2:
        raise ValueError("width must be >= 2")
    if K < 0:
        raise ValueError("K must be >= 0")
    if num_scenarios < 1:
        raise ValueError("num_scenarios must be >= 1")
    graph = grid_graph(width, width)
    rng = np.random.default_rng(seed)
    c = rng.integers(-20, 1, size=graph.num_edges).astype(float)
    d = rng.integers(-K, 1, size=(graph.num_edges, num_scenarios)).astype(float)
    return TwoStageInstance(graph=graph, c=c, d=d, width=width, K=K, seed=seed)


def _as_number(v: float):
    return int(v) if float(v).is_integer() else float(v)


def save_instance(path, x: TwoStageInstance) -> None:
    if x.width is None:
        raise ValueError("only grid instances with a recorded width are serializable")
    payload = {
        "width": int(x.width),
        "num_scenarios": x.num_scenarios,
        "c": [_as_number(v) for v in x.c],
        "d": [[_as_number(v) for v in row] for row in x.d],
        "seed": None if x.seed is None else int(x.seed),
        "K": None if x.K is None else int(x.K),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(path) -> TwoStageInstance:
    with open(path) as fh:
        payload = json.load(fh)
    width = int(payload["width"])
    graph = grid_graph(width, width)
    c = np.asarray(payload["c"], dtype=float)
    d = np.asarray(payload["d"], dtype=float)
    if d.shape != (graph.num_edges, int(payload["num_scenarios"])):
        raise ValueError("instance file scenario costs have the wrong shape")
    return TwoStageInstance(
        graph=graph,
        c=c,
        d=d,
        width=width,
        K=payload.get("K"),
        seed=payload.get("seed"),
    )


def pipeline_solution(x: TwoStageInstance, w, phi: FeatureMatrix | None = None):
    """Full pipeline at weights w: features -> theta -> easy layer -> decode."""
    if phi is None:
        phi = features(x)
    theta = phi.values @ _as_weight_array(w)
    return decode(x, easy_layer(x, ThetaVector.from_array(theta, x.num_edges)))


def experience_loss_config(
    pairs, perturbation: PerturbationConfig | None = None
) -> tuple[learning.LossConfig, list[TwoStageInstance]]:
    """Loss for learning by experience on (instance, lower_bound) pairs.

    The pipeline cost is normalized to the shifted relative gap
    (cost - LB) / max(1, |LB|) so instances of different sizes are
    comparable.  Features are computed once per instance and decoded
    candidates are cached by first-stage set, which keeps the black-box
    evaluations cheap.
    """
    instances = [x for x, _ in pairs]
    lower = {id(x): float(lb) for x, lb in pairs}
    feats: dict[int, np.ndarray] = {}
    decoded: dict[tuple[int, frozenset[int]], float] = {}

    def pipeline_cost(x: TwoStageInstance, w: np.ndarray) -> float:
        phi = feats.get(id(x))
        if phi is None:
            phi = feats.setdefault(id(x), features(x).values)
        theta = phi @ w
        y = easy_layer(x, ThetaVector.from_array(theta, x.num_edges))
        key = (id(x), y.first_stage)
        cost = decoded.get(key)
        if cost is None:
            cost = decoded.setdefault(key, evaluate_solution(x, decode(x, y)))
        return cost

    def normalize(x: TwoStageInstance, cost: float) -> float:
        lb = lower[id(x)]
        return (cost - lb) / max(1.0, abs(lb))

    cfg = learning.LossConfig(
        pipeline_cost=pipeline_cost,
        normalize=normalize,
        dim=TWO_STAGE_FEATURE_DIM,
        perturbation=perturbation,
    )
    return cfg, instances
