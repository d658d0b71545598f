"""NSGA-II search over ``(h, gamma_1..gamma_K)`` and Pareto-front selection.

Both objectives are maximised: ``j1`` is the SSIM between the original and
enhanced image, ``j2`` the entropy of the enhanced image.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cluster import ClusterModel
from .enhance import GAMMA_BOUNDS, H_BOUNDS, PreparedImage, apply_gamma_scsa, prepare, to_8bit
from .metrics import entropy, ssim, ssim_global
from .reconstruct import SpectraCache, default_cache

log = logging.getLogger(__name__)

__all__ = [
    "Chromosome",
    "Objectives",
    "ParetoFront",
    "GaConfig",
    "init_population",
    "evaluate",
    "dominates",
    "non_dominated_sort",
    "crowding_distance",
    "sbx_crossover",
    "poly_mutation",
    "nsga2",
    "run_nsga2",
    "asf_select",
]

INFEASIBLE = (-math.inf, 0.0)


@dataclass(frozen=True)
class Chromosome:
    h: float
    gammas: tuple

    @classmethod
    def from_genes(cls, genes) -> "Chromosome":
        genes = [float(g) for g in genes]
        return cls(h=genes[0], gammas=tuple(genes[1:]))

    @property
    def genes(self) -> np.ndarray:
        return np.array((self.h,) + tuple(self.gammas), dtype=float)

    def gammas_for(self, k: int) -> tuple:
        """Per-cluster gammas; a single shared gamma is broadcast to ``k`` clusters."""
        if len(self.gammas) == 1 and k != 1:
            return self.gammas * k
        if len(self.gammas) != k:
            raise ValueError(f"chromosome has {len(self.gammas)} gammas, need {k}")
        return self.gammas

    def as_dict(self) -> dict:
        return {"h": self.h, "gammas": list(self.gammas)}


@dataclass(frozen=True)
class Objectives:
    j1: float
    j2: float
    feasible: bool = True

    def as_array(self) -> np.ndarray:
        return np.array([self.j1, self.j2], dtype=float)


@dataclass
class ParetoFront:
    members: list
    history: list = field(default_factory=list)
    population: list = field(default_factory=list)
    evaluations: int = 0

    def __len__(self):
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "members": [dict(c.as_dict(), j1=o.j1, j2=o.j2) for c, o in self.members],
            "history": [list(map(float, row)) for row in self.history],
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 20
    generations: int = 10
    crossover_prob: float = 0.2
    mutation_prob: float = 0.5
    eta_c: float = 15.0
    eta_m: float = 20.0
    seed: int = 0
    single_gamma: bool = False
    h_bounds: tuple = H_BOUNDS
    gamma_bounds: tuple = GAMMA_BOUNDS
    workers: int | None = None
    global_ssim: bool = False  # whole-image SSIM for j1 instead of the windowed mean

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    def bounds(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        n_gamma = 1 if self.single_gamma else k
        lo = np.array([self.h_bounds[0]] + [self.gamma_bounds[0]] * n_gamma, dtype=float)
        hi = np.array([self.h_bounds[1]] + [self.gamma_bounds[1]] * n_gamma, dtype=float)
        return lo, hi


def _rng(seed: int, *tags: int) -> np.random.Generator:
    # Independent stream per (seed, purpose, generation, index).
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


_INIT, _TOURNAMENT, _VARIATION = 1, 2, 3


def init_population(config: GaConfig, k: int) -> list[Chromosome]:
    """Uniform random chromosomes within the configured bounds."""
    if k < 1:
        raise ValueError("k must be at least 1")
    lo, hi = config.bounds(k)
    rng = _rng(config.seed, _INIT)
    genes = lo + (hi - lo) * rng.random((config.population_size, lo.shape[0]))
    return [Chromosome.from_genes(g) for g in genes]


def evaluate(chrom: Chromosome, image, cluster_model: ClusterModel, *,
             cache: SpectraCache | None = default_cache, reference=None,
             global_ssim: bool = False) -> Objectives:
    """Objectives of one chromosome; pipeline failures yield an infeasible marker."""
    prepared = image if isinstance(image, PreparedImage) else prepare(image)
    if reference is None:
        reference = to_8bit(prepared.rgb)
    try:
        rgb, _, _ = apply_gamma_scsa(prepared, cluster_model, chrom.h,
                                     chrom.gammas_for(cluster_model.k), cache=cache)
        enhanced = to_8bit(rgb)
        j1 = (ssim_global if global_ssim else ssim)(reference, enhanced)
        j2 = entropy(enhanced)
        if not (math.isfinite(j1) and math.isfinite(j2)):
            raise ValueError("non-finite objective")
        return Objectives(j1=j1, j2=j2)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.debug("infeasible chromosome %s: %s", chrom, exc)
        return Objectives(*INFEASIBLE, feasible=False)


def dominates(a, b) -> bool:
    """Maximisation dominance: ``a >= b`` everywhere and ``>`` somewhere."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(a >= b) and np.any(a > b))


def non_dominated_sort(objectives) -> list[list[int]]:
    """Fast non-dominated sorting; returns fronts of indices, best first."""
    f = np.asarray(objectives, dtype=float)
    n = f.shape[0]
    if n == 0:
        return []
    ge = np.all(f[:, None, :] >= f[None, :, :], axis=2)
    gt = np.any(f[:, None, :] > f[None, :, :], axis=2)
    dom = ge & gt  # dom[p, q]: p dominates q
    counts = dom.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in np.flatnonzero(dom[p]):
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(int(q))
        current = sorted(nxt)
    return fronts


def crowding_distance(objectives) -> np.ndarray:
    """Crowding distance of each member of one front.

    Boundary members get ``inf``; members with a non-finite objective get 0
    and are ignored when measuring the others.
    """
    f = np.asarray(objectives, dtype=float)
    n = f.shape[0]
    dist = np.zeros(n)
    finite = np.all(np.isfinite(f), axis=1)
    idx = np.flatnonzero(finite)
    if idx.size <= 2:
        dist[idx] = np.inf
        return dist
    sub = f[idx]
    d = np.zeros(idx.size)
    for m in range(f.shape[1]):
        order = np.lexsort((np.arange(idx.size), sub[:, m]))
        vals = sub[order, m]
        d[order[0]] = d[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span > 0:
            d[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    dist[idx] = d
    return dist


def sbx_crossover(p1, p2, config: GaConfig, rng: np.random.Generator, bounds=None):
    """Simulated binary crossover, gene by gene with probability ``crossover_prob``."""
    x1 = np.asarray(p1.genes if isinstance(p1, Chromosome) else p1, dtype=float)
    x2 = np.asarray(p2.genes if isinstance(p2, Chromosome) else p2, dtype=float)
    lo, hi = bounds if bounds is not None else config.bounds(x1.shape[0] - 1)
    c1, c2 = x1.copy(), x2.copy()
    eta = config.eta_c
    for g in range(x1.shape[0]):
        u_cross, u = rng.random(), rng.random()
        if u_cross >= config.crossover_prob or abs(x1[g] - x2[g]) < 1e-14:
            continue
        if u <= 0.5:
            beta = (2.0 * u) ** (1.0 / (eta + 1.0))
        else:
            beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
        mean, half = 0.5 * (x1[g] + x2[g]), 0.5 * (x2[g] - x1[g])
        c1[g] = mean - beta * half
        c2[g] = mean + beta * half
    c1, c2 = np.clip(c1, lo, hi), np.clip(c2, lo, hi)
    if isinstance(p1, Chromosome):
        return Chromosome.from_genes(c1), Chromosome.from_genes(c2)
    return c1, c2


def poly_mutation(chrom, config: GaConfig, rng: np.random.Generator, bounds=None):
    """Bounded polynomial mutation, gene by gene with probability ``mutation_prob``."""
    x = np.asarray(chrom.genes if isinstance(chrom, Chromosome) else chrom, dtype=float).copy()
    lo, hi = bounds if bounds is not None else config.bounds(x.shape[0] - 1)
    eta = config.eta_m
    power = 1.0 / (eta + 1.0)
    for g in range(x.shape[0]):
        u_mut, u = rng.random(), rng.random()
        if u_mut >= config.mutation_prob:
            continue
        span = hi[g] - lo[g]
        if span <= 0:
            continue
        d1, d2 = (x[g] - lo[g]) / span, (hi[g] - x[g]) / span
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**power - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**power
        x[g] = x[g] + dq * span
    x = np.clip(x, lo, hi)
    return Chromosome.from_genes(x) if isinstance(chrom, Chromosome) else x


def _rank_and_crowding(objs: np.ndarray):
    fronts = non_dominated_sort(objs)
    rank = np.empty(objs.shape[0], dtype=int)
    crowd = np.empty(objs.shape[0])
    for r, front in enumerate(fronts):
        rank[front] = r
        crowd[front] = crowding_distance(objs[front])
    return fronts, rank, crowd


def _better(a: int, b: int, rank, crowd) -> int:
    if rank[a] != rank[b]:
        return a if rank[a] < rank[b] else b
    if crowd[a] != crowd[b]:
        return a if crowd[a] > crowd[b] else b
    return min(a, b)


def _environmental_selection(objs: np.ndarray, size: int) -> list[int]:
    fronts, _, _ = _rank_and_crowding(objs)
    chosen = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            continue
        crowd = crowding_distance(objs[front])
        order = sorted(range(len(front)), key=lambda t: (-crowd[t], front[t]))
        chosen.extend(front[t] for t in order[: size - len(chosen)])
        break
    return chosen


def nsga2(objective: Callable[[Chromosome], Objectives], k: int, config: GaConfig,
          initial: Sequence[Chromosome] | None = None) -> ParetoFront:
    """Generic elitist NSGA-II over chromosomes with ``k`` gammas.

    ``objective`` must be deterministic.  Evaluations are memoised by genome
    and, with ``config.workers > 1``, run on a thread pool; either way the
    result depends only on ``config.seed``.
    """
    bounds = config.bounds(k)
    memo: dict = {}

    def evaluate_all(pop):
        todo = []
        for c in pop:
            key = tuple(c.genes)
            if key not in memo and key not in todo:
                todo.append(key)
        chroms = [Chromosome.from_genes(key) for key in todo]
        if config.workers and config.workers > 1 and len(chroms) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(objective, chroms))
        else:
            results = [objective(c) for c in chroms]
        memo.update(zip(todo, results))
        return [memo[tuple(c.genes)] for c in pop]

    population = list(initial) if initial is not None else init_population(config, k)
    objectives = evaluate_all(population)
    history = [_best(objectives)]
    n = config.population_size

    for gen in range(config.generations):
        objs = np.array([o.as_array() for o in objectives])
        _, rank, crowd = _rank_and_crowding(objs)

        rng = _rng(config.seed, _TOURNAMENT, gen)
        picks = rng.integers(0, len(population), size=(n + n % 2, 2))
        pool = [_better(int(a), int(b), rank, crowd) for a, b in picks]

        children = []
        for pair in range(len(pool) // 2):
            vrng = _rng(config.seed, _VARIATION, gen, pair)
            c1, c2 = sbx_crossover(population[pool[2 * pair]], population[pool[2 * pair + 1]],
                                   config, vrng, bounds)
            children.append(poly_mutation(c1, config, vrng, bounds))
            children.append(poly_mutation(c2, config, vrng, bounds))
        children = children[:n]
        child_objs = evaluate_all(children)

        merged = population + children
        merged_objs = objectives + child_objs
        keep = _environmental_selection(np.array([o.as_array() for o in merged_objs]), n)
        population = [merged[i] for i in keep]
        objectives = [merged_objs[i] for i in keep]
        history.append(_best(objectives))

    objs = np.array([o.as_array() for o in objectives])
    front0 = non_dominated_sort(objs)[0]
    members, seen = [], set()
    for i in front0:
        key = tuple(population[i].genes)
        if key in seen or not objectives[i].feasible:
            continue
        seen.add(key)
        members.append((population[i], objectives[i]))
    members.sort(key=_canonical_key)
    return ParetoFront(members=members, history=history,
                       population=list(zip(population, objectives)), evaluations=len(memo))


def _best(objectives: Sequence[Objectives]) -> tuple:
    return (max(o.j1 for o in objectives), max(o.j2 for o in objectives))


def _canonical_key(member):
    chrom, obj = member
    return (-obj.j1, -obj.j2, chrom.h, chrom.gammas)


def run_nsga2(image, cluster_model: ClusterModel, config: GaConfig, *,
              cache: SpectraCache | None = default_cache) -> ParetoFront:
    """Optimise the enhancement parameters of ``image`` for a fixed clustering."""
    prepared = image if isinstance(image, PreparedImage) else prepare(image)
    reference = to_8bit(prepared.rgb)

    def objective(chrom: Chromosome) -> Objectives:
        return evaluate(chrom, prepared, cluster_model, cache=cache, reference=reference,
                        global_ssim=config.global_ssim)

    return nsga2(objective, cluster_model.k, config)


def asf_select(front, weights=(0.5, 0.5), ref_point=None, rho: float = 0.05):
    """Pick one member of ``front`` with an augmented achievement scalarising function.

    Objectives are min-max normalised over the front; the default reference
    point is the normalised ideal (per-objective maximum).  The minimiser of
    ``max_i w_i (z_i - f_i) + rho * sum_i w_i (z_i - f_i)`` is returned,
    ties going to the first member in canonical order.
    """
    members = front.members if isinstance(front, ParetoFront) else list(front)
    if not members:
        raise ValueError("cannot select from an empty front")
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    members = sorted(members, key=_canonical_key)
    f = np.array([o.as_array() for _, o in members])
    lo, hi = f.min(axis=0), f.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    norm = (f - lo) / span
    z = norm.max(axis=0) if ref_point is None else (np.asarray(ref_point, dtype=float) - lo) / span
    gap = w * (z - norm)
    scores = gap.max(axis=1) + rho * gap.sum(axis=1)
    best = int(np.argmin(scores))
    return members[best]
