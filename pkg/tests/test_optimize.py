import math

import numpy as np
import pytest

from scsa.cluster import kmeans_pp
from scsa.enhance import apply_gamma_scsa, prepare, to_8bit
from scsa.metrics import entropy, ssim, ssim_global
from scsa.optimize import (
    Chromosome,
    GaConfig,
    Objectives,
    ParetoFront,
    asf_select,
    crowding_distance,
    dominates,
    evaluate,
    init_population,
    non_dominated_sort,
    nsga2,
    poly_mutation,
    sbx_crossover,
)
from scsa.reconstruct import SpectraCache

from _fixtures import low_contrast_color


def brute_fronts(points):
    remaining = set(range(len(points)))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining
                       if not any(dominates(points[j], points[i]) for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


class TestChromosome:
    def test_genes_round_trip(self):
        c = Chromosome.from_genes([2.0, 3.0, 4.0])
        assert c.h == 2.0 and c.gammas == (3.0, 4.0)
        np.testing.assert_array_equal(c.genes, [2, 3, 4])

    def test_single_gamma_broadcast(self):
        assert Chromosome(1.0, (5.0,)).gammas_for(3) == (5.0, 5.0, 5.0)

    def test_gamma_count_mismatch(self):
        with pytest.raises(ValueError):
            Chromosome(1.0, (1.0, 2.0)).gammas_for(3)


class TestSorting:
    def test_dominates(self):
        assert dominates([1, 1], [0, 1])
        assert not dominates([1, 1], [1, 1])
        assert not dominates([1, 0], [0, 1])

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_brute_force(self, seed):
        pts = np.random.default_rng(seed).integers(0, 8, (50, 2)).astype(float)
        assert non_dominated_sort(pts) == brute_fronts(pts)

    def test_empty(self):
        assert non_dominated_sort(np.zeros((0, 2))) == []

    def test_crowding_two_members(self):
        assert np.all(np.isinf(crowding_distance([[0, 1], [1, 0]])))

    def test_crowding_collinear(self):
        d = crowding_distance([[0, 2], [1, 1], [2, 0]])
        assert np.isinf(d[0]) and np.isinf(d[2]) and d[1] == pytest.approx(2.0)

    def test_crowding_ignores_infeasible(self):
        d = crowding_distance([[0, 2], [1, 1], [2, 0], [-math.inf, 0]])
        assert d[3] == 0 and d[1] == pytest.approx(2.0)


class TestOperators:
    cfg = GaConfig(crossover_prob=1.0, mutation_prob=1.0)
    bounds = (np.array([0.05, 1.0, 1.0]), np.array([20.0, 15.0, 15.0]))

    def test_sbx_identical_parents(self):
        p = np.array([3.0, 4.0, 5.0])
        c1, c2 = sbx_crossover(p, p, self.cfg, np.random.default_rng(0), self.bounds)
        np.testing.assert_array_equal(c1, p)
        np.testing.assert_array_equal(c2, p)

    def test_sbx_preserves_mean_inside_bounds(self):
        rng = np.random.default_rng(1)
        p1, p2 = np.array([5.0, 5.0, 5.0]), np.array([7.0, 9.0, 6.0])
        for _ in range(100):
            c1, c2 = sbx_crossover(p1, p2, self.cfg, rng, self.bounds)
            inside = (c1 > self.bounds[0]) & (c1 < self.bounds[1]) & (c2 > self.bounds[0]) & (c2 < self.bounds[1])
            np.testing.assert_allclose((c1 + c2)[inside], (p1 + p2)[inside])

    def test_sbx_bounds_fuzz(self):
        rng = np.random.default_rng(2)
        lo, hi = self.bounds
        for _ in range(500):
            p1 = lo + (hi - lo) * rng.random(3)
            p2 = lo + (hi - lo) * rng.random(3)
            for c in sbx_crossover(p1, p2, self.cfg, rng, self.bounds):
                assert np.all(c >= lo) and np.all(c <= hi)

    def test_sbx_spread_shrinks_with_eta(self):
        p1, p2 = np.array([5.0, 5.0, 5.0]), np.array([7.0, 7.0, 7.0])

        def spread(eta):
            cfg = GaConfig(crossover_prob=1.0, eta_c=eta)
            rng = np.random.default_rng(3)
            return np.mean([np.abs(sbx_crossover(p1, p2, cfg, rng, self.bounds)[0] - 6).mean()
                            for _ in range(400)])
        assert spread(2) > spread(15) > spread(100)

    def test_sbx_probability_zero(self):
        cfg = GaConfig(crossover_prob=0.0)
        p1, p2 = np.array([5.0, 5.0, 5.0]), np.array([7.0, 7.0, 7.0])
        c1, c2 = sbx_crossover(p1, p2, cfg, np.random.default_rng(0), self.bounds)
        np.testing.assert_array_equal(c1, p1)
        np.testing.assert_array_equal(c2, p2)

    def test_mutation_probability_zero(self):
        cfg = GaConfig(mutation_prob=0.0)
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(poly_mutation(x, cfg, np.random.default_rng(0), self.bounds), x)

    def test_mutation_bounds_fuzz(self):
        rng = np.random.default_rng(4)
        lo, hi = self.bounds
        for _ in range(500):
            x = lo + (hi - lo) * rng.random(3)
            y = poly_mutation(x, self.cfg, rng, self.bounds)
            assert np.all(y >= lo) and np.all(y <= hi)

    def test_mutation_displacement_shrinks_with_eta(self):
        x = np.array([10.0, 8.0, 8.0])

        def disp(eta):
            cfg = GaConfig(mutation_prob=1.0, eta_m=eta)
            rng = np.random.default_rng(5)
            return np.mean([np.abs(poly_mutation(x, cfg, rng, self.bounds) - x).mean()
                            for _ in range(400)])
        assert disp(5) > disp(20) > disp(100)

    def test_chromosome_in_chromosome_out(self):
        c = Chromosome(2.0, (3.0, 4.0))
        rng = np.random.default_rng(0)
        assert isinstance(poly_mutation(c, self.cfg, rng), Chromosome)
        assert all(isinstance(o, Chromosome) for o in sbx_crossover(c, c, self.cfg, rng))


class TestPopulation:
    def test_bounds_and_size(self):
        cfg = GaConfig(population_size=30)
        pop = init_population(cfg, 3)
        assert len(pop) == 30
        for c in pop:
            assert 0.05 <= c.h <= 20 and len(c.gammas) == 3
            assert all(1 <= g <= 15 for g in c.gammas)

    def test_deterministic(self):
        assert init_population(GaConfig(seed=4), 2) == init_population(GaConfig(seed=4), 2)
        assert init_population(GaConfig(seed=4), 2) != init_population(GaConfig(seed=5), 2)

    def test_uniform(self):
        pop = init_population(GaConfig(population_size=2000, seed=1), 1)
        gam = np.array([c.gammas[0] for c in pop])
        counts, _ = np.histogram(gam, bins=10, range=(1, 15))
        chi2 = np.sum((counts - 200) ** 2 / 200)
        assert chi2 < 27.88  # 99.9% quantile, 9 dof

    def test_single_gamma(self):
        pop = init_population(GaConfig(single_gamma=True), 4)
        assert all(len(c.gammas) == 1 for c in pop)

    @pytest.mark.parametrize("kw", [{"population_size": 1}, {"generations": -1},
                                    {"crossover_prob": 1.5}])
    def test_invalid_config(self, kw):
        with pytest.raises(ValueError):
            GaConfig(**kw)


def _toy_objective(chrom):
    # Conflicting, separable objectives with optima at opposite corners.
    x = (chrom.genes - np.array([0.05, 1.0])) / np.array([19.95, 14.0])
    return Objectives(j1=-float(np.sum(x**2)), j2=-float(np.sum((1 - x) ** 2)))


class TestNsga2:
    cfg = GaConfig(population_size=20, generations=30, seed=0)

    def test_converges_toward_extremes(self):
        front = nsga2(_toy_objective, 1, self.cfg)
        best_j1 = max(o.j1 for _, o in front.members)
        best_j2 = max(o.j2 for _, o in front.members)
        # the worst value on the box is -2
        assert best_j1 >= -0.05 * 2 and best_j2 >= -0.05 * 2

    def test_front_non_dominated(self):
        front = nsga2(_toy_objective, 1, self.cfg)
        objs = [o.as_array() for _, o in front.members]
        for a in objs:
            assert not any(dominates(b, a) for b in objs)

    def test_elitism(self):
        front = nsga2(_toy_objective, 1, self.cfg)
        h = np.array(front.history)
        assert np.all(np.diff(h[:, 0]) >= 0) and np.all(np.diff(h[:, 1]) >= 0)
        assert len(front.history) == self.cfg.generations + 1

    def test_deterministic_and_workers(self):
        a = nsga2(_toy_objective, 1, self.cfg)
        b = nsga2(_toy_objective, 1, GaConfig(population_size=20, generations=30, seed=0, workers=4))
        assert a.to_dict() == b.to_dict()

    def test_memoised(self):
        calls = []

        def counted(c):
            calls.append(c)
            return _toy_objective(c)
        front = nsga2(counted, 1, GaConfig(population_size=10, generations=5))
        assert len(calls) == front.evaluations
        assert len({tuple(c.genes) for c in calls}) == len(calls)

    def test_infeasible_excluded(self):
        def obj(c):
            if c.h > 10:
                return Objectives(-math.inf, 0.0, feasible=False)
            return _toy_objective(c)
        front = nsga2(obj, 1, GaConfig(population_size=10, generations=3))
        assert all(o.feasible and c.h <= 10 for c, o in front.members)


class TestAsf:
    def _front(self, pts):
        return ParetoFront(members=[(Chromosome(float(i + 1), (1.0,)), Objectives(*p))
                                    for i, p in enumerate(pts)])

    def test_single_member(self):
        f = self._front([(0.5, 7.0)])
        assert asf_select(f)[1].j1 == 0.5

    def test_extreme_weights(self):
        f = self._front([(0.9, 5.0), (0.7, 6.0), (0.5, 7.0)])
        assert asf_select(f, weights=(1.0, 1e-6))[1].j1 == 0.9
        assert asf_select(f, weights=(1e-6, 1.0))[1].j2 == 7.0

    def test_balanced_prefers_knee(self):
        f = self._front([(1.0, 0.0), (0.8, 0.8), (0.0, 1.0)])
        assert asf_select(f)[1].j1 == 0.8

    @pytest.mark.parametrize("seed", range(3))
    def test_scan_oracle(self, seed):
        rng = np.random.default_rng(seed)
        j1 = np.sort(rng.uniform(0, 1, 8))
        j2 = np.sort(rng.uniform(5, 10, 8))[::-1]
        f = self._front(list(zip(j1, j2)))
        lo1, hi1, lo2, hi2 = j1.min(), j1.max(), j2.min(), j2.max()
        best, best_s = None, math.inf
        for a, b in sorted(zip(j1, j2), key=lambda p: (-p[0], -p[1])):
            g1 = 0.5 * (1 - (a - lo1) / (hi1 - lo1))
            g2 = 0.5 * (1 - (b - lo2) / (hi2 - lo2))
            s = max(g1, g2) + 0.05 * (g1 + g2)
            if s < best_s:
                best, best_s = a, s
        assert asf_select(f)[1].j1 == best

    def test_empty(self):
        with pytest.raises(ValueError):
            asf_select([])

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            asf_select(self._front([(1, 1)]), weights=(0, 1))


class TestEvaluate:
    img = low_contrast_color(24)

    def test_matches_direct_pipeline(self):
        prepared = prepare(self.img)
        model = kmeans_pp(prepared.potential, 2)
        chrom = Chromosome(2.0, (3.0, 6.0))
        obj = evaluate(chrom, self.img, model, cache=SpectraCache())
        rgb, _, _ = apply_gamma_scsa(prepared, model, 2.0, (3.0, 6.0), SpectraCache())
        assert obj.feasible
        assert obj.j1 == ssim(to_8bit(prepared.rgb), to_8bit(rgb))
        assert obj.j2 == entropy(to_8bit(rgb))

    def test_global_ssim_toggle(self):
        prepared = prepare(self.img)
        model = kmeans_pp(prepared.potential, 2)
        obj = evaluate(Chromosome(2.0, (3.0, 6.0)), prepared, model, cache=None, global_ssim=True)
        rgb, _, _ = apply_gamma_scsa(prepared, model, 2.0, (3.0, 6.0), None)
        assert obj.j1 == ssim_global(to_8bit(prepared.rgb), to_8bit(rgb))

    def test_empty_cluster_gamma_irrelevant(self):
        prepared = prepare(self.img)
        model = kmeans_pp(prepared.potential, 2)
        # append a cluster center no pixel is nearest to
        import dataclasses
        far = dataclasses.replace(model, k=3, centers=np.append(model.centers, 1e6))
        a = evaluate(Chromosome(2.0, (3.0, 6.0, 1.0)), prepared, far, cache=None)
        b = evaluate(Chromosome(2.0, (3.0, 6.0, 14.0)), prepared, far, cache=None)
        assert a == b

    def test_infeasible_marker(self):
        flat = np.full((8, 8, 3), 0.5)
        prepared = prepare(flat)
        model = kmeans_pp(np.array([0.0, 1.0]), 1)
        import dataclasses
        model = dataclasses.replace(model, labels=np.zeros((8, 8), dtype=int))
        obj = evaluate(Chromosome(20.0, (1.0,)), prepared, model, cache=None)
        assert not obj.feasible and obj.j1 == -math.inf
