"""Genetic weight search: operators, determinism, and a step-by-step oracle.

The reference implementation below re-derives a whole run with explicit
scalar bookkeeping, drawing from an identically seeded generator in the
documented order; the evolved population must match it exactly.
"""

import math

import numpy as np
import pytest

from fusionkit import ga
from fusionkit.ensemble import PredictionRecord, majority_vote, nll, stack_outputs


def make_records(rng, n_records, n_classifiers, strong=None):
    records = []
    for i in range(n_records):
        truth = int(rng.integers(10))
        outputs = {}
        for j in range(n_classifiers):
            if strong is not None and j == strong:
                dist = np.zeros(10)
                correct = rng.random() < 0.9
                dist[truth if correct else (truth + 1) % 10] = 1.0
            else:
                dist = rng.dirichlet(np.ones(10))
            outputs[f"clf{j}"] = dist
        records.append(PredictionRecord(f"f{i}", "s0", float(i), truth, outputs))
    return records


def scalar_fitness(genes, outputs, truths, idx):
    """Oracle fitness: explicit per-record weighted sum and log loss."""
    total_w = float(np.sum(genes))
    if total_w == 0.0:
        return -np.inf
    loss = 0.0
    for i in idx:
        fused = np.zeros(10)
        for j, w in enumerate(genes):
            fused += w * outputs[i, j]
        fused /= total_w
        loss += -np.log(max(fused[truths[i]], 1e-15))
    return -loss / len(idx)


def reference_evolve(cfg, records, n_classifiers):
    """Hand-stepped run consuming the same RNG stream as ga.evolve."""
    outputs, truths, _ = stack_outputs(records)
    n_records = len(records)
    rng = np.random.default_rng(cfg.seed)
    population = [np.ones(n_classifiers)]
    for _ in range(cfg.population_size - 1):
        population.append(rng.random(n_classifiers))

    for _ in range(cfg.generations):
        m = math.ceil(cfg.fitness_subsample * n_records)
        idx = rng.choice(n_records, size=m, replace=False)
        fits = [scalar_fitness(g, outputs, truths, idx) for g in population]
        order = sorted(range(len(population)), key=lambda i: (-fits[i], i))
        n_elite = math.ceil(cfg.elite_fraction * cfg.population_size)
        parents = [population[i] for i in order[:n_elite]]
        rest = [population[i] for i in order[n_elite:]]
        n_extra = math.ceil(
            cfg.extra_parent_fraction * (cfg.population_size - n_elite)
        )
        for i in rng.choice(len(rest), size=n_extra, replace=False):
            parents.append(rest[i])
        n_mut = math.ceil(cfg.mutation_fraction * len(parents))
        mutants = []
        for i in rng.choice(len(parents), size=n_mut, replace=False):
            mutant = parents[i].copy()
            pos = rng.integers(n_classifiers)
            mutant[pos] = np.clip(
                mutant[pos] + rng.normal(0.0, ga.MUTATION_SIGMA), 0.0, 1.0
            )
            mutants.append(mutant)
        pool = parents + mutants
        children = []
        while len(pool) + len(children) < cfg.population_size:
            i, j = rng.choice(len(pool), size=2, replace=False)
            mask = rng.integers(0, 2, size=n_classifiers).astype(bool)
            children.append(np.where(mask, pool[i], pool[j]))
        population = (pool + children)[: cfg.population_size]

    full_idx = np.arange(n_records)
    fits = [scalar_fitness(g, outputs, truths, full_idx) for g in population]
    best = max(range(len(population)), key=lambda i: (fits[i], -i))
    return population, population[best], fits[best]


class TestInitPopulation:
    def test_first_chromosome_is_uniform(self):
        cfg = ga.GAConfig(seed=7)
        pop = ga.init_population(cfg, 10)
        assert len(pop) == 50
        assert (pop[0].genes == 1.0).all()
        assert all(c.fitness is None for c in pop)

    def test_same_seed_reproduces(self):
        cfg = ga.GAConfig(seed=7)
        a = ga.init_population(cfg, 10)
        b = ga.init_population(cfg, 10)
        for x, y in zip(a, b):
            assert (x.genes == y.genes).all()

    def test_genes_look_uniform(self):
        """One-sample KS statistic of all 50x10 genes against U[0,1]."""
        cfg = ga.GAConfig(seed=7)
        pop = ga.init_population(cfg, 10)
        draws = np.sort(np.concatenate([c.genes for c in pop]))
        n = draws.size
        grid = np.arange(1, n + 1) / n
        ks = max(np.abs(grid - draws).max(), np.abs(draws - (grid - 1.0 / n)).max())
        assert ks < 0.1

    def test_matches_evolve_seeding(self):
        """evolve must start from exactly the init_population chromosomes."""
        rng = np.random.default_rng(0)
        records = make_records(rng, 12, 3)
        cfg = ga.GAConfig(population_size=6, generations=1, seed=3)
        pop = ga.init_population(cfg, 3)
        ref_pop, _, _ = reference_evolve(cfg, records, 3)
        del ref_pop
        assert (pop[0].genes == 1.0).all()


class TestFitness:
    def test_uniform_chromosome_equals_negative_majority_nll(self):
        rng = np.random.default_rng(1)
        records = make_records(rng, 40, 4)
        outputs, truths, _ = stack_outputs(records)
        chrom = ga.WeightChromosome(genes=np.ones(4))
        got = ga.fitness(chrom, records, subsample=1.0, seed=0)
        assert got == pytest.approx(-nll(majority_vote(outputs), truths), abs=1e-12)

    def test_perfect_classifier_with_one_hot_weight(self):
        rng = np.random.default_rng(2)
        records = []
        for i in range(20):
            truth = int(rng.integers(10))
            perfect = np.zeros(10)
            perfect[truth] = 1.0
            records.append(PredictionRecord(
                f"f{i}", "s", float(i), truth,
                {"good": perfect, "noise": rng.dirichlet(np.ones(10))},
            ))
        chrom = ga.WeightChromosome(genes=np.array([1.0, 0.0]))
        assert ga.fitness(chrom, records, 1.0, 0) == pytest.approx(0.0, abs=1e-12)

    def test_matches_explicit_oracle(self):
        rng = np.random.default_rng(3)
        records = make_records(rng, 30, 5)
        outputs, truths, _ = stack_outputs(records)
        genes = rng.random(5)
        got = ga.fitness(ga.WeightChromosome(genes=genes), records, 1.0, 9)
        want = scalar_fitness(genes, outputs, truths, range(30))
        assert got == pytest.approx(want, abs=1e-12)

    def test_subsample_redrawn_from_seed(self):
        rng = np.random.default_rng(4)
        records = make_records(rng, 60, 3)
        chrom = ga.WeightChromosome(genes=rng.random(3))
        a = ga.fitness(chrom, records, 0.5, seed=1)
        b = ga.fitness(chrom, records, 0.5, seed=1)
        c = ga.fitness(chrom, records, 0.5, seed=2)
        assert a == b
        assert a != c

    def test_all_zero_chromosome_is_sentinel(self):
        rng = np.random.default_rng(5)
        records = make_records(rng, 10, 3)
        chrom = ga.WeightChromosome(genes=np.zeros(3))
        assert ga.fitness(chrom, records, 1.0, 0) == -np.inf


class TestEvolve:
    def test_trace_matches_hand_stepped_reference(self):
        """Population 4, one generation: every chromosome identical to oracle."""
        rng = np.random.default_rng(6)
        records = make_records(rng, 25, 3, strong=0)
        cfg = ga.GAConfig(population_size=4, generations=1, seed=11)
        result = ga.evolve(cfg, records, 3, return_details=True)
        ref_pop, ref_best, ref_fit = reference_evolve(cfg, records, 3)
        assert result.final_population.shape == (4, 3)
        for got, want in zip(result.final_population, ref_pop):
            np.testing.assert_array_equal(got, want)
        np.testing.assert_array_equal(result.best.genes, ref_best)
        assert result.best.fitness == pytest.approx(ref_fit, abs=1e-12)

    def test_trace_matches_reference_over_generations(self):
        rng = np.random.default_rng(7)
        records = make_records(rng, 40, 4, strong=1)
        cfg = ga.GAConfig(population_size=10, generations=3, seed=23)
        result = ga.evolve(cfg, records, 4, return_details=True)
        ref_pop, ref_best, _ = reference_evolve(cfg, records, 4)
        for got, want in zip(result.final_population, ref_pop):
            np.testing.assert_array_equal(got, want)
        np.testing.assert_array_equal(result.best.genes, ref_best)

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(8)
        records = make_records(rng, 50, 5, strong=2)
        cfg = ga.GAConfig(population_size=12, generations=2, seed=5)
        a = ga.evolve(cfg, records, 5)
        b = ga.evolve(cfg, records, 5)
        np.testing.assert_array_equal(a.genes, b.genes)
        assert a.fitness == b.fitness

    def test_population_invariants(self):
        rng = np.random.default_rng(9)
        records = make_records(rng, 30, 4)
        cfg = ga.GAConfig(population_size=14, generations=4, seed=2)
        result = ga.evolve(cfg, records, 4, return_details=True)
        pop = result.final_population
        assert pop.shape == (14, 4)
        assert (pop >= 0.0).all() and (pop <= 1.0).all()

    def test_returned_is_minimum_full_data_nll_of_final_population(self):
        rng = np.random.default_rng(10)
        records = make_records(rng, 35, 3, strong=0)
        cfg = ga.GAConfig(population_size=8, generations=2, seed=4)
        result = ga.evolve(cfg, records, 3, return_details=True)
        assert result.best.fitness == result.final_fitness.max()
        assert -result.best.fitness == pytest.approx(
            min(-f for f in result.final_fitness), abs=1e-12
        )

    def test_single_classifier(self):
        """Any positive weight fuses to the lone classifier's own output."""
        rng = np.random.default_rng(11)
        records = make_records(rng, 15, 1)
        cfg = ga.GAConfig(population_size=4, generations=1, seed=1)
        best = ga.evolve(cfg, records, 1)
        assert best.genes.shape == (1,)
        assert 0.0 <= best.genes[0] <= 1.0
        outputs, _, _ = stack_outputs(records)
        if best.genes[0] > 0:
            from fusionkit.ensemble import weighted_vote
            np.testing.assert_allclose(
                weighted_vote(outputs, best.genes), outputs[:, 0, :], atol=1e-12
            )

    def test_returned_weights_accuracy_is_scale_invariant(self):
        rng = np.random.default_rng(15)
        records = make_records(rng, 40, 4, strong=0)
        best = ga.evolve(ga.GAConfig(population_size=6, generations=2, seed=3),
                         records, 4)
        outputs, truths, _ = stack_outputs(records)
        from fusionkit.ensemble import accuracy, weighted_vote
        base = accuracy(weighted_vote(outputs, best.genes), truths)
        for scale in (1e-3, 0.5, 7.0, 1e4):
            assert accuracy(weighted_vote(outputs, scale * best.genes), truths) == base

    def test_single_record_dataset_allowed(self):
        rng = np.random.default_rng(12)
        records = make_records(rng, 1, 3)
        cfg = ga.GAConfig(population_size=4, generations=1, seed=6)
        best = ga.evolve(cfg, records, 3)
        assert best.genes.shape == (3,)

    def test_classifier_count_validated(self):
        rng = np.random.default_rng(13)
        records = make_records(rng, 10, 3)
        with pytest.raises(ValueError):
            ga.evolve(ga.GAConfig(population_size=4), records, 5)


class TestConfigValidation:
    def test_rejects_tiny_population(self):
        with pytest.raises(ValueError):
            ga.GAConfig(population_size=3)

    def test_rejects_out_of_range_fractions(self):
        with pytest.raises(ValueError):
            ga.GAConfig(elite_fraction=0.0)
        with pytest.raises(ValueError):
            ga.GAConfig(fitness_subsample=1.5)
        with pytest.raises(ValueError):
            ga.GAConfig(generations=0)


class TestWeightsFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        weights = rng.random(5)
        names = tuple(f"clf{i}" for i in range(5))
        path = tmp_path / "weights.txt"
        ga.save_weights(path, weights, names)
        loaded, loaded_names = ga.load_weights(path)
        assert (loaded == weights).all()
        assert loaded_names == names
