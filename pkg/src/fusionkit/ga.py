"""Genetic search for ensemble weights that minimize the fused-vote NLL.

Each chromosome holds one weight per classifier, in [0, 1].  Fitness is the
negated NLL of the weighted vote, evaluated per generation on a fresh random
subsample of the records to damp overfitting; the final winner is re-ranked
on the full dataset.

Determinism contract: all randomness flows through one ``default_rng(seed)``
generator, drawn in a fixed order per generation — subsample indices, extra
parent selection, mutation (victims, then per-mutant gene index and noise),
then per-child pair choice and crossover mask.  Identical config, dataset,
and seed therefore reproduce the identical returned chromosome.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from fusionkit.ensemble import nll, stack_outputs, weighted_vote


@dataclass
class GAConfig:
    population_size: int = 50
    elite_fraction: float = 0.20
    extra_parent_fraction: float = 0.10
    mutation_fraction: float = 0.05
    generations: int = 5
    fitness_subsample: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        for name in ("elite_fraction", "extra_parent_fraction", "mutation_fraction",
                     "fitness_subsample"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


@dataclass
class WeightChromosome:
    genes: np.ndarray
    fitness: float | None = None


@dataclass
class GAResult:
    best: WeightChromosome
    final_population: np.ndarray = field(repr=False)
    final_fitness: np.ndarray = field(repr=False)


MUTATION_SIGMA = 0.1


def init_population(cfg, n_classifiers):
    """Initial chromosomes: all-ones (the uniform ensemble) plus uniform noise."""
    if n_classifiers < 1:
        raise ValueError("need at least one classifier")
    rng = np.random.default_rng(cfg.seed)
    genes = np.empty((cfg.population_size, n_classifiers))
    genes[0] = 1.0
    genes[1:] = rng.random((cfg.population_size - 1, n_classifiers))
    return [WeightChromosome(genes=g) for g in genes]


def _fitness_on(genes, outputs, truths, idx):
    if genes.sum() == 0:
        return -np.inf
    fused = weighted_vote(outputs[idx], genes)
    return -nll(fused, truths[idx])


def fitness(chrom, records, subsample, seed):
    """Negated NLL of the weighted vote over a random ``subsample`` of records.

    The subset is drawn fresh from ``seed`` on every call; an all-zero
    chromosome scores -inf so it can never win selection.
    """
    outputs, truths, _ = stack_outputs(records)
    n = outputs.shape[0]
    rng = np.random.default_rng(seed)
    m = math.ceil(subsample * n)
    idx = rng.choice(n, size=m, replace=False)
    return _fitness_on(np.asarray(chrom.genes, dtype=np.float64), outputs, truths, idx)


def evolve(cfg, records, n_classifiers, return_details=False):
    """Run the generational search and return the best chromosome.

    Per generation: rank the population by subsample fitness, keep the top
    ``elite_fraction`` as parents, add ``extra_parent_fraction`` of the rest
    at random, append mutated copies of a few parents (one gene perturbed by
    Gaussian noise, clamped to [0, 1]; originals kept), then refill to
    ``population_size`` with uniform per-gene crossover of random distinct
    parent pairs.  After the last generation every member of the final
    population is re-scored on the full dataset and the best is returned,
    with ``fitness`` set to its full-data score.
    """
    outputs, truths, _ = stack_outputs(records)
    n_records = outputs.shape[0]
    if outputs.shape[1] != n_classifiers:
        raise ValueError(
            f"records carry {outputs.shape[1]} classifiers, expected {n_classifiers}"
        )
    pop_size = cfg.population_size
    rng = np.random.default_rng(cfg.seed)
    population = np.empty((pop_size, n_classifiers))
    population[0] = 1.0
    population[1:] = rng.random((pop_size - 1, n_classifiers))

    for _ in range(cfg.generations):
        m = math.ceil(cfg.fitness_subsample * n_records)
        idx = rng.choice(n_records, size=m, replace=False)
        fits = np.array([_fitness_on(g, outputs, truths, idx) for g in population])
        order = np.argsort(-fits, kind="stable")

        n_elite = math.ceil(cfg.elite_fraction * pop_size)
        elite = population[order[:n_elite]]
        remaining = population[order[n_elite:]]
        n_extra = math.ceil(cfg.extra_parent_fraction * (pop_size - n_elite))
        extra = remaining[rng.choice(pop_size - n_elite, size=n_extra, replace=False)]
        parents = np.vstack([elite, extra])

        n_mut = math.ceil(cfg.mutation_fraction * parents.shape[0])
        victims = rng.choice(parents.shape[0], size=n_mut, replace=False)
        mutants = np.empty((n_mut, n_classifiers))
        for k, i in enumerate(victims):
            mutant = parents[i].copy()
            pos = rng.integers(n_classifiers)
            mutant[pos] = np.clip(mutant[pos] + rng.normal(0.0, MUTATION_SIGMA), 0.0, 1.0)
            mutants[k] = mutant

        pool = np.vstack([parents, mutants])
        n_children = max(0, pop_size - pool.shape[0])
        children = np.empty((n_children, n_classifiers))
        for k in range(n_children):
            i, j = rng.choice(pool.shape[0], size=2, replace=False)
            mask = rng.integers(0, 2, size=n_classifiers).astype(bool)
            children[k] = np.where(mask, pool[i], pool[j])
        population = np.vstack([pool, children])[:pop_size]

    full_idx = np.arange(n_records)
    final_fits = np.array([_fitness_on(g, outputs, truths, full_idx) for g in population])
    best_i = int(np.argmax(final_fits))
    best = WeightChromosome(genes=population[best_i].copy(), fitness=float(final_fits[best_i]))
    if return_details:
        return GAResult(best=best, final_population=population, final_fitness=final_fits)
    return best


WEIGHTS_HEADER = "# classifiers:"


def save_weights(path, weights, classifier_names):
    lines = [WEIGHTS_HEADER + " " + " ".join(classifier_names)]
    lines += [repr(float(w)) for w in weights]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_weights(path):
    """Read a weights file; returns (weights array, classifier names or None)."""
    names = None
    weights = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith(WEIGHTS_HEADER):
                names = tuple(line[len(WEIGHTS_HEADER):].split())
            elif not line.startswith("#"):
                weights.append(float(line))
    return np.asarray(weights, dtype=np.float64), names
