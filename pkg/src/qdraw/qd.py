"""The evolutionary engine.

Search runs over a k-means niching of the 2-D feature space: each
cluster centroid owns one niche holding its best-found genome, and
accepted elites pull their centroid toward themselves. Offspring are
bred by sampling niches uniformly (empty niches inject fresh random
genomes). A fitness-only GA with truncation selection serves as the
diversity-off control.

The engine is decoupled from rendering and embedding: run_qd/run_ga take
callables (generator, fitness_fn, embedder), so tests can substitute
stubs and the pipeline wires in the real implementations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .drawgen import GENE_COUNT, random_genome, validate_genome
from .errors import ValidationError
from .seeding import STREAM_BREED, STREAM_RENDER, child_seed

KMEANS_RESTARTS = 16
KMEANS_MAX_ITER = 300
KMEANS_EXACT_LIMIT = 4096  # enumerate assignments when k**n stays below this


@dataclass(frozen=True)
class RunConfig:
    k: int = 25
    e: int = 50
    lam: int = 15
    r: float = 1.0 / GENE_COUNT
    f: float = 0.25
    alpha: float = 0.25
    master_seed: int = 0
    mode: str = "quality-diversity"
    canvas_size: int = 512
    fitness_size: int = 256
    centroid_update: str = "per-acceptance"
    elitism: bool = True
    m_neighbours: int = 5

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise ValidationError("; ".join(problems))

    def validate(self) -> list:
        """All constraint violations, not just the first."""
        problems = []
        if self.k < 2:
            problems.append(f"k must be >= 2, got {self.k}")
        if self.e < 1:
            problems.append(f"e must be >= 1, got {self.e}")
        if self.lam < 1:
            problems.append(f"lambda must be >= 1, got {self.lam}")
        if not 0.0 <= self.r <= 1.0:
            problems.append(f"r must be in [0,1], got {self.r}")
        if not 0.0 < self.f <= 1.0:
            problems.append(f"f must be in (0,1], got {self.f}")
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must be in [0,1], got {self.alpha}")
        if self.mode not in ("quality-diversity", "fitness-only-GA"):
            problems.append(f"unknown mode '{self.mode}'")
        if self.canvas_size < 64:
            problems.append(f"canvas_size must be >= 64, got {self.canvas_size}")
        if self.fitness_size < 1 or self.canvas_size % self.fitness_size != 0:
            problems.append(
                f"fitness_size {self.fitness_size} must divide canvas_size {self.canvas_size}"
            )
        if self.centroid_update not in ("per-acceptance", "per-generation"):
            problems.append(f"unknown centroid_update '{self.centroid_update}'")
        if self.m_neighbours < 1:
            problems.append(f"m_neighbours must be >= 1, got {self.m_neighbours}")
        return problems


@dataclass(frozen=True)
class Elite:
    genome: np.ndarray
    fitness: float
    map_pos: np.ndarray
    generation_found: int
    render_seed: int = 0  # seed the scored phenotype was rendered with


@dataclass
class Niche:
    centroid: np.ndarray
    elite: Optional[Elite] = None


@dataclass
class EliteArchive:
    niches: list
    generation: int = 0

    @property
    def k(self) -> int:
        return len(self.niches)

    def populated_count(self) -> int:
        return sum(1 for n in self.niches if n.elite is not None)

    def diversity(self) -> float:
        return self.populated_count() / self.k

    def mean_elite_fitness(self) -> float:
        fits = [n.elite.fitness for n in self.niches if n.elite is not None]
        return float(np.mean(fits)) if fits else 0.0

    def niche_fitness(self) -> np.ndarray:
        """Per-niche elite fitness, NaN where empty."""
        out = np.full(self.k, np.nan)
        for i, n in enumerate(self.niches):
            if n.elite is not None:
                out[i] = n.elite.fitness
        return out

    def elites(self) -> list:
        return [n.elite for n in self.niches if n.elite is not None]


@dataclass(frozen=True)
class QDGenStats:
    generation: int
    mean_elite_fitness: float
    diversity: float
    populated: int
    niche_fitness: np.ndarray


@dataclass(frozen=True)
class GAGenStats:
    generation: int
    best_fitness: float
    mean_fitness: float


# --------------------------------------------------------------- k-means

def _nearest(centroids: np.ndarray, point: np.ndarray) -> int:
    d = ((centroids - point) ** 2).sum(axis=1)
    return int(np.argmin(d))  # argmin takes the lowest index on ties


def _kmeans_once(points: np.ndarray, k: int, rng: np.random.Generator):
    n = points.shape[0]
    # k-means++ seeding
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[j] = points[idx]
        np.minimum(closest, ((points - centroids[j]) ** 2).sum(axis=1), out=closest)

    assignments = np.full(n, -1, dtype=np.int64)
    objectives = []
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        objectives.append(float(d2[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for j in range(k):
            members = points[assignments == j]
            if len(members):  # empty cluster keeps its previous centroid
                centroids[j] = members.mean(axis=0)
    return centroids, assignments, objectives


def _kmeans_exact(points: np.ndarray, k: int):
    """Provably optimal clustering of a tiny instance by enumeration.

    Descent from data-point seedings cannot guarantee the global optimum:
    there are 4-point instances where every seeding's Lloyd fixpoint is
    suboptimal (near-duplicate pairs make the best grouping invisible to
    greedy assignment). Enumerating canonical assignments (label j may
    first appear only after j-1, all k labels used) is exact and cheap at
    this size; ties keep the enumeration-earliest partition.
    """
    n = points.shape[0]
    best_cost = np.inf
    best_centroids = None
    for assign in itertools.product(range(k), repeat=n):
        top = -1
        canonical = True
        for a in assign:
            if a > top + 1:
                canonical = False
                break
            if a == top + 1:
                top = a
        if not canonical or top != k - 1:
            continue
        cost = 0.0
        centroids = np.empty((k, points.shape[1]))
        for j in range(k):
            block = points[[i for i, a in enumerate(assign) if a == j]]
            centroids[j] = block.mean(axis=0)
            cost += float(((block - centroids[j]) ** 2).sum())
        if cost < best_cost:
            best_cost = cost
            best_centroids = centroids
    d2 = ((points[:, None, :] - best_centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = d2.argmin(axis=1).astype(np.int64)
    return best_centroids, assignments, [float(d2[np.arange(n), assignments].sum())]


def kmeans(points: np.ndarray, k: int, seed: int, return_history: bool = False):
    """k-means++ plus Lloyd iterations, best of several deterministic restarts.

    Tiny instances (k**n small) are instead solved exactly by partition
    enumeration, independent of the seed. Restarts guard against the poor
    local optima single-shot seeding can reach; ties between restarts keep
    the earliest. Assignment ties go to the lowest centroid index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValidationError(f"kmeans expects 2-D point array, got shape {pts.shape}")
    n = pts.shape[0]
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValidationError(f"kmeans needs at least k={k} points, got {n}")
    if n <= 12 and k**n <= KMEANS_EXACT_LIMIT:
        centroids, assignments, objectives = _kmeans_exact(pts, k)
    else:
        best = None
        for restart in range(KMEANS_RESTARTS):
            rng = np.random.Generator(np.random.PCG64(child_seed(seed, restart)))
            centroids, assignments, objectives = _kmeans_once(pts, k, rng)
            if best is None or objectives[-1] < best[2][-1]:
                best = (centroids, assignments, objectives)
        centroids, assignments, objectives = best
    if return_history:
        return centroids, assignments, objectives
    return centroids, assignments


def init_archive(map_points: np.ndarray, k: int, seed: int) -> EliteArchive:
    """Empty archive whose niche centroids come from corpus k-means."""
    centroids, _ = kmeans(map_points, k, seed)
    return EliteArchive(niches=[Niche(centroid=c.copy()) for c in centroids])


# --------------------------------------------------------- archive moves

def assign(map_pos, archive: EliteArchive) -> int:
    """Index of the nearest niche centroid (ties to the lowest index)."""
    centroids = np.stack([n.centroid for n in archive.niches])
    return _nearest(centroids, np.asarray(map_pos, dtype=np.float64))


def challenge(
    genome: np.ndarray,
    fitness: float,
    map_pos: np.ndarray,
    archive: EliteArchive,
    alpha: float,
    generation: int,
    render_seed: int = 0,
    move_centroid: bool = True,
) -> bool:
    """Offer a candidate to its niche; True if it became the elite.

    Empty niche accepts anything; an occupied one only a strictly fitter
    candidate. On acceptance the centroid moves alpha of the way to the
    candidate (unless per-generation updates are in effect).
    """
    idx = assign(map_pos, archive)
    niche = archive.niches[idx]
    if niche.elite is not None and fitness <= niche.elite.fitness:
        return False
    pos = np.array(map_pos, dtype=np.float64)
    niche.elite = Elite(
        genome=np.array(genome, dtype=np.float64),
        fitness=float(fitness),
        map_pos=pos,
        generation_found=generation,
        render_seed=render_seed,
    )
    if move_centroid:
        niche.centroid = np.clip((1.0 - alpha) * niche.centroid + alpha * pos, 0.0, 1.0)
    return True


def update_centroids_toward_elites(archive: EliteArchive, alpha: float) -> None:
    """Once-per-generation variant: pull each centroid toward its elite."""
    for niche in archive.niches:
        if niche.elite is not None:
            niche.centroid = np.clip(
                (1.0 - alpha) * niche.centroid + alpha * niche.elite.map_pos, 0.0, 1.0
            )


# ------------------------------------------------------------- breeding

def mutate(genome: np.ndarray, r: float, f: float, rng: np.random.Generator) -> np.ndarray:
    """Each allele mutates with probability r by a uniform delta in [-f, f].

    Mask and deltas are always both drawn (fixed generator consumption),
    and unmutated alleles are carried over bit-identically.
    """
    genes = validate_genome(genome)
    mask = rng.random(GENE_COUNT) < r
    delta = rng.uniform(-f, f, GENE_COUNT)
    return np.where(mask, np.clip(genes + delta, 0.0, 1.0), genes)


def breed(archive: EliteArchive, lam: int, config: RunConfig, rng: np.random.Generator) -> list:
    """lam offspring: sample niches uniformly with replacement; populated
    niches yield mutated elites, empty ones fresh random genomes."""
    offspring = []
    for _ in range(lam):
        niche = archive.niches[int(rng.integers(archive.k))]
        if niche.elite is None:
            offspring.append(random_genome(rng))
        else:
            offspring.append(mutate(niche.elite.genome, config.r, config.f, rng))
    return offspring


# ------------------------------------------------------------ main loops

def run_qd(
    config: RunConfig,
    archive: EliteArchive,
    generator: Callable,
    fitness_fn: Callable,
    embedder: Callable,
    on_generation: Optional[Callable] = None,
) -> tuple:
    """Modified elite-archive search over a pre-fitted niche archive.

    generator(genome, seed) -> phenotype; fitness_fn(phenotype) -> float;
    embedder(phenotype) -> 2-D map position. Deterministic in
    config.master_seed: breeding and per-individual render seeds come
    from documented child streams. on_generation(archive, stats), when
    given, runs after each generation (snapshot hook).
    """
    per_acceptance = config.centroid_update == "per-acceptance"
    log = []
    for gen in range(1, config.e + 1):
        rng = np.random.Generator(
            np.random.PCG64(child_seed(config.master_seed, STREAM_BREED, gen))
        )
        genomes = breed(archive, config.lam, config, rng)
        for i, genome in enumerate(genomes):
            seed = child_seed(config.master_seed, STREAM_RENDER, gen, i)
            phenotype = generator(genome, seed)
            fitness = fitness_fn(phenotype)
            map_pos = embedder(phenotype)
            challenge(
                genome, fitness, map_pos, archive, config.alpha, gen,
                render_seed=seed, move_centroid=per_acceptance,
            )
        if not per_acceptance:
            update_centroids_toward_elites(archive, config.alpha)
        archive.generation = gen
        stats = QDGenStats(
            generation=gen,
            mean_elite_fitness=archive.mean_elite_fitness(),
            diversity=archive.diversity(),
            populated=archive.populated_count(),
            niche_fitness=archive.niche_fitness(),
        )
        log.append(stats)
        if on_generation is not None:
            on_generation(archive, stats)
    return archive, log


@dataclass(frozen=True)
class Individual:
    genome: np.ndarray
    fitness: float
    render_seed: int


def run_ga(config: RunConfig, generator: Callable, fitness_fn: Callable) -> tuple:
    """Fitness-only control: truncation selection over the fittest 25%.

    Each individual is rendered and scored once, at birth; elitism
    carries the incumbent champion (genome, cached fitness) unchanged, so
    the best-fitness series is non-decreasing. Returns (per-generation
    champion Individuals, log).
    """
    pool_size = math.ceil(0.25 * config.lam)
    population = []
    champions = []
    log = []
    for gen in range(1, config.e + 1):
        rng = np.random.Generator(
            np.random.PCG64(child_seed(config.master_seed, STREAM_BREED, gen))
        )
        offspring = []
        if gen == 1:
            genomes = [random_genome(rng) for _ in range(config.lam)]
        else:
            order = np.argsort([-ind.fitness for ind in population], kind="stable")
            pool = [population[int(j)] for j in order[:pool_size]]
            genomes = []
            if config.elitism:
                offspring.append(pool[0])
            while len(offspring) + len(genomes) < config.lam:
                parent = pool[int(rng.integers(pool_size))]
                genomes.append(mutate(parent.genome, config.r, config.f, rng))
        for i, genome in enumerate(genomes, start=len(offspring)):
            seed = child_seed(config.master_seed, STREAM_RENDER, gen, i)
            fitness = float(fitness_fn(generator(genome, seed)))
            offspring.append(Individual(genome=genome, fitness=fitness, render_seed=seed))
        population = offspring
        best = max(population, key=lambda ind: ind.fitness)
        log.append(
            GAGenStats(
                generation=gen,
                best_fitness=best.fitness,
                mean_fitness=float(np.mean([ind.fitness for ind in population])),
            )
        )
        champions.append(best)
    return champions, log
