"""Wiring between the generative system, metrics, embedding, and engine.

Builds the callables run_qd/run_ga consume, derives every stage's child
seed from one master seed, and (de)serializes archives and logs as
deterministic text so identical runs produce identical bytes.
"""

from __future__ import annotations

import numpy as np

from . import drawgen, embedding, metrics, qd, raster
from .errors import ValidationError
from .seeding import STREAM_GENOME, STREAM_KMEANS, STREAM_RENDER, child_seed

ENCODER_SIZE = embedding.INPUT_SIZE


def corpus_genome(master_seed: int, index: int) -> np.ndarray:
    rng = np.random.Generator(
        np.random.PCG64(child_seed(master_seed, STREAM_GENOME, index))
    )
    return drawgen.random_genome(rng)


def corpus_render_seed(master_seed: int, index: int) -> int:
    return child_seed(master_seed, STREAM_RENDER, index)


def corpus_latents(
    count: int, canvas_size: int, master_seed: int, weights: dict, batch: int = 256
) -> np.ndarray:
    """Latents of a `count`-image random corpus, rendered then encoded.

    Images are rendered at canvas_size, area-downsampled to the encoder
    input size, and encoded in batches; rasters are not kept.
    """
    out = np.empty((count, embedding.LATENT_DIM), dtype=np.float32)
    small = np.empty((min(batch, count), ENCODER_SIZE, ENCODER_SIZE), dtype=np.uint8)
    done = 0
    while done < count:
        n = min(batch, count - done)
        for j in range(n):
            i = done + j
            img = drawgen.render(
                corpus_genome(master_seed, i), canvas_size, corpus_render_seed(master_seed, i)
            )
            small[j] = raster.downsample_area(img, ENCODER_SIZE)
        out[done : done + n] = embedding.encode_batch(small[:n], weights)
        done += n
    return out


def make_generator(canvas_size: int):
    def generator(genome, seed):
        return drawgen.render(genome, canvas_size, seed)

    return generator


def make_fitness(fitness_size: int):
    def fitness_fn(phenotype):
        return metrics.structural_complexity(raster.downsample_area(phenotype, fitness_size))

    return fitness_fn


def make_embedder(corpus: embedding.CorpusEmbedding, weights: dict, m: int):
    def embedder(phenotype):
        small = raster.downsample_area(phenotype, ENCODER_SIZE)
        latent = embedding.encode(small, weights)
        return embedding.embed_new(latent, corpus, m)

    return embedder


def run_qd_pipeline(
    config: qd.RunConfig,
    corpus: embedding.CorpusEmbedding,
    weights: dict,
    on_generation=None,
):
    """Steps 2-6 over a fitted corpus embedding: k-means niches, then the
    generational loop with the real render/fitness/embed callables."""
    archive = qd.init_archive(
        corpus.map_positions(), config.k, child_seed(config.master_seed, STREAM_KMEANS)
    )
    return qd.run_qd(
        config,
        archive,
        make_generator(config.canvas_size),
        make_fitness(config.fitness_size),
        make_embedder(corpus, weights, config.m_neighbours),
        on_generation=on_generation,
    )


def run_ga_pipeline(config: qd.RunConfig):
    return qd.run_ga(
        config, make_generator(config.canvas_size), make_fitness(config.fitness_size)
    )


# ------------------------------------------------------- serialization

def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return ",".join(_fmt(x) for x in v)


def archive_to_lines(archive: qd.EliteArchive) -> list:
    """Archive snapshot as deterministic text lines."""
    lines = [f"generation={archive.generation} k={archive.k}"]
    for i, niche in enumerate(archive.niches):
        parts = [f"niche={i}", f"centroid={_fmt_vec(niche.centroid)}"]
        e = niche.elite
        if e is not None:
            parts += [
                f"fitness={_fmt(e.fitness)}",
                f"map_pos={_fmt_vec(e.map_pos)}",
                f"found={e.generation_found}",
                f"render_seed={e.render_seed}",
                f"genome={_fmt_vec(e.genome)}",
            ]
        lines.append(" ".join(parts))
    return lines


def archive_from_lines(lines: list) -> qd.EliteArchive:
    header = dict(kv.split("=", 1) for kv in lines[0].split())
    niches = []
    for line in lines[1 : 1 + int(header["k"])]:
        fields = dict(kv.split("=", 1) for kv in line.split())
        centroid = np.array([float(x) for x in fields["centroid"].split(",")])
        elite = None
        if "genome" in fields:
            elite = qd.Elite(
                genome=np.array([float(x) for x in fields["genome"].split(",")]),
                fitness=float(fields["fitness"]),
                map_pos=np.array([float(x) for x in fields["map_pos"].split(",")]),
                generation_found=int(fields["found"]),
                render_seed=int(fields["render_seed"]),
            )
        niches.append(qd.Niche(centroid=centroid, elite=elite))
    return qd.EliteArchive(niches=niches, generation=int(header["generation"]))


def save_archive(path, archive: qd.EliteArchive) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(archive_to_lines(archive)) + "\n")


def load_archive(path) -> qd.EliteArchive:
    with open(path, encoding="utf-8") as fh:
        return archive_from_lines(fh.read().splitlines())


def qd_log_to_csv(log: list) -> str:
    rows = ["generation,mean_elite_fitness,diversity,populated_count"]
    for s in log:
        rows.append(f"{s.generation},{_fmt(s.mean_elite_fitness)},{_fmt(s.diversity)},{s.populated}")
    return "\n".join(rows) + "\n"


def ga_log_to_csv(log: list) -> str:
    rows = ["generation,best_fitness,mean_fitness"]
    for s in log:
        rows.append(f"{s.generation},{_fmt(s.best_fitness)},{_fmt(s.mean_fitness)}")
    return "\n".join(rows) + "\n"


def parse_qd_log_csv(text: str) -> list:
    lines = text.strip().splitlines()
    if not lines or lines[0] != "generation,mean_elite_fitness,diversity,populated_count":
        raise ValidationError("not a run log CSV")
    log = []
    for line in lines[1:]:
        gen, fit, div, pop = line.split(",")
        log.append(
            qd.QDGenStats(
                generation=int(gen),
                mean_elite_fitness=float(fit),
                diversity=float(div),
                populated=int(pop),
                niche_fitness=np.empty(0),
            )
        )
    return log
