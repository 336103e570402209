"""Command-line orchestration: corpus, embed, run, plot, metrics, config.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 validation error. Every
failure prints one machine-parsable line to stderr:
qdraw-error code=<N> kind=<config|io|validation>: <message>
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4

# keys a run config file may contain, with parsers
_CONFIG_SCHEMA = {
    "mode": str,
    "k": int,
    "e": int,
    "lambda": int,
    "r": float,
    "f": float,
    "alpha": float,
    "master_seed": int,
    "canvas": int,
    "fitness_size": int,
    "centroid_update": str,
    "elitism": None,  # bool, parsed specially
    "m_neighbours": int,
    "embedding": str,
    "weights": str,
    "out": str,
}

_DEFAULT_CONFIG = """\
# engine run configuration; search symbols: k, e, lambda, r, f
mode = quality-diversity
k = 25
e = 50
lambda = 15
r = 0.07142857142857142
f = 0.25
alpha = 0.25
master_seed = 0
canvas = 512
fitness_size = 256
centroid_update = per-acceptance
elitism = true
m_neighbours = 5
embedding = embedding.qdvw
weights = weights.qdvw
out = run_out
"""


def _apply_thread_env() -> None:
    """QDRAW_THREADS caps the numeric libraries' thread pools.

    Must run before numpy/numba are imported, hence the lazy imports
    everywhere below.
    """
    threads = os.environ.get("QDRAW_THREADS")
    if threads:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMBA_NUM_THREADS",
        ):
            os.environ.setdefault(var, threads)


def parse_config(text: str) -> dict:
    """Flat key=value config; returns raw values, raising on bad syntax,
    unknown keys, or unparseable values with every problem listed."""
    from .errors import ConfigError

    values = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key = value, got '{line}'")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_SCHEMA:
            problems.append(f"line {lineno}: unknown key '{key}'")
            continue
        parser = _CONFIG_SCHEMA[key]
        if parser is None:
            if value.lower() in ("true", "false"):
                values[key] = value.lower() == "true"
            else:
                problems.append(f"line {lineno}: '{key}' must be true or false, got '{value}'")
        elif parser is str:
            values[key] = value
        else:
            try:
                values[key] = parser(value)
            except ValueError:
                problems.append(
                    f"line {lineno}: '{key}' must be {parser.__name__}, got '{value}'"
                )
    if problems:
        raise ConfigError("; ".join(problems))
    return values


def _build_run_config(values: dict):
    from .errors import ConfigError
    from .qd import RunConfig

    kwargs = {}
    mapping = {
        "mode": "mode",
        "k": "k",
        "e": "e",
        "lambda": "lam",
        "r": "r",
        "f": "f",
        "alpha": "alpha",
        "master_seed": "master_seed",
        "canvas": "canvas_size",
        "fitness_size": "fitness_size",
        "centroid_update": "centroid_update",
        "elitism": "elitism",
        "m_neighbours": "m_neighbours",
    }
    for key, field in mapping.items():
        if key in values:
            kwargs[field] = values[key]
    try:
        config = RunConfig(**kwargs)
    except Exception as err:  # RunConfig reports all violations at once
        raise ConfigError(str(err)) from err
    problems = []
    if config.mode == "quality-diversity":
        for key in ("embedding", "weights"):
            if not values.get(key):
                problems.append(f"quality-diversity mode requires '{key}' in the config")
    if not values.get("out"):
        problems.append("config must set 'out'")
    if problems:
        raise ConfigError("; ".join(problems))
    return config


def _write_config_copy(path, values: dict) -> None:
    # 'out' is where artifacts land, not part of run semantics; omitting
    # it keeps two runs of one config byte-comparable across directories.
    lines = [
        f"{key} = {values[key]}" for key in _CONFIG_SCHEMA if key in values and key != "out"
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ------------------------------------------------------------- commands

def cmd_corpus(args) -> int:
    import numpy as np

    from . import drawgen, pipeline, raster

    if args.count < 1:
        from .errors import ValidationError

        raise ValidationError(f"count must be >= 1, got {args.count}")
    full_dir = os.path.join(args.out, "full")
    small_dir = os.path.join(args.out, "small")
    os.makedirs(full_dir, exist_ok=True)
    os.makedirs(small_dir, exist_ok=True)
    rows = ["index,filename,render_seed,genome"]
    for i in range(args.count):
        genome = pipeline.corpus_genome(args.seed, i)
        seed = pipeline.corpus_render_seed(args.seed, i)
        img = drawgen.render(genome, args.canvas, seed)
        name = f"corpus_{i:05d}.png"
        raster.save_png(img, os.path.join(full_dir, name))
        raster.save_png(
            raster.downsample_area(img, pipeline.ENCODER_SIZE),
            os.path.join(small_dir, name),
        )
        genes = ":".join(repr(float(g)) for g in genome)
        rows.append(f"{i},{name},{seed},{genes}")
    with open(os.path.join(args.out, "corpus_manifest.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"corpus: wrote {args.count} phenotypes to {args.out}")
    return EXIT_OK


def _read_manifest(corpus_dir: str) -> list:
    from .errors import ValidationError

    path = os.path.join(corpus_dir, "corpus_manifest.csv")
    if not os.path.exists(path):
        raise ValidationError(f"no corpus_manifest.csv in {corpus_dir}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().strip().splitlines()
    return [line.split(",") for line in lines[1:]]


def cmd_embed(args) -> int:
    import numpy as np

    from . import embedding, pipeline, raster

    weights = embedding.load_weights(args.weights)
    entries = _read_manifest(args.corpus)
    imgs = np.empty((len(entries), pipeline.ENCODER_SIZE, pipeline.ENCODER_SIZE), dtype=np.uint8)
    for row, (_, name, _, _) in enumerate(entries):
        small = os.path.join(args.corpus, "small", name)
        if os.path.exists(small):
            imgs[row] = raster.load_png(small)
        else:
            imgs[row] = raster.downsample_area(
                raster.load_png(os.path.join(args.corpus, "full", name)),
                pipeline.ENCODER_SIZE,
            )
    latents = embedding.encode_batch(imgs, weights)
    corpus = embedding.build_corpus_embedding(
        latents, perplexity=args.perplexity, iters=args.iters, seed=args.seed
    )
    embedding.save_corpus(args.out, corpus)
    print(f"embed: {corpus.size} corpus points -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from . import drawgen, embedding, pipeline, raster

    with open(args.config, encoding="utf-8") as fh:
        values = parse_config(fh.read())
    if args.out:
        values["out"] = args.out
    config = _build_run_config(values)
    out_dir = values["out"]
    os.makedirs(out_dir, exist_ok=True)
    _write_config_copy(os.path.join(out_dir, "run_config.txt"), values)

    if config.mode == "quality-diversity":
        corpus = embedding.load_corpus(values["embedding"])
        weights = embedding.load_weights(values["weights"])
        snap_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)

        def snapshot(archive, stats):
            pipeline.save_archive(
                os.path.join(snap_dir, f"gen_{stats.generation:03d}.txt"), archive
            )

        archive, log = pipeline.run_qd_pipeline(config, corpus, weights, on_generation=snapshot)
        with open(os.path.join(out_dir, "log.csv"), "w", encoding="utf-8") as fh:
            fh.write(pipeline.qd_log_to_csv(log))
        elite_dir = os.path.join(out_dir, "elites")
        os.makedirs(elite_dir, exist_ok=True)
        for i, niche in enumerate(archive.niches):
            if niche.elite is None:
                continue
            img = drawgen.render(niche.elite.genome, config.canvas_size, niche.elite.render_seed)
            raster.save_png(img, os.path.join(elite_dir, f"elite_{i:02d}.png"))
        print(
            f"run: {config.e} generations, {archive.populated_count()}/{config.k} "
            f"niches populated -> {out_dir}"
        )
    else:
        champions, log = pipeline.run_ga_pipeline(config)
        with open(os.path.join(out_dir, "log.csv"), "w", encoding="utf-8") as fh:
            fh.write(pipeline.ga_log_to_csv(log))
        final = champions[-1]
        img = drawgen.render(final.genome, config.canvas_size, final.render_seed)
        raster.save_png(img, os.path.join(out_dir, "champion.png"))
        print(f"run: {config.e} generations, best fitness {final.fitness:.4f} -> {out_dir}")
    return EXIT_OK


def _load_qd_logs(run_dirs: list):
    import numpy as np

    from . import pipeline
    from .errors import ValidationError

    logs = []
    for d in run_dirs:
        with open(os.path.join(d, "log.csv"), encoding="utf-8") as fh:
            logs.append(pipeline.parse_qd_log_csv(fh.read()))
    lengths = {len(log) for log in logs}
    if len(lengths) != 1:
        raise ValidationError(f"mismatched run lengths: {sorted(lengths)}")
    fitness = np.array([[s.mean_elite_fitness for s in log] for log in logs])
    diversity = np.array([[s.diversity for s in log] for log in logs])
    return fitness, diversity


def cmd_plot(args) -> int:
    from . import drawgen, pipeline, raster, svgplot
    from .errors import ValidationError

    if args.kind == "timeseries":
        fitness, diversity = _load_qd_logs(args.run_dirs)
        svgplot.timeseries_figure(fitness, diversity).save(args.out)
    elif args.kind == "snapshot":
        if len(args.run_dirs) != 1:
            raise ValidationError("snapshot plots take exactly one run directory")
        run_dir = args.run_dirs[0]
        with open(os.path.join(run_dir, "run_config.txt"), encoding="utf-8") as fh:
            canvas = parse_config(fh.read()).get("canvas", 512)
        panels = []
        for gen in args.generations:
            snap = os.path.join(run_dir, "snapshots", f"gen_{gen:03d}.txt")
            if not os.path.exists(snap):
                raise ValidationError(f"no snapshot for generation {gen} in {run_dir}")
            archive = pipeline.load_archive(snap)
            entries = []
            for niche in archive.niches:
                if niche.elite is None:
                    continue
                img = drawgen.render(niche.elite.genome, canvas, niche.elite.render_seed)
                entries.append((niche.elite.map_pos, raster.downsample_area(img, 64)))
            panels.append((gen, entries))
        svgplot.snapshot_figure(panels).save(args.out)
    else:
        images = []
        captions = []
        for d in args.run_dirs:
            images.append(raster.load_png(os.path.join(d, "champion.png")))
            with open(os.path.join(d, "run_config.txt"), encoding="utf-8") as fh:
                seed = parse_config(fh.read()).get("master_seed", "?")
            captions.append(f"seed {seed}")
        svgplot.grid_figure(images, captions).save(args.out)
    print(f"plot: wrote {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    from . import metrics, raster

    rows = ["path,fitness"]
    for path in args.images:
        value = metrics.structural_complexity(raster.load_png(path))
        rows.append(f"{path},{repr(value)}")
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_config_init(args) -> int:
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(_DEFAULT_CONFIG)
    print(f"config: wrote defaults to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdraw", description="quality-diversity search over generative line drawings"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="render a random-genome corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--canvas", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("embed", help="build the corpus feature embedding")
    p.add_argument("--corpus", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("run", help="execute a search run from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config's out directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="draw figures from run directories")
    p.add_argument("--kind", choices=("timeseries", "snapshot", "champions"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--generations", type=lambda s: [int(x) for x in s.split(",")], default=[1, 10, 50]
    )
    p.add_argument("run_dirs", nargs="+")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("metrics", help="batch structural complexity of PNGs")
    p.add_argument("--out")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("config", help="configuration utilities")
    config_sub = p.add_subparsers(dest="config_command", required=True)
    pi = config_sub.add_parser("init", help="write a default config file")
    pi.add_argument("--out", default="run.cfg")
    pi.set_defaults(func=cmd_config_init)

    return parser


def _fail(code: int, kind: str, err: Exception) -> int:
    sys.stderr.write(f"qdraw-error code={code} kind={kind}: {err}\n")
    return code


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    from .errors import ConfigError, ValidationError

    try:
        return args.func(args)
    except ConfigError as err:
        return _fail(EXIT_CONFIG, "config", err)
    except ValidationError as err:
        return _fail(EXIT_VALIDATION, "validation", err)
    except OSError as err:
        return _fail(EXIT_IO, "io", err)


if __name__ == "__main__":
    sys.exit(main())
