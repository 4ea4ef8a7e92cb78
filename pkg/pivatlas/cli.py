"""
Command line front end: class counts, atlas builds, queries, figure
statistics, strategy evaluation and agent training.

    pivatlas [-c CONF] [-d] COMMAND [--option=value ...] [ARG]

Every table goes out as CSV, to stdout or to the --out file, preceded
by a "# pivatlas ..." line carrying the effective run configuration.
"""

from configparser import ConfigParser
from contextlib import contextmanager
from csv import writer
from getopt import getopt, gnu_getopt, GetoptError
from logging import getLogger
from os.path import exists, join
from sys import argv
import sys
from time import time
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    TextIO,
    Tuple,
)

from . import common
from .atlas import (
    Atlas,
    COMBOS,
    IntegrityError,
    build_chain,
    export_csv,
    import_csv,
    load,
    lookup,
    save,
)
from .bitmatrix import (
    BitMatrix,
    CostModel,
    PatternError,
    PivotError,
    format_pattern,
    parse_pattern,
)
from .canon import (
    CanonicalKey,
    ResourceGuardError,
    canonical,
    class_weights,
    count_row_classes,
    dump_keys,
    enumerate_canonical_classes,
    guard,
    scan_classes,
)
from .dqn import (
    HyperParams,
    WeightFileError,
    evaluate_agent,
    load_weights,
    save_weights,
    train,
)
from .strategies import (
    Aggregation,
    Baseline,
    Kind,
    Strategy,
    TieBreak,
    Weighting,
    evaluate,
    stats_best_pivot_fillin_excess,
    stats_density_histogram,
    stats_largest_gaps,
    stats_minfillin_optimal_fraction,
    stats_savings_markowitz_vs_median,
    stats_savings_optimal_vs_markowitz,
)
from .workers import WorkerError, available_workers

log = getLogger("pivatlas")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_GUARD = 3

LONGOPTS = [
    "n=",
    "model=",
    "seed=",
    "workers=",
    "out=",
    "atlas-dir=",
    "samples=",
    "strategy=",
    "figure=",
    "aggregation=",
    "weighting=",
    "baseline=",
    "weights=",
    "episodes=",
    "lambda=",
    "fillin",
    "dump-keys=",
    "allow-large",
    "tie-break=",
    "top=",
    "scan",
]

FIGURES = (
    "savings1",
    "savings2",
    "optimal_fraction",
    "density",
    "gaps",
    "excess",
)


class UsageError(Exception):
    pass


class Settings:
    """Command options merged over the config file"""

    def __init__(
        self, conf: ConfigParser, opts: Sequence[Tuple[str, str]]
    ) -> None:
        self.conf = conf
        self.opts = dict((k.lstrip("-"), v) for k, v in opts)

    def get(self, key: str, section: str = "common") -> Optional[str]:
        if key in self.opts:
            return self.opts[key]
        confkey = key.replace("-", "_")
        if self.conf.has_option(section, confkey):
            return self.conf.get(section, confkey)
        return None

    def flag(self, key: str, section: str = "common") -> bool:
        if key in self.opts:
            return True
        val = self.get(key, section)
        return val is not None and val.lower() in ("1", "yes", "true", "on")

    def integer(self, key: str, default: Optional[int] = None) -> int:
        val = self.get(key)
        if val is None:
            if default is None:
                raise UsageError(f"Option --{key} is required")
            return default
        try:
            return int(val)
        except ValueError:
            raise UsageError(f"--{key}={val} is not an integer") from None

    @property
    def n(self) -> int:
        return self.integer("n")

    @property
    def seed(self) -> int:
        return self.integer("seed")

    @property
    def workers(self) -> int:
        return self.integer("workers", 0) or available_workers()

    @property
    def atlasdir(self) -> str:
        return self.get("atlas-dir") or self.get("atlasdir") or "."

    @property
    def allow_large(self) -> bool:
        return self.flag("allow-large")

    def models(self, default: str = "both") -> List[CostModel]:
        name = self.get("model") or default
        if name == "both":
            return [CostModel.FIELD, CostModel.RING]
        try:
            return [CostModel[name.upper()]]
        except KeyError:
            raise UsageError(f"Unknown cost model {name!r}") from None

    def choices(self, key: str, enum: Any, section: str) -> List[Any]:
        name = self.get(key, section) or "all"
        if name == "all":
            return list(enum)
        try:
            return [enum(name)]
        except ValueError:
            raise UsageError(f"Unknown --{key} value {name!r}") from None

    def runconfig(self, command: str, **resolved: Any) -> common.RunConfig:
        """Options as given, overridden by the values actually in effect"""
        params: Dict[str, Any] = dict(
            (k.replace("-", "_"), v) for k, v in self.opts.items()
        )
        params.update(resolved)
        return common.RunConfig(command=command, **params)


def model_names(models: Sequence[CostModel]) -> List[str]:
    return [model.name.lower() for model in models]


@contextmanager
def output(settings: Settings, meta: common.RunConfig) -> Iterator[Any]:
    path = settings.get("out")
    fl: TextIO = open(path, "w", newline="") if path else sys.stdout
    try:
        fl.write(meta.metadata + "\n")
        yield writer(fl, lineterminator="\n")
    finally:
        if path:
            fl.close()
        else:
            fl.flush()


def atlas_path(atlasdir: str, n: int, ext: str = "pivdb") -> str:
    return join(atlasdir, f"atlas_{n}.{ext}")


def load_atlas(atlasdir: str, n: int) -> Atlas:
    """Full precision CSV if there is one, the binary file otherwise"""
    if n == 0:
        return Atlas.empty()
    csvpath = atlas_path(atlasdir, n, "csv")
    if exists(csvpath):
        atlas = import_csv(csvpath)
    else:
        binpath = atlas_path(atlasdir, n)
        if not exists(binpath):
            raise FileNotFoundError(
                f"No size {n} atlas in {atlasdir!r},"
                f" run 'pivatlas build --n={n}' first"
            )
        atlas = load(binpath)
    if atlas.n != n:
        raise IntegrityError(f"Atlas file for size {n} holds size {atlas.n}")
    return atlas


def cmd_classes(settings: Settings) -> None:
    n = settings.n
    allow_large = settings.allow_large
    guard(n, allow_large)
    scan = settings.flag("scan")
    workers = settings.workers
    if scan:
        found = scan_classes(n, workers, allow_large)
        keys = [CanonicalKey(n, bits) for bits in found]
    else:
        keys = [key for key, _ in enumerate_canonical_classes(n, allow_large)]
    meta = settings.runconfig(
        "classes",
        n=n,
        allow_large=allow_large,
        method="scan" if scan else "augment",
        workers=workers if scan else 1,
    )
    with output(settings, meta) as out:
        out.writerow(("n", "row_classes", "classes"))
        out.writerow((n, count_row_classes(n), len(keys)))
    keyfile = settings.get("dump-keys")
    if keyfile:
        dump_keys(keys, keyfile)
        log.info("%d keys written to %s", len(keys), keyfile)


def cmd_build(settings: Settings) -> None:
    n = settings.n
    allow_large = settings.allow_large
    guard(n, allow_large)
    atlasdir = settings.atlasdir
    workers = settings.workers
    meta = settings.runconfig(
        "build",
        n=n,
        workers=workers,
        atlas_dir=atlasdir,
        allow_large=allow_large,
    )
    start = time()
    rows = []
    for atlas in build_chain(n, workers, allow_large):
        save(atlas, atlas_path(atlasdir, atlas.n))
        export_csv(atlas, atlas_path(atlasdir, atlas.n, "csv"), meta.metadata)
        rows.append((atlas.n, len(atlas), f"{time() - start:.1f}"))
        log.info("Size %d: %d classes written to %s", *rows[-1][:2], atlasdir)
    with output(settings, meta) as out:
        out.writerow(("n", "classes", "seconds"))
        out.writerows(rows)


def cmd_query(settings: Settings, args: List[str]) -> None:
    if len(args) != 1:
        raise UsageError("query needs exactly one pattern argument")
    m = parse_pattern(args[0])
    if m.n_rows == 0:
        raise PatternError("Empty pattern")
    if not m.is_square:
        m = m.padded()
    atlas = load_atlas(settings.atlasdir, m.n_rows)
    record = lookup(atlas, m)
    key = canonical(m)
    weight = class_weights([key.bits], key.n)[0]
    meta = settings.runconfig(
        "query", pattern=args[0], atlas_dir=settings.atlasdir
    )
    with output(settings, meta) as out:
        out.writerow(
            (
                "key_hex",
                "canonical",
                "weight",
                "model",
                "mode",
                "costmin",
                "costmax",
                "costmed",
                "best_pivot",
                "worst_pivot",
            )
        )
        for (model, mode), c in zip(COMBOS, record):
            out.writerow(
                (
                    key.hex,
                    format_pattern(key.matrix),
                    weight,
                    model.name.lower(),
                    mode.name.lower(),
                    c.costmin,
                    c.costmax,
                    repr(c.costmed),
                    "" if c.best is None else str(c.best),
                    "" if c.worst is None else str(c.worst),
                )
            )


def cmd_stats(settings: Settings) -> None:
    figure = settings.get("figure", "stats")
    if figure not in FIGURES:
        raise UsageError(f"Unknown figure {figure!r}, one of {FIGURES}")
    n = settings.n
    models = settings.models()
    weightings = settings.choices("weighting", Weighting, "stats")
    aggregations = settings.choices("aggregation", Aggregation, "stats")
    baselines = settings.choices("baseline", Baseline, "stats")
    top = settings.integer("top", 10)
    meta = settings.runconfig(
        "stats",
        figure=figure,
        n=n,
        atlas_dir=settings.atlasdir,
        model=model_names(models),
        aggregation=[agg.value for agg in aggregations],
        weighting=[wgt.value for wgt in weightings],
        baseline=[base.value for base in baselines],
        top=top,
    )
    with output(settings, meta) as out:
        if figure in ("savings1", "savings2", "optimal_fraction"):
            out.writerow(("n", "model", "aggregation", "weighting", "value"))
            combos: List[Optional[Aggregation]] = (
                [None] if figure == "optimal_fraction" else list(aggregations)
            )
            for size in range(1, n + 1):
                atlas = load_atlas(settings.atlasdir, size)
                for model in models:
                    for agg in combos:
                        for wgt in weightings:
                            val = _figure(figure, atlas, model, agg, wgt)
                            out.writerow(
                                (
                                    size,
                                    model.name.lower(),
                                    "" if agg is None else agg.value,
                                    wgt.value,
                                    f"{val:.4f}",
                                )
                            )
            return
        atlas = load_atlas(settings.atlasdir, n)
        if figure == "density":
            out.writerow(
                ("bucket_lo", "bucket_hi", "model", "baseline", "value")
            )
            for model in models:
                for base in baselines:
                    hist = stats_density_histogram(atlas, model, base)
                    for k, val in enumerate(hist):
                        out.writerow(
                            (
                                10 * k,
                                10 * (k + 1),
                                model.name.lower(),
                                base.value,
                                f"{val:.4f}",
                            )
                        )
        elif figure == "gaps":
            out.writerow(("n", "model", "key_hex", "pattern", "gap"))
            for model in models:
                for key, gap in stats_largest_gaps(atlas, model, top):
                    out.writerow(
                        (
                            n,
                            model.name.lower(),
                            f"{key:016x}",
                            format_pattern(BitMatrix(n, n, key)),
                            gap,
                        )
                    )
        else:
            out.writerow(("n", "model", "excess", "classes"))
            for model in models:
                excess = stats_best_pivot_fillin_excess(atlas, model)
                for diff, count in excess.items():
                    out.writerow((n, model.name.lower(), diff, count))


def _figure(
    figure: str,
    atlas: Atlas,
    model: CostModel,
    agg: Optional[Aggregation],
    wgt: Weighting,
) -> float:
    if figure == "optimal_fraction":
        return stats_minfillin_optimal_fraction(atlas, model, wgt)
    assert agg is not None
    if figure == "savings1":
        return stats_savings_markowitz_vs_median(atlas, model, agg, wgt)
    return stats_savings_optimal_vs_markowitz(atlas, model, agg, wgt)


def make_strategy(settings: Settings, n: int) -> Strategy:
    name = settings.get("strategy") or "markowitz"
    try:
        kind = Kind(name)
    except ValueError:
        raise UsageError(f"Unknown strategy {name!r}") from None
    if kind is Kind.AGENT:
        raise UsageError("Use eval-agent to evaluate a trained agent")
    tie = settings.get("tie-break", "strategies") or "lexicographic"
    try:
        tie_break = TieBreak(tie)
    except ValueError:
        raise UsageError(f"Unknown tie break {tie!r}") from None
    lam = float(settings.get("lambda", "strategies") or "1.0")
    atlases: Dict[int, Atlas] = {}
    if kind is Kind.OPTIMAL:
        atlases = dict(
            (size, load_atlas(settings.atlasdir, size)) for size in range(n)
        )
    return Strategy(kind, tie_break, lam=lam, atlases=atlases)


def cmd_eval(settings: Settings) -> None:
    n = settings.n
    seed = settings.seed
    samples = settings.integer("samples", 10000)
    workers = settings.workers
    strategy = make_strategy(settings, n)
    models = settings.models()
    meta = settings.runconfig(
        "eval",
        n=n,
        seed=seed,
        samples=samples,
        workers=workers,
        model=model_names(models),
        strategy=strategy.kind.value,
        tie_break=strategy.tie_break.value,
        **{"lambda": strategy.lam},
    )
    with output(settings, meta) as out:
        out.writerow(
            ("n", "model", "strategy", "tie_break", "samples", "mean_cost")
        )
        for model in models:
            mean = evaluate(strategy, n, model, samples, seed, workers)
            out.writerow(
                (
                    n,
                    model.name.lower(),
                    strategy.kind.value,
                    strategy.tie_break.value,
                    samples,
                    f"{mean:.6f}",
                )
            )


def hyperparams(settings: Settings) -> HyperParams:
    if "seed" not in settings.opts:
        raise UsageError("Option --seed is required")
    values: Dict[str, str] = {}
    if settings.conf.has_section("dqn"):
        values.update(settings.conf.items("dqn"))
    values.update(
        (field, settings.opts[opt])
        for opt, field in (
            ("n", "n"),
            ("episodes", "episodes"),
            ("seed", "seed"),
        )
        if opt in settings.opts
    )
    if "fillin" in settings.opts:
        values["include_fillin_feature"] = "yes"
    try:
        return HyperParams.from_mapping(values)
    except ValueError as e:
        raise UsageError(str(e)) from e


def cmd_train(settings: Settings) -> None:
    hp = hyperparams(settings)
    models = settings.models("field")
    if len(models) != 1:
        raise UsageError("Train one cost model at a time")
    weights = settings.get("weights")
    if not weights:
        raise UsageError("Option --weights is required")
    meta = settings.runconfig(
        "train", model=model_names(models), weights=weights, **hp._asdict()
    )
    net, curve = train(hp, models[0])
    save_weights(net, weights)
    log.info("Weights saved to %s", weights)
    with output(settings, meta) as out:
        out.writerow(("episode", "mean_cost", "epsilon"))
        for point in curve:
            out.writerow(
                (
                    point.episode,
                    f"{point.mean_cost:.6f}",
                    f"{point.epsilon:.4f}",
                )
            )


def cmd_eval_agent(settings: Settings) -> None:
    n = settings.n
    seed = settings.seed
    samples = settings.integer("samples", 10000)
    workers = settings.workers
    weights = settings.get("weights")
    if not weights:
        raise UsageError("Option --weights is required")
    net = load_weights(weights)
    models = settings.models()
    meta = settings.runconfig(
        "eval-agent",
        n=n,
        seed=seed,
        samples=samples,
        workers=workers,
        model=model_names(models),
        weights=weights,
    )
    with output(settings, meta) as out:
        out.writerow(
            ("n", "model", "samples", "agent_mean", "improvement_pct")
        )
        for model in models:
            mean, gain = evaluate_agent(net, n, model, samples, seed, workers)
            out.writerow(
                (
                    n,
                    model.name.lower(),
                    samples,
                    f"{mean:.6f}",
                    f"{gain:.2f}",
                )
            )


COMMANDS: Dict[str, Callable[[Settings, List[str]], None]] = {
    "classes": lambda s, a: cmd_classes(s),
    "build": lambda s, a: cmd_build(s),
    "query": cmd_query,
    "stats": lambda s, a: cmd_stats(s),
    "eval": lambda s, a: cmd_eval(s),
    "train": lambda s, a: cmd_train(s),
    "eval-agent": lambda s, a: cmd_eval_agent(s),
}


def main(arguments: Optional[List[str]] = None) -> int:
    if arguments is None:
        arguments = argv[1:]
    try:
        opts, args = getopt(arguments, "c:d")
        if not args or args[0] not in COMMANDS:
            raise UsageError(f"Need a command, one of: {', '.join(COMMANDS)}")
        cmdopts, cmdargs = gnu_getopt(args[1:], "", LONGOPTS)
        conf = common.init(log, opts)
        settings = Settings(conf, cmdopts)
        COMMANDS[args[0]](settings, cmdargs)
    except (GetoptError, UsageError, PatternError, PivotError) as e:
        log.error("%s", e)
        return EXIT_USAGE
    except ResourceGuardError as e:
        log.error("%s", e)
        return EXIT_GUARD
    except (
        IntegrityError,
        WeightFileError,
        WorkerError,
        FileNotFoundError,
    ) as e:
        log.error("%s", e)
        return EXIT_DATA
    return EXIT_OK
