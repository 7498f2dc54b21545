"""
CLI
---

The ``greenlens`` command line. Each subcommand runs one pipeline stage, reading its
predecessor's artifacts from the output directory and writing its own next to them together with
a ``<stage>.manifest.json`` provenance record.

Stages in order: ``ingest``, ``segment``, ``judge-a``, ``judge-b``, ``indicators``, ``validate``,
``estimate``, ``placebo`` and ``report``. ``synth`` writes a synthetic study to try them on.
"""

import argparse
from contextlib import contextmanager
import logging
from pathlib import Path
import shutil
import sys
import typing as t

import pandas as pd

from . import __version__
from .config import PipelineConfig, default_benchmark, load_config
from .corpus import (
    corpus_stats,
    describe,
    extract_env_section,
    filter_universe,
    load_meta,
    load_reports,
    read_sections,
    write_sections,
)
from .econometrics import (
    assemble_panel,
    default_suite,
    fit_iv,
    heterogeneity,
    load_panel,
    moderation,
    placebo,
    psm,
    render_table,
    run_suite,
    table_frame,
    vif,
)
from .errors import EstimationError, GreenlensError, MissingArtifact
from .indicators import (
    build_indicators,
    indicators_frame,
    load_esg,
    read_indicators,
    write_indicators,
)
from .judge_a import compare_backends, read_dictionary, run_layer_a, write_dictionary, write_log
from .judge_b import (
    Arm,
    ablation_report,
    count_xy,
    read_verdicts,
    read_xy,
    run_layer_b,
    write_verdicts,
    write_xy,
)
from .manifest import StageManifest, collect_manifests, hash_paths, write_manifest
from .segment import (
    Segmenter,
    SegmenterDictionary,
    build_s1,
    build_s2,
    load_stopwords,
    read_s1,
    read_s2,
    write_s1,
    write_s2,
)
from .store import Journal
from .synthetic import make_study
from .utils import PathLike, read_json, write_json
from .validate import SamplingPlan, draw_samples, load_labels


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

DEFAULT_CONFIG = "greenlens.toml"

#: Stage producing each artifact, named in MissingArtifact errors.
PRODUCERS = {
    "sections": "ingest",
    "s1": "segment",
    "dictionary": "judge-a",
    "s2": "judge-b",
    "xy": "judge-b",
    "indicators": "indicators",
    "panel": "estimate",
    "benchmark": "estimate",
}

ARTIFACT_LABELS = {
    "sections": "environmental sections",
    "s1": "unique word sequence",
    "dictionary": "green dictionary",
    "s2": "keyword-context pairs",
    "xy": "X/Y counts",
    "indicators": "firm-year indicators",
    "panel": "estimation panel",
    "benchmark": "benchmark estimates",
}


class Artifacts:
    """Artifact paths under an output directory."""

    def __init__(self, out_dir: PathLike):
        self.root = Path(out_dir)
        self.sections = self.root / "sections.jsonl"
        self.corpus_stats = self.root / "corpus_stats.csv"
        self.s1 = self.root / "s1.json"
        self.dictionary = self.root / "dictionary.json"
        self.layer_a_log = self.root / "layer_a_log.jsonl"
        self.s2 = self.root / "s2.jsonl"
        self.verdicts = self.root / "verdicts.jsonl"
        self.xy = self.root / "xy.csv"
        self.indicators = self.root / "indicators.csv"
        self.panel = self.root / "panel.csv"
        self.validation = self.root / "validation"
        self.estimates = self.root / "estimates"
        self.benchmark = self.estimates / "benchmark.json"
        self.placebo = self.root / "placebo"
        self.report = self.root / "report"

    def arm_verdicts(self, arm: str) -> Path:
        return self.root / f"verdicts_{arm}.jsonl"

    def require(self, name: str) -> Path:
        """
        Return the path of artifact `name`.

        Raises:
            MissingArtifact: If the artifact was not produced yet.
        """
        path = getattr(self, name)
        if not path.exists():
            raise MissingArtifact(ARTIFACT_LABELS[name], PRODUCERS[name], str(path))
        return path


def _segmenter(config: PipelineConfig) -> Segmenter:
    seg = config.segment
    stopwords = load_stopwords(seg.stopwords) if seg.stopwords else None
    return Segmenter(
        SegmenterDictionary.load(seg.dictionary), stopwords, terminators=seg.terminators
    )


def _manifest(
    config: PipelineConfig,
    stage: str,
    inputs: t.Mapping[str, t.Optional[PathLike]],
    outputs: t.Mapping[str, t.Optional[PathLike]],
    **parameters: t.Any,
) -> None:
    manifest = StageManifest(
        stage=stage,
        config_hash=config.config_hash,
        seed=config.seed,
        inputs=hash_paths(inputs),
        outputs=hash_paths(outputs),
        parameters=parameters,
    )
    write_manifest(config.out_dir, manifest)


@contextmanager
def _journal(config: PipelineConfig) -> t.Iterator[Journal]:
    config.journal_path.parent.mkdir(parents=True, exist_ok=True)
    journal = Journal(config.journal_path)
    try:
        yield journal
    finally:
        journal.close()


def cmd_ingest(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Extract the environmental sections of the study universe's reports."""
    art = Artifacts(config.out_dir)
    meta = load_meta(config.corpus.meta)
    docs = load_reports(config.corpus.reports, **config.corpus.get_load_options())

    universe = []
    unknown = excluded = 0
    for doc in docs:
        firm = meta.get(doc.firm_id)
        if firm is None:
            unknown += 1
        elif filter_universe(firm):
            universe.append(doc)
        else:
            excluded += 1
    if unknown:
        logger.warning("Skipped %d report(s) of firms without metadata", unknown)
    logger.info("Excluded %d report(s) of ST/PT or financial firms", excluded)

    segmenter = _segmenter(config)
    sections = [
        extract_env_section(doc, config.corpus.patterns, segmenter=segmenter) for doc in universe
    ]
    write_sections(art.sections, sections)
    corpus_stats(sections).to_csv(art.corpus_stats)
    logger.info(
        "Extracted %d section(s), %d without environmental text",
        len(sections),
        sum(1 for section in sections if section.is_empty),
    )

    inputs: t.Dict[str, t.Optional[PathLike]] = {
        f"reports[{i}]": path for i, path in enumerate(config.corpus.reports)
    }
    inputs.update(
        meta=config.corpus.meta,
        dictionary=config.segment.dictionary,
        stopwords=config.segment.stopwords,
    )
    _manifest(
        config,
        "ingest",
        inputs,
        {"sections": art.sections, "corpus_stats": art.corpus_stats},
        reports=len(docs),
        universe=len(universe),
    )


def cmd_segment(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Build the unique word sequence S1."""
    art = Artifacts(config.out_dir)
    sections = read_sections(art.require("sections"))
    s1 = build_s1(sections, _segmenter(config))
    write_s1(art.s1, s1)
    _manifest(
        config,
        "segment",
        {
            "sections": art.sections,
            "dictionary": config.segment.dictionary,
            "stopwords": config.segment.stopwords,
        },
        {"s1": art.s1},
        words=len(s1),
    )


def cmd_judge_a(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Judge every S1 word and write the green dictionary."""
    art = Artifacts(config.out_dir)
    judge = config.require("judge")
    s1 = read_s1(art.require("s1"))
    backend = judge.get_backend(args.backend)
    template = judge.get_template("a")

    with _journal(config) as journal:
        result = run_layer_a(
            s1,
            backend,
            template,
            journal=journal,
            from_journal=args.from_journal,
            corpus_id=hash_paths({"s1": art.s1})["s1"] or "",
        )
    write_dictionary(art.dictionary, result.dictionary)
    write_log(art.layer_a_log, result.log)
    _manifest(
        config,
        "judge-a",
        {"s1": art.s1, "template": judge.template_a},
        {"dictionary": art.dictionary, "layer_a_log": art.layer_a_log},
        backend_id=backend.backend_id,
        template_id=template.template_id,
        from_journal=args.from_journal,
        failed=len(result.failed),
    )


def cmd_judge_b(config: PipelineConfig, args: argparse.Namespace) -> None:
    """
    Build S2 from the green dictionary and judge every pair under one ablation arm.

    Verdicts of the configured primary arm also become ``verdicts.jsonl`` and the X/Y counts.
    """
    art = Artifacts(config.out_dir)
    judge = config.require("judge")
    sections = read_sections(art.require("sections"))
    dictionary = read_dictionary(art.require("dictionary"))
    segmenter = _segmenter(config)

    pairs = build_s2(sections, dictionary, segmenter)
    write_s2(art.s2, pairs)

    arm = judge.get_arm(args.arm)
    backend = judge.get_backend(args.backend)
    with _journal(config) as journal:
        verdicts = run_layer_b(
            pairs,
            arm,
            backend,
            judge.get_template("b"),
            sections=sections,
            segmenter=segmenter,
            journal=journal,
            from_journal=args.from_journal,
        )
    arm_path = art.arm_verdicts(arm.name)
    write_verdicts(arm_path, verdicts)

    outputs: t.Dict[str, t.Optional[PathLike]] = {"s2": art.s2, arm.name: arm_path}
    if arm.name == judge.arm:
        write_verdicts(art.verdicts, verdicts)
        firm_years = [(section.firm_id, section.year) for section in sections]
        write_xy(art.xy, count_xy(verdicts, firm_years))
        outputs.update(verdicts=art.verdicts, xy=art.xy)
    else:
        logger.info("Arm %s is not the primary arm %s; X/Y counts unchanged", arm.name, judge.arm)

    _manifest(
        config,
        f"judge-b-{arm.name}",
        {"sections": art.sections, "dictionary": art.dictionary, "template": judge.template_b},
        outputs,
        backend_id=backend.backend_id,
        arm=arm.name,
        context_window=arm.context_window_sentences,
        from_journal=args.from_journal,
        pairs=len(pairs),
    )


def cmd_indicators(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Compute GI and the greenwashing flag of every firm-year of the universe."""
    art = Artifacts(config.out_dir)
    settings = config.require("indicators")
    sections = read_sections(art.require("sections"))
    xy = read_xy(art.require("xy"))
    indicators = build_indicators(
        [(section.firm_id, section.year) for section in sections],
        xy,
        load_meta(config.corpus.meta),
        load_esg(settings.esg),
        settings.grouping,
    )
    write_indicators(art.indicators, indicators)
    logger.info(
        "Flagged %d of %d firm-year(s)",
        sum(ind.greenwashing for ind in indicators),
        len(indicators),
    )
    _manifest(
        config,
        "indicators",
        {"sections": art.sections, "xy": art.xy, "meta": config.corpus.meta, "esg": settings.esg},
        {"indicators": art.indicators},
        grouping=settings.grouping,
    )


def _validate_layer_a(
    config: PipelineConfig, plan: SamplingPlan, args: argparse.Namespace, art: Artifacts
) -> None:
    judge = config.require("judge")
    settings = config.validate
    words = read_s1(art.require("s1")).words
    labels = load_labels(t.cast(str, settings.word_labels))
    replicates = [[words[i] for i in sample] for sample in draw_samples(plan, words)]
    backends = [judge.get_backend(backend_id) for backend_id in settings.compare]

    with _journal(config) as journal:
        report = compare_backends(
            replicates,
            labels.labels,
            backends or list(judge.backends),
            judge.get_template("a"),
            journal=journal,
            from_journal=args.from_journal,
        )
    out = art.validation
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "layer_a.json", report.to_dict())
    report.metrics_table().to_csv(out / "layer_a_metrics.csv", index=False)
    report.density_table().to_csv(out / "layer_a_density.csv", index=False)
    labels.disagreements.to_csv(out / "layer_a_disagreements.csv", index=False)
    logger.info("Layer A backend ranking: %s", ", ".join(report.ranking()))


def _validate_layer_b(config: PipelineConfig, plan: SamplingPlan, art: Artifacts) -> None:
    settings = config.validate
    pairs = read_s2(art.require("s2"))
    labels = load_labels(t.cast(str, settings.pair_labels))
    samples = [[pairs[i].pair_id for i in sample] for sample in draw_samples(plan, pairs)]

    verdicts = {
        arm.value: read_verdicts(art.arm_verdicts(arm.value))
        for arm in Arm
        if art.arm_verdicts(arm.value).exists()
    }
    if not verdicts:
        raise MissingArtifact("layer B verdicts", "judge-b", str(art.root))
    report = ablation_report(
        verdicts,
        labels.labels,
        samples=samples,
        pairs=pairs,
        edges=settings.edges,
        bins=settings.bins,
    )
    report.write(art.validation)
    labels.disagreements.to_csv(art.validation / "layer_b_disagreements.csv", index=False)


def cmd_validate(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Score the judgment layers against human labels and compare the ablation arms."""
    art = Artifacts(config.out_dir)
    settings = config.validate
    ran = []
    if settings.word_labels and settings.layer_a:
        _validate_layer_a(config, settings.layer_a, args, art)
        ran.append("layer_a")
    if settings.pair_labels and settings.layer_b:
        _validate_layer_b(config, settings.layer_b, art)
        ran.append("layer_b")
    if not ran:
        logger.warning("No labels and sampling plans configured; nothing to validate")

    _manifest(
        config,
        "validate",
        {
            "s1": art.s1,
            "s2": art.s2,
            "word_labels": settings.word_labels,
            "pair_labels": settings.pair_labels,
            **{arm.value: art.arm_verdicts(arm.value) for arm in Arm},
        },
        {"validation": art.validation},
        layers=ran,
        layer_a=settings.layer_a.to_dict() if settings.layer_a else None,
        layer_b=settings.layer_b.to_dict() if settings.layer_b else None,
    )


def _write_table(directory: Path, name: str, results: t.Sequence[t.Any], text: str = "") -> None:
    (directory / f"{name}.txt").write_text(text or render_table(results), encoding="utf-8")
    table_frame(results).to_csv(directory / f"{name}.csv", index=False)


def _attempt(
    summary: t.Dict[str, t.Any], name: str, func: t.Callable[..., t.Any], *args, **kwargs
) -> t.Any:
    """Run a robustness analysis, recording its failure in `summary` instead of raising."""
    try:
        return func(*args, **kwargs)
    except EstimationError as exc:
        logger.warning("Skipped %s: %s", name, exc)
        summary[name] = {"error": f"{type(exc).__name__}: {exc}"}
        return None


def cmd_estimate(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Assemble the panel and fit the benchmark suite and the robustness analyses."""
    art = Artifacts(config.out_dir)
    settings = config.require("estimate")
    indicators = indicators_frame(read_indicators(art.require("indicators")))
    controls = pd.read_csv(settings.controls, dtype={"firm_id": str, "industry_code": str})
    panel = assemble_panel(indicators, controls)
    panel.to_csv(art.panel, index=False)

    out = art.estimates
    out.mkdir(parents=True, exist_ok=True)
    benchmark = settings.benchmark
    focus = benchmark.focus_term
    covariates = [col for col in benchmark.regressors if col != focus]

    numeric = ["vio", "vio_num", focus, *covariates]
    describe(panel, {col: col for col in numeric if col in panel}).to_csv(out / "descriptive.csv")
    vif_table, corr = vif(panel, [focus, *covariates])
    vif_table.to_csv(out / "vif.csv", index=False)
    corr.to_csv(out / "correlation.csv")

    specs = list(settings.models) or [
        spec.replace(cov_type=settings.cov_type)
        for spec in default_suite(covariates, treatment=focus)
    ]
    suite = run_suite(panel, specs)
    _write_table(out, "benchmark", suite.results, suite.table())
    write_json(art.benchmark, suite.to_dict())

    summary: t.Dict[str, t.Any] = {}
    for moderator in settings.moderators:
        name = f"moderation_{moderator}"
        if moderator not in panel:
            logger.info("Moderator %s is not in the panel; skipped", moderator)
            continue
        fits = _attempt(summary, name, moderation, panel, moderator, benchmark)
        if fits is not None:
            _write_table(out, name, list(fits.values()))
            summary[name] = {family: result.to_dict() for family, result in fits.items()}

    for split in settings.heterogeneity:
        report = heterogeneity(panel, benchmark, split)
        if report.results:
            _write_table(out, f"heterogeneity_{split}", list(report.results.values()))
        summary[f"heterogeneity_{split}"] = report.to_dict()

    if settings.psm:
        matched = _attempt(
            summary,
            "psm",
            psm,
            panel,
            focus,
            covariates,
            dependent=benchmark.dependent,
            caliper=settings.caliper,
            fixed_effects=benchmark.fixed_effects,
        )
        if matched is not None:
            matched.balance.to_csv(out / "psm_balance.csv", index=False)
            _write_table(out, "psm", [matched.propensity, *matched.post.values()])
            summary["psm"] = matched.to_dict()

    if settings.iv:
        for dynamic in [False, True] if settings.iv_dynamic else [False]:
            name = "iv_dynamic" if dynamic else "iv"
            fitted = _attempt(summary, name, fit_iv, panel, benchmark, dynamic=dynamic)
            if fitted is not None:
                _write_table(out, name, [fitted.first_stage, fitted.second_stage, fitted.tsls])
                summary[name] = fitted.to_dict()

    write_json(out / "robustness.json", summary)
    _manifest(
        config,
        "estimate",
        {"indicators": art.indicators, "controls": settings.controls},
        {"panel": art.panel, "estimates": out},
        models=[spec.to_dict() for spec in specs],
        benchmark=benchmark.to_dict(),
    )


def cmd_placebo(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Refit the benchmark model under randomly reassigned treatment."""
    art = Artifacts(config.out_dir)
    settings = config.require("placebo")
    panel = load_panel(art.require("panel"))
    benchmark = config.estimate.benchmark if config.estimate else default_benchmark()
    report = placebo(panel, benchmark, **settings.get_run_options())
    report.write(art.placebo)
    _manifest(
        config,
        "placebo",
        {"panel": art.panel},
        {"placebo": art.placebo},
        benchmark=benchmark.to_dict(),
        **settings.get_run_options(),
    )


def _copy_tables(source: Path, target: Path, prefix: str) -> t.List[str]:
    copied = []
    if source.is_dir():
        for path in sorted(source.iterdir()):
            if path.suffix in (".csv", ".txt", ".json"):
                shutil.copyfile(path, target / f"{prefix}{path.name}")
                copied.append(f"{prefix}{path.name}")
    return copied


def cmd_report(config: PipelineConfig, args: argparse.Namespace) -> None:
    """Bundle validation metrics, indicator distributions and estimation tables."""
    art = Artifacts(config.out_dir)
    indicators = indicators_frame(read_indicators(art.require("indicators")))
    art.require("benchmark")
    out = art.report
    out.mkdir(parents=True, exist_ok=True)

    distribution = describe(
        indicators, {"x": "X", "y": "Y", "gi": "GI", "esg_e": "ESG_E", "greenwashing": "Flag"}
    )
    distribution.to_csv(out / "indicator_distribution.csv")
    by_year = (
        indicators.groupby("year")
        .agg(firms=("firm_id", "count"), flagged=("greenwashing", "sum"), mean_gi=("gi", "mean"))
        .reset_index()
    )
    by_year.to_csv(out / "greenwashing_by_year.csv", index=False)

    files = ["indicator_distribution.csv", "greenwashing_by_year.csv"]
    files += _copy_tables(art.validation, out, "validation_")
    files += _copy_tables(art.estimates, out, "estimates_")
    files += _copy_tables(art.placebo, out, "placebo_")
    if art.corpus_stats.exists():
        shutil.copyfile(art.corpus_stats, out / "corpus_stats.csv")
        files.append("corpus_stats.csv")

    manifests = collect_manifests(art.root)
    manifests.pop("report", None)
    summary: t.Dict[str, t.Any] = {
        "version": __version__,
        "firm_years": len(indicators),
        "flagged": int(indicators["greenwashing"].sum()),
        "files": sorted(files),
        "manifests": manifests,
    }
    if (art.placebo / "placebo.json").exists():
        summary["placebo"] = read_json(art.placebo / "placebo.json")
    write_json(out / "summary.json", summary)
    _manifest(
        config,
        "report",
        {"indicators": art.indicators, "estimates": art.estimates},
        {"report": out},
    )


def cmd_synth(args: argparse.Namespace) -> None:
    """Write the synthetic study."""
    study = make_study(
        args.directory,
        n_firms=args.firms,
        seed=args.seed if args.seed is not None else 0,
        replications=args.replications,
    )
    print(study.config_path)


COMMANDS: t.Dict[str, t.Callable[[PipelineConfig, argparse.Namespace], None]] = {
    "ingest": cmd_ingest,
    "segment": cmd_segment,
    "judge-a": cmd_judge_a,
    "judge-b": cmd_judge_b,
    "indicators": cmd_indicators,
    "validate": cmd_validate,
    "estimate": cmd_estimate,
    "placebo": cmd_placebo,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override every seed of the configuration")
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level (default: %(default)s)",
    )

    stage = argparse.ArgumentParser(add_help=False, parents=[common])
    stage.add_argument(
        "--config", default=DEFAULT_CONFIG, help="pipeline file (default: %(default)s)"
    )
    stage.add_argument("--out", help="output directory, overriding the configuration")
    stage.add_argument("--backend", help="backend id, defaulting to the champion backend")
    stage.add_argument(
        "--from-journal",
        action="store_true",
        help="replay LLM answers from the journal instead of calling the backend",
    )

    parser = argparse.ArgumentParser(
        prog="greenlens", description="Greenwashing detection from annual-report disclosures."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub = commands.add_parser(name, parents=[stage], help=(func.__doc__ or "").split("\n")[0])
        if name == "judge-b":
            sub.add_argument("--arm", choices=[arm.value for arm in Arm], help="ablation arm")

    synth = commands.add_parser("synth", parents=[common], help=cmd_synth.__doc__)
    synth.add_argument("directory", help="target directory")
    synth.add_argument("--firms", type=int, default=120, help="number of firms")
    synth.add_argument("--replications", type=int, default=200, help="placebo replications")
    return parser


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    """Run the command line and return the exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, force=True)

    try:
        if args.command == "synth":
            cmd_synth(args)
            return 0
        config = load_config(args.config)
        if args.out:
            config = config.with_out(args.out)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        config.out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](config, args)
    except GreenlensError as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
