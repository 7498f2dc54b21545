"""
Config
------

The declarative pipeline configuration.

A pipeline file is TOML (``.toml``) or JSON. Relative paths resolve against the directory of the
file. Every section except ``[pipeline]`` and ``[corpus]`` is optional, but a stage fails with
:class:`.ConfigError` when the section it needs is missing.
"""

from dataclasses import asdict, dataclass, field, replace
import json
from pathlib import Path
import sys
import typing as t

from .corpus import SectionPatternSet
from .econometrics.analysis import MODERATORS, TREATMENT
from .econometrics.design import CONTROLS, ModelSpec
from .econometrics.placebo import METHODS, PERMUTATION
from .errors import ConfigError
from .gateway import (
    LAYER_A_TEMPLATE,
    LAYER_B_TEMPLATE,
    BackendConfig,
    PromptTemplate,
    RetrievalConfig,
)
from .indicators import GROUPINGS, INDUSTRY_YEAR
from .judge_b import DEFAULT_CONTEXT_WINDOW, AblationArm, Arm
from .text import DEFAULT_TERMINATORS
from .utils import PathLike, omit_none, stable_hash
from .validate import DEFAULT_CONFIDENCE_EDGES, SamplingPlan


if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


@dataclass(frozen=True)
class CorpusConfig:
    reports: t.Tuple[str, ...]
    meta: str
    year_range: t.Optional[t.Tuple[int, int]] = None
    encodings: t.Tuple[str, ...] = ("utf-8-sig", "gb18030")
    patterns: SectionPatternSet = field(default_factory=SectionPatternSet)

    def get_load_options(self) -> t.Dict[str, t.Any]:
        return omit_none({"year_range": self.year_range, "encodings": self.encodings})


@dataclass(frozen=True)
class SegmentConfig:
    dictionary: t.Optional[str] = None
    stopwords: t.Optional[str] = None
    terminators: str = DEFAULT_TERMINATORS


@dataclass(frozen=True)
class JudgeConfig:
    """
    Backends and prompts of both judgment layers.

    ``arm`` is the ablation arm whose verdicts feed the X/Y counts. Other arms can still be run
    for the ablation report.
    """

    backends: t.Tuple[BackendConfig, ...]
    champion: str
    template_a: t.Optional[str] = None
    template_b: t.Optional[str] = None
    arm: str = Arm.CONTROL.value
    context_window: int = DEFAULT_CONTEXT_WINDOW
    retrieval: t.Optional[RetrievalConfig] = None

    def get_backend(self, backend_id: t.Optional[str] = None) -> BackendConfig:
        """Return the backend named `backend_id`, or the champion backend."""
        backend_id = backend_id or self.champion
        for backend in self.backends:
            if backend.backend_id == backend_id:
                return backend
        raise ConfigError(f"unknown backend {backend_id!r}")

    def get_template(self, layer: str) -> PromptTemplate:
        path = self.template_a if layer == "a" else self.template_b
        if path is None:
            return LAYER_A_TEMPLATE if layer == "a" else LAYER_B_TEMPLATE
        return PromptTemplate.from_file(path)

    def get_arm(self, arm: t.Optional[str] = None) -> AblationArm:
        return AblationArm(
            arm=Arm(arm or self.arm),
            context_window_sentences=self.context_window,
            retrieval=self.retrieval,
        )


@dataclass(frozen=True)
class ValidateConfig:
    word_labels: t.Optional[str] = None
    pair_labels: t.Optional[str] = None
    layer_a: t.Optional[SamplingPlan] = None
    layer_b: t.Optional[SamplingPlan] = None
    compare: t.Tuple[str, ...] = ()
    edges: t.Tuple[float, ...] = tuple(DEFAULT_CONFIDENCE_EDGES)
    bins: int = 20


@dataclass(frozen=True)
class IndicatorsConfig:
    esg: str
    grouping: str = INDUSTRY_YEAR


def default_benchmark() -> ModelSpec:
    """Return the logit of violations on the treatment, controls and year and industry effects."""
    return ModelSpec(
        dependent="vio",
        regressors=(TREATMENT, *CONTROLS),
        fixed_effects=("year", "industry"),
        name="benchmark",
    )


@dataclass(frozen=True)
class EstimateConfig:
    """
    Estimation settings.

    ``models`` replaces the default benchmark suite when given. ``benchmark`` is the specification
    reused by the moderation, heterogeneity, PSM, IV and placebo analyses.
    """

    controls: str
    models: t.Tuple[ModelSpec, ...] = ()
    benchmark: ModelSpec = field(default_factory=default_benchmark)
    cov_type: str = "nonrobust"
    moderators: t.Tuple[str, ...] = MODERATORS
    heterogeneity: t.Tuple[str, ...] = ()
    psm: bool = True
    caliper: t.Optional[float] = None
    iv: bool = True
    iv_dynamic: bool = True


@dataclass(frozen=True)
class PlaceboConfig:
    seed: int
    replications: int = 500
    method: str = PERMUTATION
    workers: int = 1
    grid_size: int = 200

    def get_run_options(self) -> t.Dict[str, t.Any]:
        return {
            "replications": self.replications,
            "seed": self.seed,
            "method": self.method,
            "workers": self.workers,
            "grid_size": self.grid_size,
        }


@dataclass(frozen=True)
class PipelineConfig:
    """
    Validated pipeline configuration.

    ``source`` keeps the raw mapping the config was loaded from; its hash identifies the config in
    stage manifests independently of where the file lives.
    """

    seed: int
    out: str
    corpus: CorpusConfig
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    judge: t.Optional[JudgeConfig] = None
    validate: ValidateConfig = field(default_factory=ValidateConfig)
    indicators: t.Optional[IndicatorsConfig] = None
    estimate: t.Optional[EstimateConfig] = None
    placebo: t.Optional[PlaceboConfig] = None
    journal: t.Optional[str] = None
    base_dir: str = "."
    source: t.Mapping[str, t.Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def journal_path(self) -> Path:
        return Path(self.journal) if self.journal else self.out_dir / "journal.sqlite"

    @property
    def config_hash(self) -> str:
        return stable_hash(dict(self.source), self.seed, length=64)

    def require(self, section: str) -> t.Any:
        """Return the optional `section`, raising :class:`.ConfigError` when it is missing."""
        value = getattr(self, section)
        if value is None:
            raise ConfigError(f"the configuration has no [{section}] section")
        return value

    def with_out(self, out: PathLike) -> "PipelineConfig":
        return replace(self, out=str(Path(out).resolve()), journal=None)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Return a copy whose sampling plans and placebo draws all use `seed`."""
        validate = replace(
            self.validate,
            layer_a=self.validate.layer_a and replace(self.validate.layer_a, seed=seed),
            layer_b=self.validate.layer_b and replace(self.validate.layer_b, seed=seed),
        )
        placebo = self.placebo and replace(self.placebo, seed=seed)
        return replace(self, seed=seed, validate=validate, placebo=placebo)

    def to_dict(self) -> t.Dict[str, t.Any]:
        data = asdict(self)
        data.pop("source")
        return data


_SECTIONS = (
    "pipeline",
    "corpus",
    "segment",
    "judge",
    "validate",
    "indicators",
    "estimate",
    "placebo",
)


def _options(data: t.Mapping[str, t.Any], name: str, allowed: t.Iterable[str]) -> t.Dict:
    if not isinstance(data, t.Mapping):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown [{name}] option(s): {', '.join(sorted(unknown))}")
    return dict(data)


class _Resolver:
    def __init__(self, base_dir: Path):
        self.base_dir = base_dir

    def __call__(self, value: t.Optional[str], what: str, *, must_exist: bool = True):
        if value is None:
            return None
        path = Path(value)
        if not path.is_absolute():
            path = self.base_dir / path
        if must_exist and not path.exists():
            raise ConfigError(f"{what} not found: {path}")
        return str(path)


def _sampling_plan(data: t.Mapping[str, t.Any], name: str, seed: int) -> SamplingPlan:
    opts = _options(data, name, ("n_per_replicate", "replicates", "seed", "bit_generator"))
    if "n_per_replicate" not in opts:
        raise ConfigError(f"[{name}] needs n_per_replicate")
    opts.setdefault("seed", seed)
    return SamplingPlan(population_id=name.rsplit(".", 1)[-1], **opts)


def _corpus(data: t.Mapping[str, t.Any], resolve: _Resolver) -> CorpusConfig:
    opts = _options(data, "corpus", ("reports", "meta", "year_range", "encodings", "patterns"))
    for key in ("reports", "meta"):
        if key not in opts:
            raise ConfigError(f"[corpus] needs {key}")
    reports = opts["reports"]
    if isinstance(reports, str):
        reports = [reports]
    year_range = opts.get("year_range")
    if year_range is not None:
        if len(year_range) != 2 or year_range[0] > year_range[1]:
            raise ConfigError("[corpus] year_range must be [first, last]")
        year_range = (int(year_range[0]), int(year_range[1]))
    kwargs: t.Dict[str, t.Any] = {}
    if "encodings" in opts:
        kwargs["encodings"] = tuple(opts["encodings"])
    if "patterns" in opts:
        kwargs["patterns"] = SectionPatternSet.from_dict(opts["patterns"])
    return CorpusConfig(
        reports=tuple(resolve(path, "report path") for path in reports),
        meta=resolve(opts["meta"], "firm metadata"),
        year_range=year_range,
        **kwargs,
    )


def _segment(data: t.Mapping[str, t.Any], resolve: _Resolver) -> SegmentConfig:
    opts = _options(data, "segment", ("dictionary", "stopwords", "terminators"))
    return SegmentConfig(
        dictionary=resolve(opts.get("dictionary"), "segmenter dictionary"),
        stopwords=resolve(opts.get("stopwords"), "stopword list"),
        terminators=opts.get("terminators", DEFAULT_TERMINATORS),
    )


def _retrieval(data: t.Mapping[str, t.Any], resolve: _Resolver) -> RetrievalConfig:
    data = dict(data)
    record = bool(data.get("record", False))
    if "snapshot_path" in data:
        data["snapshot_path"] = resolve(
            data["snapshot_path"], "retrieval snapshot", must_exist=not record
        )
    try:
        return RetrievalConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"invalid [judge.retrieval]: {exc}") from exc


def _backend(data: t.Mapping[str, t.Any], resolve: _Resolver) -> BackendConfig:
    data = dict(data)
    if data.get("fixture_path") is not None:
        data["fixture_path"] = resolve(data["fixture_path"], "mock fixture")
    if isinstance(data.get("retrieval"), t.Mapping):
        data["retrieval"] = _retrieval(data["retrieval"], resolve)
    return BackendConfig.from_dict(data)


def _judge(data: t.Mapping[str, t.Any], resolve: _Resolver) -> JudgeConfig:
    opts = _options(
        data,
        "judge",
        ("backends", "champion", "template_a", "template_b", "arm", "context_window", "retrieval"),
    )
    backends = tuple(_backend(item, resolve) for item in opts.get("backends", ()))
    if not backends:
        raise ConfigError("[judge] needs at least one backend")
    ids = [backend.backend_id for backend in backends]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate backend ids in [judge]: {ids}")
    champion = opts.get("champion", ids[0])
    if champion not in ids:
        raise ConfigError(f"champion backend {champion!r} is not configured")

    retrieval = opts.get("retrieval")
    config = JudgeConfig(
        backends=backends,
        champion=champion,
        template_a=resolve(opts.get("template_a"), "layer A template"),
        template_b=resolve(opts.get("template_b"), "layer B template"),
        arm=opts.get("arm", Arm.CONTROL.value),
        context_window=int(opts.get("context_window", DEFAULT_CONTEXT_WINDOW)),
        retrieval=_retrieval(retrieval, resolve) if retrieval is not None else None,
    )
    try:
        config.get_arm()
    except ValueError as exc:
        raise ConfigError(f"invalid [judge] arm: {exc}") from exc
    return config


def _validate(data: t.Mapping[str, t.Any], resolve: _Resolver, seed: int) -> ValidateConfig:
    opts = _options(
        data,
        "validate",
        ("word_labels", "pair_labels", "layer_a", "layer_b", "compare", "edges", "bins"),
    )
    edges = tuple(float(edge) for edge in opts.get("edges", DEFAULT_CONFIDENCE_EDGES))
    if len(edges) < 2 or list(edges) != sorted(edges):
        raise ConfigError("[validate] edges must be increasing with at least two values")
    return ValidateConfig(
        word_labels=resolve(opts.get("word_labels"), "layer A labels"),
        pair_labels=resolve(opts.get("pair_labels"), "layer B labels"),
        layer_a=_sampling_plan(opts["layer_a"], "validate.layer_a", seed)
        if "layer_a" in opts
        else None,
        layer_b=_sampling_plan(opts["layer_b"], "validate.layer_b", seed)
        if "layer_b" in opts
        else None,
        compare=tuple(opts.get("compare", ())),
        edges=edges,
        bins=int(opts.get("bins", 20)),
    )


def _indicators(data: t.Mapping[str, t.Any], resolve: _Resolver) -> IndicatorsConfig:
    opts = _options(data, "indicators", ("esg", "grouping"))
    if "esg" not in opts:
        raise ConfigError("[indicators] needs esg")
    grouping = opts.get("grouping", INDUSTRY_YEAR)
    if grouping not in GROUPINGS:
        raise ConfigError(f"[indicators] grouping must be one of {GROUPINGS}")
    return IndicatorsConfig(esg=resolve(opts["esg"], "ESG scores"), grouping=grouping)


def _estimate(data: t.Mapping[str, t.Any], resolve: _Resolver) -> EstimateConfig:
    opts = _options(
        data,
        "estimate",
        (
            "controls",
            "models",
            "benchmark",
            "cov_type",
            "moderators",
            "heterogeneity",
            "psm",
            "caliper",
            "iv",
            "iv_dynamic",
        ),
    )
    if "controls" not in opts:
        raise ConfigError("[estimate] needs controls")
    cov_type = opts.get("cov_type", "nonrobust")
    models = tuple(
        ModelSpec.from_dict({"cov_type": cov_type, **model}) for model in opts.get("models", ())
    )
    benchmark = default_benchmark().replace(cov_type=cov_type)
    if "benchmark" in opts:
        benchmark = ModelSpec.from_dict({"cov_type": cov_type, **opts["benchmark"]})
    caliper = opts.get("caliper")
    if caliper is not None and not caliper > 0:
        raise ConfigError("[estimate] caliper must be positive")
    return EstimateConfig(
        controls=resolve(opts["controls"], "controls"),
        models=models,
        benchmark=benchmark,
        cov_type=cov_type,
        moderators=tuple(opts.get("moderators", MODERATORS)),
        heterogeneity=tuple(opts.get("heterogeneity", ())),
        psm=bool(opts.get("psm", True)),
        caliper=caliper,
        iv=bool(opts.get("iv", True)),
        iv_dynamic=bool(opts.get("iv_dynamic", True)),
    )


def _placebo(data: t.Mapping[str, t.Any], seed: int) -> PlaceboConfig:
    opts = _options(data, "placebo", ("seed", "replications", "method", "workers", "grid_size"))
    opts.setdefault("seed", seed)
    if opts.get("method", PERMUTATION) not in METHODS:
        raise ConfigError(f"[placebo] method must be one of {METHODS}")
    if opts.get("workers", 1) < 1:
        raise ConfigError("[placebo] workers must be >= 1")
    return PlaceboConfig(**opts)


def parse_config(data: t.Mapping[str, t.Any], base_dir: PathLike = ".") -> PipelineConfig:
    """
    Validate a configuration mapping.

    Args:
        data: Decoded configuration file.
        base_dir: Directory that relative paths resolve against.

    Raises:
        ConfigError: If an option is unknown or invalid, a referenced path does not exist or the
            pipeline seed is missing.
    """
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    base = Path(base_dir).resolve()
    resolve = _Resolver(base)

    pipeline = _options(data.get("pipeline", {}), "pipeline", ("seed", "out", "journal"))
    if "seed" not in pipeline:
        raise ConfigError("[pipeline] needs a seed")
    seed = pipeline["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"[pipeline] seed must be a nonnegative integer, got {seed!r}")
    if "corpus" not in data:
        raise ConfigError("the configuration has no [corpus] section")

    def optional(name: str, parser: t.Callable[..., t.Any], *args: t.Any) -> t.Any:
        return parser(data[name], *args) if name in data else None

    return PipelineConfig(
        seed=seed,
        out=resolve(pipeline.get("out", "out"), "output directory", must_exist=False),
        corpus=_corpus(data["corpus"], resolve),
        segment=_segment(data.get("segment", {}), resolve),
        judge=optional("judge", _judge, resolve),
        validate=_validate(data.get("validate", {}), resolve, seed),
        indicators=optional("indicators", _indicators, resolve),
        estimate=optional("estimate", _estimate, resolve),
        placebo=optional("placebo", _placebo, seed),
        journal=resolve(pipeline.get("journal"), "journal", must_exist=False),
        base_dir=str(base),
        source=data,
    )


def load_config(path: PathLike) -> PipelineConfig:
    """Load and validate the TOML or JSON pipeline file at `path`."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as fp:
                data = tomllib.load(fp)
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {path}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data, path.parent)
