import json
from pathlib import Path

import pytest

from greenlens.config import load_config, parse_config
from greenlens.errors import ConfigError
from greenlens.judge_b import Arm


parametrize = pytest.mark.parametrize


BACKEND = {"backend_id": "a", "fixture_path": "fixture.json"}
TOBIT = {"dependent": "vio", "regressors": ["greenwashing"], "family": "tobit"}

TOML = """\
[pipeline]
seed = 3

[corpus]
reports = ["reports"]
meta = "meta.csv"
year_range = [2020, 2022]

[judge]
champion = "second"

[[judge.backends]]
backend_id = "first"
kind = "mock"
fixture_path = "fixture.json"

[[judge.backends]]
backend_id = "second"
kind = "mock"
fixture_path = "fixture.json"
mock_default = { judgment = 0, confidence = 0.7 }

[validate]
layer_a = { n_per_replicate = 10, replicates = 2 }
layer_b = { n_per_replicate = 5, seed = 99 }

[estimate]
controls = "meta.csv"
cov_type = "cluster"

[placebo]
replications = 300
"""


@pytest.fixture()
def study_dir(tmp_path: Path) -> Path:
    (tmp_path / "reports").mkdir()
    (tmp_path / "meta.csv").write_text("firm_id,industry_code\n", encoding="utf-8")
    (tmp_path / "fixture.json").write_text("{}", encoding="utf-8")
    return tmp_path


def minimal(**sections):
    data = {
        "pipeline": {"seed": 1},
        "corpus": {"reports": "reports", "meta": "meta.csv"},
    }
    data.update(sections)
    return data


def test_parse_config__minimal(study_dir):
    config = parse_config(minimal(), study_dir)

    assert config.seed == 1
    assert config.corpus.reports == (str(study_dir.resolve() / "reports"),)
    assert config.out_dir == study_dir.resolve() / "out"
    assert config.journal_path == config.out_dir / "journal.sqlite"
    assert config.judge is None
    assert config.validate.layer_a is None
    assert config.corpus.get_load_options() == {"encodings": ("utf-8-sig", "gb18030")}


def test_load_config__toml(study_dir):
    (study_dir / "greenlens.toml").write_text(TOML, encoding="utf-8")

    config = load_config(study_dir / "greenlens.toml")

    assert config.corpus.year_range == (2020, 2022)
    assert config.judge.champion == "second"
    assert config.judge.get_backend().backend_id == "second"
    assert config.judge.get_backend("first").mock_default == "fail"
    assert config.judge.get_arm().arm is Arm.CONTROL
    assert config.judge.get_template("a").template_id == "layer-a-v1"
    assert config.validate.layer_a.seed == 3
    assert config.validate.layer_a.population_id == "layer_a"
    assert config.validate.layer_b.seed == 99
    assert config.estimate.benchmark.cov_type == "cluster"
    assert config.estimate.benchmark.name == "benchmark"
    assert config.placebo.seed == 3
    assert config.placebo.get_run_options()["replications"] == 300


def test_load_config__json(study_dir):
    (study_dir / "greenlens.json").write_text(json.dumps(minimal()), encoding="utf-8")
    assert load_config(study_dir / "greenlens.json").seed == 1


@parametrize("content", ["[pipeline\nseed = 1", "seed = = 1"])
def test_load_config__unparsable(tmp_path, content):
    (tmp_path / "bad.toml").write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")


def test_load_config__missing_file(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(tmp_path / "greenlens.toml")
    assert "not found" in str(excinfo.value)


@parametrize(
    "data",
    [
        {"pipeline": {}, "corpus": {"reports": "reports", "meta": "meta.csv"}},
        minimal(pipeline={"seed": -1}),
        minimal(pipeline={"seed": True}),
        minimal(pipeline={"seed": "1"}),
        minimal(pipeline={"seed": 1, "threads": 4}),
        minimal(output={}),
        {"pipeline": {"seed": 1}},
        minimal(corpus={"reports": "reports"}),
        minimal(corpus={"reports": "missing", "meta": "meta.csv"}),
        minimal(corpus={"reports": "reports", "meta": "meta.csv", "year_range": [2022, 2020]}),
        minimal(judge={"backends": []}),
        minimal(judge={"backends": [BACKEND, BACKEND]}),
        minimal(judge={"backends": [BACKEND], "champion": "b"}),
        minimal(judge={"backends": [BACKEND], "arm": "x"}),
        minimal(judge={"backends": [{"backend_id": "a"}]}),
        minimal(validate={"layer_a": {"replicates": 2}}),
        minimal(validate={"edges": [0.5, 0.2]}),
        minimal(indicators={"esg": "meta.csv", "grouping": "province"}),
        minimal(indicators={"grouping": "industry"}),
        minimal(estimate={"cov_type": "robust"}),
        minimal(estimate={"controls": "meta.csv", "caliper": 0}),
        minimal(estimate={"controls": "meta.csv", "models": [TOBIT]}),
        minimal(placebo={"method": "bootstrap"}),
        minimal(placebo={"workers": 0}),
    ],
)
def test_parse_config__invalid(study_dir, data):
    with pytest.raises(ConfigError):
        parse_config(data, study_dir)


def test_parse_config__rag_arm_needs_retrieval(study_dir):
    judge = {"backends": [BACKEND], "arm": "rag"}
    with pytest.raises(ConfigError):
        parse_config(minimal(judge=judge), study_dir)

    (study_dir / "snap.sqlite").write_bytes(b"")
    judge["retrieval"] = {"provider_id": "web", "snapshot_path": "snap.sqlite"}
    config = parse_config(minimal(judge=judge), study_dir)

    retrieval = config.judge.get_arm().retrieval
    assert retrieval.snapshot_path == str(study_dir.resolve() / "snap.sqlite")


def test_config_hash__ignores_location(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for directory in (first, second):
        (directory / "reports").mkdir(parents=True)
        (directory / "meta.csv").write_text("firm_id\n", encoding="utf-8")

    a = parse_config(minimal(), first)
    b = parse_config(minimal(), second)
    c = parse_config(minimal(pipeline={"seed": 2}), first)

    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert len(a.config_hash) == 64


def test_with_seed_overrides_every_seed(study_dir):
    (study_dir / "greenlens.toml").write_text(TOML, encoding="utf-8")
    config = load_config(study_dir / "greenlens.toml").with_seed(11)

    assert config.seed == 11
    assert config.validate.layer_a.seed == 11
    assert config.validate.layer_b.seed == 11
    assert config.placebo.seed == 11


def test_with_out_resets_journal(study_dir, tmp_path):
    data = minimal(pipeline={"seed": 1, "journal": "shared/journal.sqlite"})
    config = parse_config(data, study_dir)
    assert config.journal_path == study_dir.resolve() / "shared" / "journal.sqlite"

    moved = config.with_out(tmp_path / "elsewhere")

    assert moved.out_dir == (tmp_path / "elsewhere").resolve()
    assert moved.journal_path == moved.out_dir / "journal.sqlite"
    assert moved.config_hash == config.config_hash


def test_require(study_dir):
    config = parse_config(minimal(), study_dir)

    assert config.require("corpus") is config.corpus
    with pytest.raises(ConfigError) as excinfo:
        config.require("judge")
    assert "[judge]" in str(excinfo.value)
