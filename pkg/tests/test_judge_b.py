import math

import pytest

from greenlens.errors import ConfigError, DuplicatePair, MissingLabels, MixedArms, PayloadMismatch
from greenlens.gateway import LAYER_A_TEMPLATE, MockBackend, RetrievalConfig, SnapshotRetriever
from greenlens.judge_b import (
    AblationArm,
    Arm,
    PairVerdict,
    XYCount,
    ablation_report,
    build_payloads,
    context_windows,
    count_xy,
    read_verdicts,
    read_xy,
    run_layer_b,
    write_verdicts,
    write_xy,
)
from greenlens.segment import KeywordContextPair, build_s2, make_pair_id
from greenlens.store import SnapshotStore

from .fixtures import answer, section


parametrize = pytest.mark.parametrize


LONG_TEXT = "第一句。第二句。公司推进绿色生产。第四句。第五句。"


def pair(firm_id="000001", year=2022, index=0, keyword="推进", sentence="公司##推进##。"):
    return KeywordContextPair(
        keyword=keyword,
        sentence=sentence,
        firm_id=firm_id,
        year=year,
        sentence_index=index,
        occurrence=0,
        pair_id=make_pair_id(firm_id, year, index, keyword, 0),
    )


def verdict(pair_id, judgment, confidence=0.9, firm_id="000001", year=2022, arm="control"):
    return PairVerdict(pair_id, firm_id, year, arm, judgment, confidence)


def rag_arm(tmp_path) -> AblationArm:
    return AblationArm(Arm.RAG, retrieval=RetrievalConfig("web", str(tmp_path / "snap.sqlite")))


def test_ablation_arm__validation():
    assert AblationArm("context").arm is Arm.CONTEXT
    assert AblationArm().name == "control"

    with pytest.raises(ConfigError):
        AblationArm(Arm.RAG)
    with pytest.raises(ConfigError):
        AblationArm(Arm.CONTEXT, context_window_sentences=-1)
    with pytest.raises(ValueError):
        AblationArm("prompt-tuning")


def test_context_windows(segmenter):
    sections = [section("000001", 2022, LONG_TEXT)]
    pairs = [pair(index=0), pair(index=2), pair(index=4), pair(firm_id="000009")]

    windows = context_windows(pairs, sections, window=2, segmenter=segmenter)

    assert windows == [
        ("第二句。", "公司推进绿色生产。"),
        ("第一句。", "第二句。", "第四句。", "第五句。"),
        ("公司推进绿色生产。", "第四句。"),
        (),
    ]


def test_context_windows__zero_window(segmenter):
    sections = [section("000001", 2022, LONG_TEXT)]
    assert context_windows([pair(index=2)], sections, window=0, segmenter=segmenter) == [()]


def test_build_payloads__control():
    pairs = [pair(index=0), pair(index=1)]

    inputs = build_payloads(pairs, AblationArm())

    assert [item.payload for item in inputs] == pairs
    assert all(item.tag == "control" and not item.context for item in inputs)


def test_build_payloads__context_requires_sections():
    with pytest.raises(ConfigError):
        build_payloads([pair()], AblationArm(Arm.CONTEXT))


def test_build_payloads__rag_uses_plain_sentence(tmp_path):
    arm = rag_arm(tmp_path)
    store = SnapshotStore(tmp_path / "snap.sqlite")
    store.put("web", "公司推进。", ["evidence"])
    retriever = SnapshotRetriever(arm.retrieval, store=store)

    (item,) = build_payloads([pair()], arm, retriever=retriever)

    assert item.retrieved == ("evidence",)
    assert item.tag == "rag"
    assert item.fixture_keys[0] == f"rag:{pair().pair_id}"


def test_run_layer_b__arms_are_scripted_separately(backend_config, journal, segmenter):
    sections = [section("000001", 2022, LONG_TEXT)]
    pairs = build_s2(sections, ["推进"], segmenter)
    (pair_id,) = [p.pair_id for p in pairs]
    backend = MockBackend(
        {f"control:{pair_id}": answer(0, 0.6), f"context:{pair_id}": answer(1, 0.8)}
    )

    control = run_layer_b(pairs, AblationArm(), backend_config, backend=backend, journal=journal)
    context = run_layer_b(
        pairs,
        AblationArm(Arm.CONTEXT),
        backend_config,
        sections=sections,
        segmenter=segmenter,
        backend=backend,
        journal=journal,
    )

    assert control == [PairVerdict(pair_id, "000001", 2022, "control", 0, 0.6, "mock")]
    assert context == [PairVerdict(pair_id, "000001", 2022, "context", 1, 0.8, "mock")]
    assert {r.run_id for r in journal.entries()} == {"layer-b-control", "layer-b-context"}
    assert {r.layer for r in journal.entries()} == {"B"}


def test_run_layer_b__failed_pairs(backend_config):
    (verdict_,) = run_layer_b([pair()], AblationArm(), backend_config, backend=MockBackend({}))

    assert not verdict_.ok
    assert verdict_.judgment is None
    assert verdict_.error.startswith("FixtureMissing")


def test_run_layer_b__requires_layer_b_template(backend_config, mock_backend):
    with pytest.raises(PayloadMismatch):
        run_layer_b([pair()], AblationArm(), backend_config, LAYER_A_TEMPLATE, backend=mock_backend)


def test_count_xy():
    verdicts = [
        verdict("a", 1),
        verdict("b", 0),
        verdict("c", 1),
        PairVerdict("d", "000001", 2022, "control", error="FixtureMissing: x"),
        verdict("e", 0, firm_id="000002", year=2021),
    ]

    counts = count_xy(verdicts, firm_years=[("000003", 2022), ("000001", 2022)])

    assert counts == [
        XYCount("000001", 2022, x=2, y=1),
        XYCount("000002", 2021, x=0, y=1),
        XYCount("000003", 2022, x=0, y=0),
    ]


def test_count_xy__rejects_duplicate_pairs():
    with pytest.raises(DuplicatePair):
        count_xy([verdict("a", 1), verdict("a", 0)])


def test_count_xy__rejects_mixed_arms():
    with pytest.raises(MixedArms):
        count_xy([verdict("a", 1), verdict("b", 1, arm="rag")])


def test_count_xy__keeps_every_firm_year_without_pairs():
    assert count_xy([], [("000001", 2020)]) == [XYCount("000001", 2020)]


def test_ablation_report():
    labels = {"a": 1, "b": 0, "c": 1, "d": 0}
    pairs = [
        pair(keyword="管理办法", sentence="公司制定《##管理办法##》。"),
        pair(keyword="推进", sentence="公司##推进##。"),
    ]
    labels.update({p.pair_id: 1 for p in pairs})
    verdicts = {
        "control": [
            verdict("a", 1, 0.9),
            verdict("b", 1, 0.6),
            verdict("c", 0, 0.55),
            verdict("d", 0, 0.99),
            verdict(pairs[0].pair_id, 1, 0.97),
            verdict(pairs[1].pair_id, 1, 0.97),
        ],
        "rag": [
            verdict("a", 1, 0.9, arm="rag"),
            verdict("b", 0, 0.9, arm="rag"),
            verdict("c", 1, 0.9, arm="rag"),
            PairVerdict("d", "000001", 2022, "rag", error="TransportError: x"),
            verdict(pairs[0].pair_id, 1, 0.97, arm="rag"),
            verdict(pairs[1].pair_id, 1, 0.97, arm="rag"),
        ],
    }

    report = ablation_report(verdicts, labels, pairs=pairs)

    control, rag = report.arms["control"], report.arms["rag"]
    assert control.evaluated == 6
    assert control.failed == 0
    assert control.summary["replicates"][0]["tp"] == 3
    assert rag.evaluated == 5
    assert rag.failed == 1
    assert rag.summary["mean"]["mcc"] == pytest.approx(1.0)
    assert rag.summary["mean"]["mcc"] > control.summary["mean"]["mcc"]

    composition = control.composition.set_index("category")
    assert composition.loc["a", "n"] == 1
    assert composition.loc["other", "n"] == 5

    table = report.metrics_table()
    assert list(table["arm"]) == ["control", "rag"]
    assert set(report.reliability_table()["arm"]) == {"control", "rag"}


def ablation_fixture():
    """Return labels and three arms where the context arm corrupts 10% of confident verdicts."""
    labels = {f"p{i:03d}": i % 2 for i in range(100)}
    control, context, rag = [], [], []
    for i, (pair_id, label) in enumerate(labels.items()):
        confident = i < 60
        judgment = label if confident or i % 4 else 1 - label
        confidence = 0.97 if confident else 0.6
        control.append(verdict(pair_id, judgment, confidence))
        flipped = 1 - judgment if confident and i % 10 == 0 else judgment
        context.append(verdict(pair_id, flipped, confidence, arm="context"))
        rag.append(verdict(pair_id, label, 0.9, arm="rag"))
    return labels, {"control": control, "context": context, "rag": rag}


def test_ablation_report__context_arm_degrades_confident_verdicts():
    labels, verdicts = ablation_fixture()

    report = ablation_report(verdicts, labels)

    control, context, rag = (report.arms[arm] for arm in ("control", "context", "rag"))
    for name in ("acc", "f1", "mcc"):
        assert rag.summary["mean"][name] >= control.summary["mean"][name]

    def confident_accuracy(arm):
        return arm.reliability.set_index("bucket").loc["[0.95, 1]", "accuracy"]

    assert confident_accuracy(control) == 1.0
    assert confident_accuracy(context) == pytest.approx(0.9)
    assert confident_accuracy(context) < confident_accuracy(control)


@pytest.mark.parametrize("arm", ["control", "context", "rag"])
def test_ablation_report__bucket_accuracies_aggregate_to_overall(arm):
    labels, verdicts = ablation_fixture()

    report = ablation_report(verdicts, labels)

    table = report.arms[arm].reliability
    filled = table[table["n"] > 0]
    weighted = (filled["n"] * filled["accuracy"]).sum() / filled["n"].sum()
    assert abs(weighted - report.arms[arm].summary["mean"]["acc"]) < 1e-12
    assert table["n"].sum() == len(labels)


def test_ablation_report__arm_where_every_item_failed():
    labels = {"a": 1, "b": 0}
    verdicts = {
        "control": [verdict("a", 1), verdict("b", 0)],
        "rag": [
            PairVerdict("a", "000001", 2022, "rag", error="TransportError: x"),
            PairVerdict("b", "000001", 2022, "rag", error="TransportError: x"),
        ],
    }

    report = ablation_report(verdicts, labels)

    rag = report.arms["rag"]
    assert rag.evaluated == 0
    assert rag.failed == 2
    assert rag.summary["replicates"][0]["evaluated"] == 0
    assert math.isnan(rag.summary["mean"]["mcc"])
    assert report.arms["control"].summary["mean"]["mcc"] == pytest.approx(1.0)


def test_ablation_report__samples_need_labels():
    with pytest.raises(MissingLabels):
        ablation_report({"control": [verdict("a", 1)]}, {"a": 1}, samples=[["a", "b"]])


def test_ablation_report__write(tmp_path):
    report = ablation_report({"control": [verdict("a", 1), verdict("b", 0)]}, {"a": 1, "b": 0})

    report.write(tmp_path / "report")

    names = sorted(path.name for path in (tmp_path / "report").iterdir())
    assert names == [
        "ablation.json",
        "ablation_composition.csv",
        "ablation_density.csv",
        "ablation_metrics.csv",
        "ablation_reliability.csv",
    ]


def test_verdicts__file_round_trip(tmp_path):
    verdicts = [verdict("a", 1), PairVerdict("b", "000002", 2021, "rag", error="x")]
    write_verdicts(tmp_path / "verdicts.jsonl", verdicts)
    assert read_verdicts(tmp_path / "verdicts.jsonl") == verdicts


def test_xy__file_round_trip_keeps_firm_ids(tmp_path):
    counts = [XYCount("000001", 2022, 2, 1), XYCount("000002", 2021, 0, 0)]
    write_xy(tmp_path / "xy.csv", counts)

    assert read_xy(tmp_path / "xy.csv") == counts
    assert (tmp_path / "xy.csv").read_text(encoding="utf-8").splitlines()[0] == "firm_id,year,x,y"
