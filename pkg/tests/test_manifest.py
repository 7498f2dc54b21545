import shutil

from greenlens.manifest import (
    StageManifest,
    collect_manifests,
    hash_path,
    hash_paths,
    manifest_path,
    package_versions,
    read_manifest,
    write_manifest,
)
from greenlens.utils import sha256_file


def test_hash_path__file_is_content_digest(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("绿色", encoding="utf-8")
    assert hash_path(path) == sha256_file(path)


def test_hash_path__directory_digest_is_location_independent(tmp_path):
    source = tmp_path / "one"
    (source / "sub").mkdir(parents=True)
    (source / "a.txt").write_text("a", encoding="utf-8")
    (source / "sub" / "b.txt").write_text("b", encoding="utf-8")
    copy = tmp_path / "elsewhere" / "two"
    shutil.copytree(source, copy)

    assert hash_path(source) == hash_path(copy)

    (copy / "sub" / "b.txt").write_text("changed", encoding="utf-8")
    assert hash_path(source) != hash_path(copy)


def test_hash_paths__maps_missing_paths_to_none(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("a", encoding="utf-8")

    hashes = hash_paths({"present": path, "absent": tmp_path / "nope", "unset": None})

    assert hashes == {"absent": None, "present": sha256_file(path), "unset": None}
    assert list(hashes) == ["absent", "present", "unset"]


def test_package_versions__reports_missing_distributions():
    versions = package_versions(["numpy", "greenlens-no-such-distribution"])
    assert versions["numpy"] != "missing"
    assert versions["greenlens-no-such-distribution"] == "missing"


def test_manifest__round_trips_through_directory(tmp_path):
    manifest = StageManifest(
        stage="ingest",
        config_hash="abc",
        seed=7,
        inputs={"reports": "1"},
        outputs={"sections": "2"},
        parameters={"year_range": [2020, 2022]},
        versions={"numpy": "1.0"},
    )

    path = write_manifest(tmp_path, manifest)

    assert path == manifest_path(tmp_path, "ingest")
    assert path.name == "ingest.manifest.json"
    assert read_manifest(tmp_path, "ingest") == manifest
    assert read_manifest(tmp_path, "segment") is None


def test_write_manifest__is_byte_stable(tmp_path):
    manifest = StageManifest(stage="segment", config_hash="abc", seed=1, versions={})
    first = write_manifest(tmp_path, manifest).read_bytes()
    second = write_manifest(tmp_path, StageManifest.from_dict(manifest.to_dict())).read_bytes()
    assert first == second


def test_collect_manifests__keys_by_stage(tmp_path):
    for stage in ("judge-a", "judge-b-control"):
        write_manifest(tmp_path, StageManifest(stage=stage, config_hash="h", seed=0, versions={}))
    (tmp_path / "other.json").write_text("{}", encoding="utf-8")

    manifests = collect_manifests(tmp_path)

    assert list(manifests) == ["judge-a", "judge-b-control"]
    assert manifests["judge-a"]["config_hash"] == "h"
