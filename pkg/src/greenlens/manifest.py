"""
Manifest
--------

Provenance records written next to every stage's artifacts.

A manifest lists content hashes of the stage's inputs and outputs, the configuration hash, the
seed and the versions of the packages that produced it. It carries no timestamps or absolute paths
so that rerunning a stage with identical inputs rewrites an identical file.
"""

from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
import typing as t

from .utils import PathLike, read_json, sha256_file, stable_hash, write_json


#: Distributions whose versions are recorded.
TRACKED_PACKAGES = ("greenlens", "numpy", "scipy", "pandas", "jieba", "SQLAlchemy", "aiohttp")

MANIFEST_SUFFIX = ".manifest.json"


def package_versions(names: t.Iterable[str] = TRACKED_PACKAGES) -> t.Dict[str, str]:
    """Return installed versions of `names`, with ``"missing"`` for absent distributions."""
    versions = {}
    for name in names:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "missing"
    return versions


def hash_path(path: PathLike) -> str:
    """
    Return the SHA-256 digest of a file, or a digest over the relative names and digests of the
    files below a directory.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.rglob("*") if p.is_file())
        return stable_hash(
            [[p.relative_to(path).as_posix(), sha256_file(p)] for p in files], length=64
        )
    return sha256_file(path)


def hash_paths(paths: t.Mapping[str, t.Optional[PathLike]]) -> t.Dict[str, t.Optional[str]]:
    """Hash every named path; missing or unset paths map to ``None``."""
    return {
        name: hash_path(path) if path is not None and Path(path).exists() else None
        for name, path in sorted(paths.items())
    }


@dataclass
class StageManifest:
    stage: str
    config_hash: str
    seed: int
    inputs: t.Dict[str, t.Optional[str]] = field(default_factory=dict)
    outputs: t.Dict[str, t.Optional[str]] = field(default_factory=dict)
    parameters: t.Dict[str, t.Any] = field(default_factory=dict)
    versions: t.Dict[str, str] = field(default_factory=package_versions)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> "StageManifest":
        return cls(**data)


def manifest_path(directory: PathLike, stage: str) -> Path:
    return Path(directory) / f"{stage}{MANIFEST_SUFFIX}"


def write_manifest(directory: PathLike, manifest: StageManifest) -> Path:
    path = manifest_path(directory, manifest.stage)
    write_json(path, manifest.to_dict())
    return path


def read_manifest(directory: PathLike, stage: str) -> t.Optional[StageManifest]:
    """Return the manifest of `stage` in `directory`, or ``None`` if the stage never ran."""
    path = manifest_path(directory, stage)
    if not path.exists():
        return None
    return StageManifest.from_dict(read_json(path))


def collect_manifests(directory: PathLike) -> t.Dict[str, t.Dict[str, t.Any]]:
    """Return every manifest in `directory` keyed by stage."""
    return {
        path.name[: -len(MANIFEST_SUFFIX)]: read_json(path)
        for path in sorted(Path(directory).glob(f"*{MANIFEST_SUFFIX}"))
    }
