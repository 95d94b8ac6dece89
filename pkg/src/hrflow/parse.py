"""
Algebra documents and run manifests.

Reads and writes the two JSON documents hrflow consumes: algebra documents
(structure constants plus a Cartan split and an isotropy choice) and run
manifests (space, initial state, integrator settings).

WHY THIS FILE EXISTS:
- Keeps file formats out of the math modules
- Every malformed input becomes an InputError with a named check
- Saving is deterministic so documents round-trip byte for byte
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .algebra import CartanSplit, LieAlgebra
from .catalog import CatalogEntry, make_catalog_algebra
from .errors import InputError
from .models import (
    CONVERGENCE_THRESHOLD,
    FlowConfig,
    InitialStateSpec,
    RunManifest,
)

logger = logging.getLogger(__name__)

DOCUMENT_KEYS = (
    "dim",
    "basis",
    "brackets",
    "k_indices",
    "p_indices",
    "h_indices",
    "label",
    "tie_groups",
)
REQUIRED_DOCUMENT_KEYS = ("dim", "basis", "brackets", "k_indices", "p_indices")

MANIFEST_KEYS = (
    "name",
    "space",
    "initial",
    "flow",
    "seed",
    "decomposition_seed",
    "out_dir",
    "profile_threshold",
)
SPACE_KEYS = ("catalog", "params", "file", "h_indices")


# =============================================================================
# ALGEBRA DOCUMENTS
# =============================================================================


@dataclass(frozen=True, eq=False)
class AlgebraDocument:
    """An algebra with its Cartan split and isotropy, as read from JSON."""

    algebra: LieAlgebra
    split: CartanSplit
    h_indices: tuple[int, ...] = ()
    label: str = ""
    tie_groups: tuple[tuple[int, ...], ...] = ()

    def to_dict(self) -> dict:
        doc = self.algebra.to_dict()
        doc.update(self.split.to_dict())
        doc["h_indices"] = list(self.h_indices)
        if self.label:
            doc["label"] = self.label
        if self.tie_groups:
            doc["tie_groups"] = [list(g) for g in self.tie_groups]
        return doc


def _index_list(data: dict, key: str) -> tuple[int, ...]:
    values = data.get(key, [])
    if not isinstance(values, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in values
    ):
        raise InputError(f"{key} must be a list of integers", check=key)
    return tuple(values)


def _bracket_entries(raw) -> tuple[tuple[int, int, int, float], ...]:
    if not isinstance(raw, list):
        raise InputError("brackets must be a list", check="brackets")
    seen: set[tuple[int, int, int]] = set()
    entries = []
    for entry in raw:
        if not isinstance(entry, list) or len(entry) != 4:
            raise InputError(f"malformed bracket entry {entry!r}", check="entry")
        i, j, k, value = entry
        if not all(isinstance(n, int) and not isinstance(n, bool) for n in (i, j, k)):
            raise InputError(f"non-integer index in {entry!r}", check="entry")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InputError(f"non-numeric constant in {entry!r}", check="entry")
        if (i, j, k) in seen:
            raise InputError(
                f"duplicate bracket entry ({i}, {j}, {k})",
                check="duplicate_entry",
                details={"entry": [i, j, k]},
            )
        seen.add((i, j, k))
        entries.append((i, j, k, float(value)))
    return tuple(entries)


def algebra_from_document(data: dict) -> AlgebraDocument:
    """
    Build an AlgebraDocument from a parsed JSON object.

    Indices are 0-based. Duplicate (i, j, k) entries, unknown keys and
    missing fields raise InputError.
    """
    if not isinstance(data, dict):
        raise InputError("algebra document must be a JSON object", check="document")
    missing = [key for key in REQUIRED_DOCUMENT_KEYS if key not in data]
    if missing:
        raise InputError(
            f"algebra document is missing {missing}",
            check="document",
            details={"missing": missing},
        )
    unknown = sorted(set(data) - set(DOCUMENT_KEYS))
    if unknown:
        raise InputError(
            f"unknown algebra document keys: {unknown}",
            check="document",
            details={"unknown": unknown},
        )
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise InputError("dim must be an integer", check="dim")
    basis = data["basis"]
    if not isinstance(basis, list):
        raise InputError("basis must be a list of names", check="basis")

    algebra = LieAlgebra(dim, tuple(basis), _bracket_entries(data["brackets"]))
    split = CartanSplit(_index_list(data, "k_indices"), _index_list(data, "p_indices"))
    h_indices = _index_list(data, "h_indices")
    if any(not 0 <= i < dim for i in h_indices):
        raise InputError("h_indices out of range", check="h_indices")

    tie_groups = data.get("tie_groups", [])
    if not isinstance(tie_groups, list) or not all(
        isinstance(g, list) for g in tie_groups
    ):
        raise InputError("tie_groups must be a list of lists", check="tie_groups")
    return AlgebraDocument(
        algebra=algebra,
        split=split,
        h_indices=h_indices,
        label=str(data.get("label", "")),
        tie_groups=tuple(tuple(int(i) for i in g) for g in tie_groups),
    )


def _read_json(path: Path, what: str):
    path = Path(path)
    if not path.exists():
        raise InputError(f"{what} not found: {path}", check="file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(
            f"{what} is not valid JSON: {exc}",
            check="json",
            details={"path": str(path)},
        ) from exc


def load_algebra_document(path: Path) -> AlgebraDocument:
    """Read an algebra document from disk."""
    doc = algebra_from_document(_read_json(path, "algebra document"))
    logger.debug("loaded algebra document %s (dim %d)", path, doc.algebra.dim)
    return doc


def dump_algebra_document(doc: AlgebraDocument | CatalogEntry) -> str:
    """Canonical text of an algebra document; entries keep their stored order."""
    data = doc.to_dict() if isinstance(doc, AlgebraDocument) else doc.to_document()
    return json.dumps(data, indent=2) + "\n"


def save_algebra_document(doc: AlgebraDocument | CatalogEntry, path: Path) -> Path:
    """Write an algebra document (or a catalog entry in document form)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_algebra_document(doc))
    return path


# =============================================================================
# RUN MANIFESTS
# =============================================================================


def manifest_from_dict(data: dict, base_dir: Path | None = None) -> RunManifest:
    """
    Build a RunManifest; a relative ``space.file`` is resolved against base_dir.
    """
    if not isinstance(data, dict):
        raise InputError("manifest must be a JSON object", check="manifest")
    unknown = sorted(set(data) - set(MANIFEST_KEYS))
    if unknown:
        raise InputError(
            f"unknown manifest keys: {unknown}",
            check="manifest",
            details={"unknown": unknown},
        )

    space = data.get("space")
    if not isinstance(space, dict):
        raise InputError("manifest needs a space object", check="space")
    bad = sorted(set(space) - set(SPACE_KEYS))
    if bad:
        raise InputError(f"unknown space keys: {bad}", check="space")
    if ("catalog" in space) == ("file" in space):
        raise InputError("space needs exactly one of catalog/file", check="space")
    space = dict(space)
    if "file" in space and base_dir is not None:
        file_path = Path(space["file"])
        if not file_path.is_absolute():
            space["file"] = str(Path(base_dir) / file_path)

    seed = data.get("seed", 0)
    decomposition_seed = data.get("decomposition_seed")
    for key, value in (("seed", seed), ("decomposition_seed", decomposition_seed)):
        if value is None:
            continue
        if not isinstance(value, int) or isinstance(value, bool):
            raise InputError(f"{key} must be an integer", check=key)

    threshold = float(data.get("profile_threshold", CONVERGENCE_THRESHOLD))
    if threshold <= 0:
        raise InputError("profile_threshold must be positive", check="threshold")

    try:
        flow = FlowConfig.from_dict(dict(data.get("flow", {})))
    except TypeError as exc:
        raise InputError(f"invalid flow config: {exc}", check="flow_fields") from exc

    return RunManifest(
        space=space,
        initial=InitialStateSpec.from_dict(data.get("initial", {"isotropic": 1.0})),
        flow=flow,
        seed=seed,
        decomposition_seed=decomposition_seed,
        out_dir=data.get("out_dir"),
        profile_threshold=threshold,
        name=str(data.get("name", "run")),
    )


def load_manifest(path: Path) -> RunManifest:
    """Read and validate a run manifest."""
    path = Path(path)
    manifest = manifest_from_dict(_read_json(path, "manifest"), path.parent)
    logger.info("loaded manifest %s (space %s)", path, manifest.space_label)
    return manifest


def resolve_space(manifest: RunManifest) -> CatalogEntry | AlgebraDocument:
    """The catalog entry or algebra document a manifest points at."""
    space = manifest.space
    override = space.get("h_indices")
    if "catalog" in space:
        params = space.get("params") or {}
        if not isinstance(params, dict):
            raise InputError("space params must be an object", check="params")
        entry = make_catalog_algebra(str(space["catalog"]), **params)
        if override is not None:
            entry = entry.with_isotropy(override)
        return entry

    doc = load_algebra_document(Path(space["file"]))
    if not doc.label:
        doc = replace(doc, label=Path(space["file"]).stem)
    if override is not None:
        doc = replace(doc, h_indices=tuple(int(i) for i in override))
    return doc
