"""Line-oriented text formats: manifest, feature cache, model, trial report.

Floats in caches and models are written with 17 significant digits so that
reading a file back reproduces the exact binary values.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DuplicatePath,
    FormatVersionError,
    NonFiniteMos,
    ParseError,
    PathMismatch,
)
from .evaluation import TrialReport
from .features import FEATURE_NAMES, FeatureConfig, parse_subset
from .svr import Hyperparams, ScalingParams, SvrModel

__all__ = [
    "CACHE_VERSION",
    "ConfigMismatch",
    "DatasetManifest",
    "FeatureCache",
    "MODEL_VERSION",
    "ManifestRow",
    "align",
    "format_report_table",
    "parse_manifest",
    "read_feature_cache",
    "read_model",
    "report_to_json",
    "write_feature_cache",
    "write_manifest",
    "write_model",
]

MANIFEST_HEADER = ("path", "mos", "scene", "distortion")
CACHE_VERSION = "lfqa-features 1"
MODEL_VERSION = "lfqa-svr 1"
ULBP_BIN_NOTE = "bin k = riu2 class k (k set bits; 5 = non-uniform), P=4 R=1"


class ConfigMismatch(FormatVersionError):
    """A cache was produced with a different feature configuration."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- manifest ---------------------------------------------------------------


@dataclass(frozen=True)
class ManifestRow:
    path: str
    mos: float
    scene: str = ""
    distortion: str = ""


@dataclass(frozen=True)
class DatasetManifest:
    rows: tuple[ManifestRow, ...]
    base_dir: Path = field(default=Path("."))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def paths(self) -> list[str]:
        return [r.path for r in self.rows]

    @property
    def mos(self) -> np.ndarray:
        return np.array([r.mos for r in self.rows])

    @property
    def scenes(self) -> list[str]:
        return [r.scene for r in self.rows]

    def resolve(self, row: ManifestRow) -> Path:
        p = Path(row.path)
        return p if p.is_absolute() else self.base_dir / p


def parse_manifest(path: str | Path) -> DatasetManifest:
    """Read a ``path,mos,scene,distortion`` CSV; relative paths resolve against its folder."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty manifest", 1) from None
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise ParseError(f"{path}: header must be {','.join(MANIFEST_HEADER)}", 1)

    rows = []
    seen = set()
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != 4:
            raise ParseError(f"{path}: expected 4 fields, got {len(rec)}", lineno)
        p, mos_txt, scene, dist = rec
        if not p:
            raise ParseError(f"{path}: empty path", lineno)
        try:
            mos = float(mos_txt)
        except ValueError:
            raise ParseError(f"{path}: mos {mos_txt!r} is not a number", lineno) from None
        if not math.isfinite(mos):
            raise NonFiniteMos(f"{path}: line {lineno}: mos {mos_txt!r} is not finite")
        if p in seen:
            raise DuplicatePath(f"{path}: line {lineno}: duplicate path {p!r}")
        seen.add(p)
        rows.append(ManifestRow(p, mos, scene, dist))
    if not rows:
        raise ParseError(f"{path}: manifest has no rows")
    return DatasetManifest(tuple(rows), path.parent)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_HEADER)
    for r in manifest.rows:
        w.writerow([r.path, repr(float(r.mos)), r.scene, r.distortion])
    _write_text(path, buf.getvalue())


# -- feature cache ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureCache:
    config: FeatureConfig
    paths: tuple[str, ...]
    values: np.ndarray
    fallback: tuple[bool, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(len(self.paths), len(FEATURE_NAMES))
        object.__setattr__(self, "values", vals)


def _config_lines(config: FeatureConfig) -> list[str]:
    return [f"keep: {config.keep!r}", f"threshold: {config.threshold}", f"sai: {config.sai}"]


def write_feature_cache(cache: FeatureCache, path: str | Path) -> None:
    lines = [f"# {CACHE_VERSION}", f"# features: {','.join(FEATURE_NAMES)}", f"# ulbp-bins: {ULBP_BIN_NOTE}"]
    lines += [f"# {ln}" for ln in _config_lines(cache.config)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", *FEATURE_NAMES, "ulbp_fallback"])
    for p, row, fb in zip(cache.paths, cache.values, cache.fallback):
        w.writerow([p, *(fmt(v) for v in row), int(fb)])
    _write_text(path, "\n".join(lines) + "\n" + buf.getvalue())


def read_feature_cache(path: str | Path) -> FeatureCache:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    lines = text.splitlines()
    meta = {}
    body_start = 0
    for k, ln in enumerate(lines):
        if not ln.startswith("#"):
            body_start = k
            break
        key, _, val = ln[1:].strip().partition(":")
        meta[key.strip()] = val.strip()
    else:
        body_start = len(lines)
    if not lines or lines[0] != f"# {CACHE_VERSION}":
        raise FormatVersionError(f"{path}: not a '{CACHE_VERSION}' feature cache")
    if meta.get("features") != ",".join(FEATURE_NAMES):
        raise FormatVersionError(f"{path}: feature order declaration does not match this version")
    try:
        config = FeatureConfig(float(meta["keep"]), int(meta["threshold"]), meta["sai"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad config header ({exc})") from exc

    reader = csv.reader(io.StringIO("\n".join(lines[body_start:])))
    header = next(reader, None)
    expected = ["path", *FEATURE_NAMES, "ulbp_fallback"]
    if header != expected:
        raise ParseError(f"{path}: column header does not match declared feature order", body_start + 1)
    paths, vals, fbs = [], [], []
    for lineno, rec in enumerate(reader, start=body_start + 2):
        if not rec:
            continue
        if len(rec) != len(expected):
            raise ParseError(f"{path}: expected {len(expected)} fields, got {len(rec)}", lineno)
        try:
            vals.append([float(v) for v in rec[1:-1]])
            fbs.append(bool(int(rec[-1])))
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", lineno) from None
        paths.append(rec[0])
    return FeatureCache(config, tuple(paths), np.array(vals).reshape(-1, len(FEATURE_NAMES)), tuple(fbs))


def align(cache: FeatureCache, manifest: DatasetManifest) -> np.ndarray:
    """Cache feature rows reordered to manifest order; both must cover the same paths."""
    index = {p: k for k, p in enumerate(cache.paths)}
    missing = [p for p in manifest.paths if p not in index]
    extra = set(cache.paths) - set(manifest.paths)
    if missing or extra or len(index) != len(cache.paths):
        detail = f"missing from cache: {missing[:3]}" if missing else f"not in manifest: {sorted(extra)[:3]}"
        raise PathMismatch(f"feature cache and manifest disagree ({detail})")
    return cache.values[[index[p] for p in manifest.paths]]


# -- model ------------------------------------------------------------------


def write_model(
    model: SvrModel, path: str | Path, subset: Sequence[str], config: FeatureConfig
) -> None:
    hp = model.hyperparams
    lines = [
        MODEL_VERSION,
        f"features {','.join(subset)}",
        "feature-config " + " ".join(ln.replace(": ", "=") for ln in _config_lines(config)),
        "kernel rbf",
        f"C {fmt(hp.C)}",
        f"gamma {fmt(hp.gamma)}",
        f"epsilon {fmt(hp.epsilon)}",
        f"bias {fmt(model.bias)}",
        f"n_features {model.n_features}",
        f"n_sv {model.dual_coefs.size}",
    ]
    lines += [f"scale {fmt(lo)} {fmt(hi)}" for lo, hi in zip(model.scaling.lo, model.scaling.hi)]
    for coef, sv in zip(model.dual_coefs, model.support_vectors):
        lines.append("sv " + " ".join(fmt(v) for v in (coef, *sv)))
    _write_text(path, "\n".join(lines) + "\n")


def read_model(path: str | Path) -> tuple[SvrModel, tuple[str, ...], FeatureConfig]:
    """Returns the model, the feature groups it consumes and the feature config it expects."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not lines or lines[0] != MODEL_VERSION:
        raise FormatVersionError(f"{path}: not a '{MODEL_VERSION}' model file")
    fields: dict[str, str] = {}
    scale, svs = [], []
    try:
        for lineno, ln in enumerate(lines[1:], start=2):
            key, _, rest = ln.partition(" ")
            if key == "scale":
                scale.append([float(v) for v in rest.split()])
            elif key == "sv":
                svs.append([float(v) for v in rest.split()])
            elif key:
                fields[key] = rest
        subset = parse_subset(fields["features"])
        cfg = dict(kv.split("=", 1) for kv in fields["feature-config"].split())
        config = FeatureConfig(float(cfg["keep"]), int(cfg["threshold"]), cfg["sai"])
        if fields.get("kernel") != "rbf":
            raise ParseError(f"{path}: unsupported kernel {fields.get('kernel')!r}")
        hp = Hyperparams(float(fields["C"]), float(fields["gamma"]), float(fields["epsilon"]))
        d = int(fields["n_features"])
        n_sv = int(fields["n_sv"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: malformed model ({exc})") from exc
    scale = np.array(scale).reshape(-1, 2)
    svs = np.array(svs).reshape(-1, d + 1)
    if scale.shape[0] != d or svs.shape[0] != n_sv:
        raise ParseError(f"{path}: row counts do not match the declared sizes")
    model = SvrModel(
        support_vectors=svs[:, 1:],
        dual_coefs=svs[:, 0],
        bias=float(fields["bias"]),
        hyperparams=hp,
        scaling=ScalingParams(scale[:, 0], scale[:, 1]),
    )
    return model, subset, config


def check_config(cache: FeatureCache, expected: FeatureConfig, what: str = "model") -> None:
    if cache.config != expected:
        raise ConfigMismatch(
            f"feature cache config {cache.config} differs from the {what}'s {expected}"
        )


# -- reports ----------------------------------------------------------------


def report_to_json(report: TrialReport, **meta) -> str:
    doc = {
        **meta,
        "seed": report.seed,
        "trials": report.trial_count,
        "median": {
            "srocc": report.median_srocc,
            "lcc": report.median_lcc,
            "rmse": report.median_rmse,
        },
        "per_trial": [
            {
                "srocc": t.srocc,
                "lcc": t.lcc,
                "rmse": t.rmse,
                **(
                    {"C": t.hyperparams.C, "gamma": t.hyperparams.gamma, "epsilon": t.hyperparams.epsilon}
                    if t.hyperparams
                    else {}
                ),
            }
            for t in report.per_trial
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def format_report_table(report: TrialReport) -> str:
    rows = [
        f"trials  {report.trial_count}   seed {report.seed}",
        f"{'':8}{'SROCC':>10}{'LCC':>10}{'RMSE':>10}",
        f"{'median':8}{report.median_srocc:10.4f}{report.median_lcc:10.4f}{report.median_rmse:10.4f}",
    ]
    return "\n".join(rows) + "\n"
