"""Light-field container, grayscale ingestion and angular/spatial slicing.

A light field is stored as a 4-D ``uint8`` array indexed ``(u, v, s, t)``:
``u, v`` are the angular coordinates (which view) and ``s, t`` the spatial
coordinates (which pixel).  Fixing ``(u, v)`` gives a sub-aperture image
(an ordinary photograph from one viewpoint); fixing ``(s, t)`` gives a
micro-lens image (one scene point seen from every direction).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from .errors import DecodeError, DimensionMismatch, IndexOutOfRange, MissingView

__all__ = [
    "IMAGE_EXTENSIONS",
    "LightField",
    "MicroLensImage",
    "SubApertureImage",
    "extract_mli",
    "extract_sai",
    "iter_mlis",
    "load_light_field",
    "load_sai_array",
    "read_gray_image",
    "to_grayscale",
]

IMAGE_EXTENSIONS = (".png", ".bmp", ".ppm", ".pgm", ".pnm")

# BT.601 luma weights, scaled by 1000 so conversion stays in integers
_LUMA_WEIGHTS = np.array([299, 587, 114], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class LightField:
    """Immutable 4-D grayscale light field, ``data[u, v, s, t]`` in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 4:
            raise DimensionMismatch(f"light field must be 4-D (u, v, s, t), got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer) and not np.all(np.mod(arr, 1) == 0):
                raise DimensionMismatch("light field values must be integers")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise DimensionMismatch("light field values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        U, V, S, T = arr.shape
        if U < 2 or V < 2:
            raise DimensionMismatch(f"need at least 2 views per angular axis, got {U}x{V}")
        if S < 8 or T < 8:
            raise DimensionMismatch(f"spatial size must be at least 8x8, got {S}x{T}")
        arr = np.array(arr, copy=True, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def angular_shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.data.shape[2], self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.data.shape)

    def mli_stack(self) -> np.ndarray:
        """All micro-lens images as an ``(S, T, U, V)`` view (no copy)."""
        return self.data.transpose(2, 3, 0, 1)


@dataclass(frozen=True, eq=False)
class SubApertureImage:
    pixels: np.ndarray
    view: tuple[int, int]


@dataclass(frozen=True, eq=False)
class MicroLensImage:
    pixels: np.ndarray
    site: tuple[int, int]


def to_grayscale(r, g, b):
    """BT.601 luma with round-half-up, clamped to [0, 255].

    Accepts scalars or broadcastable integer arrays; returns the same kind.
    """
    rgb = np.stack(np.broadcast_arrays(r, g, b), axis=-1).astype(np.int64)
    gray = np.clip((rgb @ _LUMA_WEIGHTS + 500) // 1000, 0, 255)
    if gray.ndim == 0:
        return int(gray)
    return gray.astype(np.uint8)


def read_gray_image(path: str | Path) -> np.ndarray:
    """Decode an 8-bit PNG/BMP/PPM/PGM file into a 2-D ``uint8`` gray array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "P", "1"):
                arr = np.asarray(im.convert("L"))
            elif mode in ("RGB", "RGBA", "RGBX"):
                rgb = np.asarray(im.convert("RGB"))
                arr = to_grayscale(rgb[..., 0], rgb[..., 1], rgb[..., 2])
            elif mode == "LA":
                arr = np.asarray(im.convert("L"))
            else:
                raise DecodeError(f"{path}: unsupported image mode {mode!r} (8-bit gray or RGB expected)")
    except DecodeError:
        raise
    except (OSError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return np.ascontiguousarray(arr, dtype=np.uint8)


def _template_regex(template: str) -> re.Pattern:
    if "{u}" not in template or "{v}" not in template:
        raise ValueError(f"naming template must contain {{u}} and {{v}}: {template!r}")
    parts = re.split(r"(\{u\}|\{v\})", template)
    pattern = "".join(
        "(?P<u>\\d+)" if p == "{u}" else "(?P<v>\\d+)" if p == "{v}" else re.escape(p)
        for p in parts
    )
    return re.compile(pattern + "$")


def _collect_views(directory: Path, U: int, V: int, naming_pattern: str | None) -> dict:
    files = sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    views: dict[tuple[int, int], Path] = {}
    if naming_pattern is None:
        # lexicographic order fills the grid row-major
        if len(files) < U * V:
            raise MissingView(f"{directory}: expected {U * V} views, found {len(files)} image files")
        if len(files) > U * V:
            raise DimensionMismatch(
                f"{directory}: expected {U * V} views, found {len(files)} image files"
            )
        for k, p in enumerate(files):
            views[divmod(k, V)] = p
        return views

    regex = _template_regex(naming_pattern)
    # templates without an extension match the file stem
    match_stem = "." not in naming_pattern
    for p in files:
        m = regex.match(p.stem if match_stem else p.name)
        if m is None:
            continue
        key = (int(m.group("u")), int(m.group("v")))
        if key in views:
            raise DimensionMismatch(f"{directory}: two files map to view {key}")
        views[key] = p
    for u in range(U):
        for v in range(V):
            if (u, v) not in views:
                raise MissingView(f"{directory}: no file for view (u={u}, v={v})")
    return views


def load_sai_array(
    directory: str | Path, angular_dims: tuple[int, int], naming_pattern: str | None = None
) -> LightField:
    """Assemble a light field from a directory of decoded sub-aperture images.

    Parameters
    ----------
    directory : path
        Folder holding ``U*V`` image files.
    angular_dims : (U, V)
        Angular grid size.
    naming_pattern : str, optional
        Template such as ``"{u}_{v}"`` or ``"view_{u}_{v}.png"`` locating each
        view.  Without one, files sorted by name fill the grid row-major.
    """
    directory = Path(directory)
    U, V = angular_dims
    if not directory.is_dir():
        raise MissingView(f"{directory}: not a directory")
    views = _collect_views(directory, U, V, naming_pattern)

    data = None
    for (u, v), path in sorted(views.items()):
        if u >= U or v >= V:
            continue
        img = read_gray_image(path)
        if data is None:
            data = np.empty((U, V) + img.shape, dtype=np.uint8)
        elif img.shape != data.shape[2:]:
            raise DimensionMismatch(
                f"{path}: size {img.shape} differs from {data.shape[2:]} of the first view"
            )
        data[u, v] = img
    return LightField(data)


def load_light_field(
    path: str | Path, angular_dims: tuple[int, int] | None = None, naming_pattern: str | None = None
) -> LightField:
    """Load either a directory of SAI files or a ``.npy`` array of shape (U, V, S, T)."""
    path = Path(path)
    if path.suffix.lower() == ".npy":
        try:
            arr = np.load(path, allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise DecodeError(f"{path}: {exc}") from exc
        lf = LightField(arr)
        if angular_dims is not None and lf.angular_shape != tuple(angular_dims):
            raise DimensionMismatch(
                f"{path}: angular dims {lf.angular_shape} differ from declared {tuple(angular_dims)}"
            )
        return lf
    if angular_dims is None:
        raise ValueError("angular_dims is required for SAI directories")
    return load_sai_array(path, angular_dims, naming_pattern)


def extract_sai(lf: LightField, u: int, v: int) -> SubApertureImage:
    U, V = lf.angular_shape
    if not (0 <= u < U and 0 <= v < V):
        raise IndexOutOfRange(f"view ({u}, {v}) outside angular grid {U}x{V}")
    return SubApertureImage(lf.data[u, v], (u, v))


def extract_mli(lf: LightField, s: int, t: int) -> MicroLensImage:
    S, T = lf.spatial_shape
    if not (0 <= s < S and 0 <= t < T):
        raise IndexOutOfRange(f"site ({s}, {t}) outside spatial grid {S}x{T}")
    return MicroLensImage(np.ascontiguousarray(lf.data[:, :, s, t]), (s, t))


def iter_mlis(lf: LightField) -> Iterator[tuple[tuple[int, int], MicroLensImage]]:
    """Yield ``((s, t), mli)`` for every spatial site in row-major order."""
    S, T = lf.spatial_shape
    for s in range(S):
        for t in range(T):
            yield (s, t), extract_mli(lf, s, t)
