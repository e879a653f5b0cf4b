"""Readers and writers for cubes, grayscale SEM images and result tables.

Cube file layout::

    b"QMCCUBE1" + JSON header + b"\\0" + float32 little-endian payload

The payload is ordered y-outer, x-middle, wavelength-inner, i.e. a C-ordered
``(ny, nx, n_lambda)`` array. The header is written with sorted keys and no
whitespace so that ``write_cube(read_cube(p))`` reproduces ``p`` byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .core import Spectrum
from .errors import (
    BadMagic,
    HeaderMismatch,
    InvalidValue,
    IoFailure,
    MissingScale,
    NonMonotonicAxis,
    UnsupportedFormat,
)

CUBE_MAGIC = b"QMCCUBE1"


@dataclass(eq=False)
class HyperspectralCube:
    """Spectra on a ``ny x nx`` raster; ``data`` has shape ``(ny, nx, n_lambda)``."""

    wavelength_nm: np.ndarray
    data: np.ndarray
    pixel_pitch_um: float = 1.0
    origin_um: tuple[float, float] = (0.0, 0.0)
    # "list" stores every wavelength in the header, "uniform" stores lambda0/dlambda
    axis_form: str = "list"

    def __post_init__(self):
        self.wavelength_nm = np.asarray(self.wavelength_nm, dtype=np.float64)
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != self.wavelength_nm.size:
            raise HeaderMismatch(
                "data must have shape (ny, nx, n_lambda)",
                shape=self.data.shape,
                n_lambda=self.wavelength_nm.size,
            )
        if self.wavelength_nm.size < 2 or np.any(np.diff(self.wavelength_nm) <= 0):
            raise NonMonotonicAxis("cube wavelength axis must be strictly increasing")
        if not np.all(np.isfinite(self.data)) or np.any(self.data < 0):
            raise InvalidValue("cube intensities must be finite and non-negative")
        if self.axis_form not in ("list", "uniform"):
            raise InvalidValue(f"unknown axis_form {self.axis_form!r}")
        self.origin_um = (float(self.origin_um[0]), float(self.origin_um[1]))
        self.pixel_pitch_um = float(self.pixel_pitch_um)

    @property
    def ny(self) -> int:
        return self.data.shape[0]

    @property
    def nx(self) -> int:
        return self.data.shape[1]

    @property
    def n_lambda(self) -> int:
        return self.data.shape[2]

    def spectrum_at(self, x_idx: int, y_idx: int):
        return Spectrum(self.wavelength_nm, self.data[y_idx, x_idx].astype(np.float64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HyperspectralCube):
            return NotImplemented
        return (
            np.array_equal(self.wavelength_nm, other.wavelength_nm)
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
            and self.pixel_pitch_um == other.pixel_pitch_um
            and self.origin_um == other.origin_um
            and self.axis_form == other.axis_form
        )


def _uniform_axis(lambda0: float, dlambda: float, n: int) -> np.ndarray:
    return lambda0 + dlambda * np.arange(n, dtype=np.float64)


def _cube_header(cube: HyperspectralCube) -> bytes:
    header: dict[str, Any] = {
        "nx": cube.nx,
        "ny": cube.ny,
        "n_lambda": cube.n_lambda,
        "pixel_pitch_um": cube.pixel_pitch_um,
        "origin_um": list(cube.origin_um),
    }
    if cube.axis_form == "uniform":
        lam0 = float(cube.wavelength_nm[0])
        dl = float(cube.wavelength_nm[1] - cube.wavelength_nm[0])
        if not np.array_equal(_uniform_axis(lam0, dl, cube.n_lambda), cube.wavelength_nm):
            raise InvalidValue("axis_form='uniform' but the axis is not lambda0 + k*dlambda")
        header["lambda_nm"] = {"lambda0_nm": lam0, "dlambda_nm": dl}
    else:
        header["lambda_nm"] = [float(v) for v in cube.wavelength_nm]
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_cube(cube: HyperspectralCube, path: str | Path) -> None:
    payload = np.ascontiguousarray(cube.data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(CUBE_MAGIC)
            fh.write(_cube_header(cube))
            fh.write(b"\0")
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc


def _parse_cube_bytes(raw: bytes) -> HyperspectralCube:
    if not raw.startswith(CUBE_MAGIC):
        raise BadMagic("file does not start with QMCCUBE1")
    end = raw.find(b"\0", len(CUBE_MAGIC))
    if end < 0:
        raise HeaderMismatch("cube header is not NUL-terminated")
    try:
        header = json.loads(raw[len(CUBE_MAGIC) : end].decode("utf-8"))
        nx, ny, nl = int(header["nx"]), int(header["ny"]), int(header["n_lambda"])
    except (ValueError, KeyError, TypeError) as exc:
        raise HeaderMismatch(f"malformed cube header: {exc}") from exc
    if nx <= 0 or ny <= 0 or nl <= 0:
        raise HeaderMismatch("cube sizes must be positive", nx=nx, ny=ny, n_lambda=nl)
    axis = header.get("lambda_nm")
    if isinstance(axis, dict):
        wl = _uniform_axis(float(axis["lambda0_nm"]), float(axis["dlambda_nm"]), nl)
        form = "uniform"
    else:
        wl = np.asarray(axis, dtype=np.float64)
        form = "list"
        if wl.size != nl:
            raise HeaderMismatch("lambda_nm length differs from n_lambda", n=wl.size, n_lambda=nl)
    payload = raw[end + 1 :]
    expected = nx * ny * nl * 4
    if len(payload) != expected:
        raise HeaderMismatch(
            "payload length disagrees with header", expected=expected, actual=len(payload)
        )
    if np.any(np.diff(wl) <= 0):
        raise NonMonotonicAxis("cube wavelength axis must be strictly increasing")
    data = np.frombuffer(payload, dtype="<f4").reshape(ny, nx, nl).astype(np.float32)
    origin = header.get("origin_um", [0.0, 0.0])
    return HyperspectralCube(
        wl, data, float(header.get("pixel_pitch_um", 1.0)), (origin[0], origin[1]), form
    )


def read_cube_csv(path: str | Path) -> HyperspectralCube:
    """Long-format cube: columns ``x_idx, y_idx, lambda_nm, intensity``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc
    if not rows:
        raise HeaderMismatch("long-format cube has no rows")
    try:
        xs = np.array([int(r["x_idx"]) for r in rows])
        ys = np.array([int(r["y_idx"]) for r in rows])
        lam = np.array([float(r["lambda_nm"]) for r in rows])
        val = np.array([float(r["intensity"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise HeaderMismatch(f"bad long-format cube row: {exc}") from exc
    wl = np.unique(lam)
    nx, ny = int(xs.max()) + 1, int(ys.max()) + 1
    if xs.min() < 0 or ys.min() < 0 or len(rows) != nx * ny * wl.size:
        raise HeaderMismatch("long-format cube is not a complete raster", rows=len(rows))
    data = np.zeros((ny, nx, wl.size), dtype=np.float32)
    seen = np.zeros(data.shape, dtype=bool)
    li = np.searchsorted(wl, lam)
    data[ys, xs, li] = val
    seen[ys, xs, li] = True
    if not seen.all():
        raise HeaderMismatch("long-format cube has duplicate or missing samples")
    return HyperspectralCube(wl, data)


def read_cube(path: str | Path) -> HyperspectralCube:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_cube_csv(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc
    return _parse_cube_bytes(raw)


# --------------------------------------------------------------------------- images


@dataclass(eq=False)
class GrayImage:
    """8-bit grayscale image, row-major with top-left origin."""

    pixels: np.ndarray
    scale_nm_per_px: float
    tilt_deg: float | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise InvalidValue("image must be a non-empty 2-D array")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255) or np.any(px != np.round(px)):
                raise UnsupportedFormat("pixels must be 8-bit integers")
            px = px.astype(np.uint8)
        self.pixels = px
        if not (math.isfinite(self.scale_nm_per_px) and self.scale_nm_per_px > 0):
            raise MissingScale("scale_nm_per_px must be a positive number")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def _read_pgm(raw: bytes) -> np.ndarray:
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnsupportedFormat("truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval > 255:
        raise UnsupportedFormat("only 8-bit PGM is supported", maxval=maxval)
    body = raw[pos : pos + width * height]
    if len(body) != width * height:
        raise UnsupportedFormat("PGM payload shorter than width*height")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.format != "PNG":
            raise UnsupportedFormat(f"not a PNG file ({im.format})")
        if im.mode != "L":
            raise UnsupportedFormat(f"PNG must be 8-bit grayscale, got mode {im.mode}")
        return np.array(im, dtype=np.uint8)


def _sidecar(path: Path) -> dict[str, Any]:
    for cand in (path.with_suffix(".meta.json"), Path(str(path) + ".meta.json")):
        if cand.exists():
            with open(cand, encoding="utf-8") as fh:
                return json.load(fh)
    return {}


def read_gray_image(
    path: str | Path, scale_nm_per_px: float | None = None, tilt_deg: float | None = None
) -> GrayImage:
    """Load a P5 PGM or 8-bit grayscale PNG.

    Scale and tilt come from the arguments when given, else from the sidecar
    ``<image>.meta.json`` (``{"scale_nm_per_px": .., "tilt_deg": ..}``).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc
    if raw[:2] == b"P5":
        pixels = _read_pgm(raw)
    elif raw[:8] == b"\x89PNG\r\n\x1a\n":
        pixels = _read_png(path)
    else:
        raise UnsupportedFormat("expected binary PGM (P5) or PNG", path=str(path))
    meta = _sidecar(path)
    scale = scale_nm_per_px if scale_nm_per_px is not None else meta.get("scale_nm_per_px")
    if scale is None:
        raise MissingScale("no pixel scale given and no sidecar metadata", path=str(path))
    tilt = tilt_deg if tilt_deg is not None else meta.get("tilt_deg")
    return GrayImage(pixels, float(scale), None if tilt is None else float(tilt))


def write_pgm(image: GrayImage | np.ndarray, path: str | Path, write_sidecar: bool = True) -> None:
    px = image.pixels if isinstance(image, GrayImage) else np.asarray(image, dtype=np.uint8)
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (px.shape[1], px.shape[0]))
            fh.write(np.ascontiguousarray(px, dtype=np.uint8).tobytes())
        if write_sidecar and isinstance(image, GrayImage):
            meta = {"scale_nm_per_px": image.scale_nm_per_px}
            if image.tilt_deg is not None:
                meta["tilt_deg"] = image.tilt_deg
            path.with_suffix(".meta.json").write_text(json.dumps(meta, sort_keys=True))
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc


# --------------------------------------------------------------------------- tables

_KINDS = ("integer", "real", "text")


def _infer_kind(values: Sequence[Any]) -> str:
    kinds = set()
    for v in values:
        if v is None:
            continue
        if isinstance(v, (bool, np.bool_)):
            kinds.add("integer")
        elif isinstance(v, (int, np.integer)):
            kinds.add("integer")
        elif isinstance(v, (float, np.floating)):
            kinds.add("real")
        else:
            kinds.add("text")
    if "text" in kinds:
        return "text"
    if "real" in kinds:
        return "real"
    return "integer" if kinds else "real"


def _coerce(value: Any, kind: str) -> Any:
    if value is None:
        return None
    if isinstance(value, (float, np.floating)) and math.isnan(value) and kind != "text":
        return None
    if kind == "integer":
        return int(value)
    if kind == "real":
        return float(value)
    return str(value)


@dataclass(eq=False)
class ResultTable:
    """Column-oriented table of integer, real or text columns; ``None`` is null."""

    columns: dict[str, list[Any]]
    kinds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise InvalidValue("all columns must have equal length", lengths=sorted(lengths))
        for name, values in self.columns.items():
            kind = self.kinds.get(name) or _infer_kind(values)
            if kind not in _KINDS:
                raise InvalidValue(f"unknown column kind {kind!r}")
            self.kinds[name] = kind
            self.columns[name] = [_coerce(v, kind) for v in values]

    @classmethod
    def from_rows(
        cls, rows: Iterable[dict[str, Any]], names: Sequence[str], kinds: dict[str, str] | None = None
    ) -> "ResultTable":
        if len(set(names)) != len(names):
            raise InvalidValue("column names must be unique")
        rows = list(rows)
        cols = {n: [r.get(n) for r in rows] for n in names}
        return cls(cols, dict(kinds or {}))

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def rows(self) -> list[dict[str, Any]]:
        names = self.names
        return [{n: self.columns[n][i] for n in names} for i in range(self.n_rows)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResultTable):
            return NotImplemented
        return self.names == other.names and all(
            self.columns[n] == other.columns[n] for n in self.names
        )


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        # repr is the shortest string that round-trips (at most 17 significant digits)
        return repr(value)
    return str(value)


def table_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.names)
    for i in range(table.n_rows):
        writer.writerow([_format_cell(table.columns[n][i]) for n in table.names])
    return buf.getvalue()


def table_to_json(table: ResultTable) -> str:
    return json.dumps(table.rows(), indent=1, allow_nan=False) + "\n"


def write_table(table: ResultTable, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    if fmt not in ("csv", "json"):
        raise UnsupportedFormat(f"table format must be csv or json, got {fmt!r}")
    text = table_to_csv(table) if fmt == "csv" else table_to_json(table)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path: str | Path) -> ResultTable:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc), path=str(path)) from exc
    if path.suffix.lower() == ".json":
        rows = json.loads(text)
        names = list(rows[0]) if rows else []
        return ResultTable.from_rows(rows, names)
    reader = csv.reader(io.StringIO(text))
    try:
        names = next(reader)
    except StopIteration:
        return ResultTable({})
    cols: dict[str, list[Any]] = {n: [] for n in names}
    for row in reader:
        for n, cell in zip(names, row):
            cols[n].append(_parse_cell(cell))
    return ResultTable(cols)


def read_spectrum_csv(path: str | Path):
    """Two-column spectrum CSV with header ``wavelength_nm,intensity``."""
    table = read_table(path)
    try:
        wl = [float(v) for v in table.columns["wavelength_nm"]]
        y = [float(v) for v in table.columns["intensity"]]
    except KeyError as exc:
        raise HeaderMismatch(f"spectrum CSV missing column {exc}") from exc
    return Spectrum(np.array(wl), np.array(y), {"source": str(path)})


def write_spectrum_csv(spectrum, path: str | Path) -> None:
    table = ResultTable(
        {
            "wavelength_nm": [float(v) for v in spectrum.wavelength_nm],
            "intensity": [float(v) for v in spectrum.intensity],
        }
    )
    write_table(table, path, "csv")
