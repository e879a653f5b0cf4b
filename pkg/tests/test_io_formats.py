import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from qmc_metrology.errors import (
    BadMagic,
    HeaderMismatch,
    IoFailure,
    MissingScale,
    NonMonotonicAxis,
    UnsupportedFormat,
)
from qmc_metrology.io_formats import (
    CUBE_MAGIC,
    GrayImage,
    HyperspectralCube,
    ResultTable,
    read_cube,
    read_cube_csv,
    read_gray_image,
    read_table,
    table_to_csv,
    write_cube,
    write_pgm,
    write_table,
)
from qmc_metrology.sem.render import render_top_view
from qmc_metrology.spectral.cavity_map import ChipletGrid
from qmc_metrology.synthetic import planted_chiplet_cube, wavelength_axis


def _raw_cube(path, header, payload):
    path.write_bytes(CUBE_MAGIC + json.dumps(header).encode() + b"\0" + payload)


def test_minimal_cube(tmp_path):
    p = tmp_path / "c.qmc"
    hdr = {"nx": 1, "ny": 1, "n_lambda": 3, "lambda_nm": [619, 620, 621], "pixel_pitch_um": 1.0, "origin_um": [0, 0]}
    _raw_cube(p, hdr, struct.pack("<3f", 0, 1, 0))
    c = read_cube(p)
    assert (c.nx, c.ny, c.n_lambda) == (1, 1, 3)
    assert list(c.spectrum_at(0, 0).intensity) == [0.0, 1.0, 0.0]


def test_short_payload(tmp_path):
    p = tmp_path / "c.qmc"
    hdr = {"nx": 2, "ny": 1, "n_lambda": 3, "lambda_nm": [619, 620, 621], "pixel_pitch_um": 1.0, "origin_um": [0, 0]}
    _raw_cube(p, hdr, struct.pack("<5f", *range(5)))
    with pytest.raises(HeaderMismatch):
        read_cube(p)


def test_bad_magic_and_axis(tmp_path):
    p = tmp_path / "c.qmc"
    p.write_bytes(b"NOTACUBE{}\0")
    with pytest.raises(BadMagic):
        read_cube(p)
    hdr = {"nx": 1, "ny": 1, "n_lambda": 3, "lambda_nm": [619, 621, 620], "pixel_pitch_um": 1.0, "origin_um": [0, 0]}
    _raw_cube(p, hdr, struct.pack("<3f", 0, 1, 0))
    with pytest.raises(NonMonotonicAxis):
        read_cube(p)


def test_uniform_axis_header(tmp_path):
    p = tmp_path / "c.qmc"
    hdr = {"nx": 1, "ny": 1, "n_lambda": 4, "lambda_nm": {"lambda0_nm": 600.0, "dlambda_nm": 0.5},
           "pixel_pitch_um": 1.0, "origin_um": [0, 0]}
    _raw_cube(p, hdr, struct.pack("<4f", 0, 1, 2, 3))
    np.testing.assert_array_equal(read_cube(p).wavelength_nm, [600.0, 600.5, 601.0, 601.5])


def test_chiplet_cube_round_trip_bit_exact(tmp_path):
    grid = ChipletGrid(rows=8, cols=15, chiplet_w_px=5, chiplet_h_px=5, nanobeams=2)
    cube, _ = planted_chiplet_cube(grid, wavelength_axis(610, 660, 64), seed=3, empty_chiplets=0)
    a, b = tmp_path / "a.qmc", tmp_path / "b.qmc"
    write_cube(cube, a)
    back = read_cube(a)
    np.testing.assert_array_equal(back.data, cube.data)
    np.testing.assert_array_equal(back.wavelength_nm, cube.wavelength_nm)
    write_cube(back, b)
    assert a.read_bytes() == b.read_bytes()


@given(
    st.integers(1, 4), st.integers(1, 4), st.integers(2, 6),
    st.floats(0, 1e6, allow_nan=False, width=32),
)
def test_cube_round_trip_property(tmp_path_factory, nx, ny, nl, v):
    d = tmp_path_factory.mktemp("cube")
    data = np.full((ny, nx, nl), v, dtype=np.float32)
    data[0, 0, 0] = 0.0
    cube = HyperspectralCube(np.arange(nl, dtype=float) + 600.0, data)
    write_cube(cube, d / "c.qmc")
    back = read_cube(d / "c.qmc")
    assert back.data.tobytes() == cube.data.tobytes()


def test_long_csv_cube(tmp_path):
    p = tmp_path / "c.csv"
    rows = ["x_idx,y_idx,lambda_nm,intensity"]
    for y in range(2):
        for x in range(3):
            for k, wl in enumerate((619.0, 620.0)):
                rows.append(f"{x},{y},{wl},{x + 10 * y + k}")
    p.write_text("\n".join(rows) + "\n")
    c = read_cube_csv(p)
    assert (c.nx, c.ny, c.n_lambda) == (3, 2, 2)
    assert list(c.spectrum_at(2, 1).intensity) == [12.0, 13.0]


def test_pgm_minimal(tmp_path):
    p = tmp_path / "i.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0]))
    img = read_gray_image(p, scale_nm_per_px=2.0)
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.tolist() == [[0, 255], [255, 0]]


def test_missing_scale(tmp_path):
    p = tmp_path / "i.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(MissingScale):
        read_gray_image(p)


def test_sixteen_bit_png_rejected(tmp_path):
    p = tmp_path / "i.png"
    Image.fromarray(np.zeros((4, 4), dtype=np.uint16) + 700).save(p)
    with pytest.raises(UnsupportedFormat):
        read_gray_image(p, scale_nm_per_px=1.0)


def test_png_pixels_untouched(tmp_path):
    p = tmp_path / "i.png"
    arr = np.arange(64, dtype=np.uint8).reshape(8, 8) * 3
    Image.fromarray(arr).save(p)
    np.testing.assert_array_equal(read_gray_image(p, scale_nm_per_px=1.0).pixels, arr)


def test_render_loads_with_sidecar(tmp_path):
    img = render_top_view()
    write_pgm(img, tmp_path / "top.pgm")
    back = read_gray_image(tmp_path / "top.pgm")
    assert (back.width, back.height) == (img.width, img.height)
    assert back.scale_nm_per_px == 2.0
    np.testing.assert_array_equal(back.pixels, img.pixels)


def test_table_csv_examples(tmp_path):
    assert table_to_csv(ResultTable.from_rows([], ["id", "lambda"])) == "id,lambda\n"
    assert table_to_csv(ResultTable.from_rows([{"id": 1, "lambda": 620.0}], ["id", "lambda"])) == "id,lambda\n1,620.0\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_thousand_row_round_trip(tmp_path, fmt):
    rng = np.random.default_rng(1)
    rows = [{"id": i, "lam": float(v), "tag": f"c{i}", "opt": None if i % 7 == 0 else float(v) / 3}
            for i, v in enumerate(rng.normal(620, 8, 1000))]
    t = ResultTable.from_rows(rows, ["id", "lam", "tag", "opt"])
    write_table(t, tmp_path / f"t.{fmt}")
    assert read_table(tmp_path / f"t.{fmt}") == t


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=30))
def test_reals_round_trip_exactly(tmp_path_factory, vals):
    d = tmp_path_factory.mktemp("t")
    t = ResultTable({"v": vals})
    write_table(t, d / "t.csv")
    assert read_table(d / "t.csv").columns["v"] == [float(v) for v in vals]


def test_write_failure(tmp_path):
    with pytest.raises(IoFailure):
        write_table(ResultTable({"a": [1]}), tmp_path / "missing" / "t.csv")
    with pytest.raises(UnsupportedFormat):
        write_table(ResultTable({"a": [1]}), tmp_path / "t.xlsx")


def test_gray_image_validation():
    from qmc_metrology.errors import InvalidValue

    with pytest.raises((InvalidValue, MissingScale)):
        GrayImage(np.zeros((2, 2), dtype=np.uint8), 0.0)
