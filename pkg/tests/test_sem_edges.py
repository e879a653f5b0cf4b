import numpy as np
import pytest

from qmc_metrology.errors import ImageTooSmall, LowCoherence
from qmc_metrology.io_formats import GrayImage
from qmc_metrology.sem.edges import estimate_beam_axis, preprocess
from qmc_metrology.sem.render import BeamGeometry, RenderConfig, render_noise, render_top_view, render_uniform
from sem_fixtures import vertical_step


def test_uniform_image_has_no_edges():
    em = preprocess(render_uniform())
    assert not em.edges.any()
    assert em.edges.shape == (448, 1152)


def test_vertical_step_localised():
    em = preprocess(vertical_step(column=32))
    ys, xs = np.nonzero(em.edges)
    assert xs.size > 0
    # true boundary lies between columns 31 and 32
    assert np.all(np.abs(xs - 31.5) <= 1.0)


def test_image_too_small():
    with pytest.raises(ImageTooSmall):
        preprocess(GrayImage(np.zeros((31, 64), np.uint8), 2.0))


@pytest.mark.parametrize("holes", [False, True])
def test_render_boundary_coverage(holes):
    geom = BeamGeometry()
    img = render_top_view(geom, holes=holes)
    em = preprocess(img)
    h, w = em.edges.shape
    cy = (h - 1) / 2.0
    cols = np.arange(8, w - 8)
    for half_nm in (geom.W_bottom_nm / 2, geom.W_top_nm / 2):
        for sign in (-1, 1):
            yt = cy + sign * half_nm / img.scale_nm_per_px
            rows = np.arange(int(np.floor(yt - 1)), int(np.ceil(yt + 1)) + 1)
            rows = rows[np.abs(rows - yt) <= 1.0]
            covered = em.edges[rows][:, cols].any(axis=0)
            assert covered.mean() >= 0.95


def test_axis_horizontal_beam(top_render_plain):
    ax = estimate_beam_axis(top_render_plain)
    assert abs(ax.angle_deg) < 0.5
    assert ax.coherence > 0.9


@pytest.mark.parametrize("angle", [10.0, -7.0])
def test_axis_rotated_beam(angle):
    ax = estimate_beam_axis(render_top_view(angle_deg=angle))
    assert abs(ax.angle_deg - angle) < 0.5


def test_axis_range_normalised():
    ax = estimate_beam_axis(render_top_view(angle_deg=90.0, cfg=RenderConfig(shape=(1152, 1152))))
    assert -90.0 < ax.angle_deg <= 90.0
    assert abs(abs(ax.angle_deg) - 90.0) < 0.5


def test_isotropic_noise_is_low_coherence():
    with pytest.raises(LowCoherence):
        estimate_beam_axis(render_noise())
