# Standard Library
import math

# Third Party
import pytest

# Scientific
import numpy as np

# Project
from vvb_learn.errors import DomainError, ShapeMismatchError
from vvb_learn.optics import (
    GridSpec,
    JonesField,
    StokesImage,
    VVBState,
    lg_amplitude,
    ppm_bytes,
    render,
    stokes,
    synthesize,
    to_rgb,
)


def _uniform(grid, e_l, e_r):
    ones = np.ones(grid.shape)
    return JonesField(grid, e_l * ones, e_r * ones)


def test_grid_validation():
    with pytest.raises(DomainError):
        GridSpec(resolution=4)
    with pytest.raises(DomainError):
        GridSpec(half_extent=0)
    with pytest.raises(DomainError):
        GridSpec(waist=-1)


def test_grid_coordinates_start_at_negative_y():
    grid = GridSpec(resolution=8, half_extent=4.0)
    x, y = grid.coordinates()

    assert y[0, 0] == pytest.approx(-3.5)
    assert y[-1, 0] == pytest.approx(3.5)
    assert x[0, 0] == pytest.approx(-3.5)
    assert x[0, -1] == pytest.approx(3.5)


def test_state_validation():
    with pytest.raises(DomainError):
        VVBState(1, 1, 0.0)
    with pytest.raises(DomainError):
        VVBState(-1, 1, -0.1)
    with pytest.raises(DomainError):
        VVBState(-1, 1, math.pi + 0.1)

    assert VVBState(-1, 1, 1.0, -math.pi / 2).phi == pytest.approx(
        3 * math.pi / 2
    )


def test_lg_amplitude_values():
    assert lg_amplitude(1, 0.0, 0.7, 1.0) == 0
    assert lg_amplitude(0, 0.0, 0.0, 1.0) == pytest.approx(1.0)

    value = lg_amplitude(2, 1.0, math.pi / 2, 1.0)
    assert abs(value) == pytest.approx(2 * math.exp(-1))
    assert value.real == pytest.approx(-2 * math.exp(-1))
    assert value.imag == pytest.approx(0.0, abs=1e-12)


def test_lg_amplitude_radial_node():
    # L_1^1(2 r^2 / w^2) vanishes at r = w.
    assert lg_amplitude(1, 1.0, 0.3, 1.0, p=1) == pytest.approx(0, abs=1e-12)

    with pytest.raises(DomainError):
        lg_amplitude(1, 1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        lg_amplitude(1, 1.0, 0.0, 1.0, p=2)


def test_lg_amplitude_magnitude_ignores_azimuth():
    r = np.linspace(0, 3, 7)
    a = lg_amplitude(3, r, 0.0, 1.0)
    b = lg_amplitude(3, r, 2.1, 1.0)

    np.testing.assert_allclose(np.abs(a), np.abs(b), rtol=1e-14)


@pytest.mark.parametrize(
    'state',
    [
        VVBState(-1, 1, math.pi / 2, 0.0),
        VVBState(-5, 3, 0.4, 2.0),
        VVBState(1, 5, 0.0),
        VVBState(-3, 1, math.pi),
    ],
)
def test_render_has_unit_power(state):
    field = render(state, GridSpec(resolution=64))

    assert field.power() == pytest.approx(1.0, abs=1e-9)


def test_render_poles():
    grid = GridSpec(resolution=32)

    north = render(VVBState(-1, 1, 0.0), grid)
    assert not np.any(north.e_r)

    south = render(VVBState(-1, 1, math.pi), grid)
    assert not np.any(south.e_l)


def test_stokes_of_uniform_fields():
    grid = GridSpec(resolution=8)

    horizontal = stokes(_uniform(grid, 1 / math.sqrt(2), 1 / math.sqrt(2)))
    np.testing.assert_allclose(horizontal.s1, 1.0, atol=1e-12)
    np.testing.assert_allclose(horizontal.s2, 0.0, atol=1e-12)
    np.testing.assert_allclose(horizontal.s3, 0.0, atol=1e-12)

    left = stokes(_uniform(grid, 1.0, 0.0))
    np.testing.assert_allclose(left.s3, 1.0, atol=1e-12)
    np.testing.assert_allclose(left.s1, 0.0, atol=1e-12)


@pytest.mark.parametrize(
    'state',
    [VVBState(-1, 1, math.pi / 2, 0.0), VVBState(-5, 3, 1.1, 4.0)],
)
def test_rendered_light_is_fully_polarized(state):
    img = stokes(render(state, GridSpec(resolution=64)))
    lit = img.lit()

    assert lit.any()
    np.testing.assert_allclose(img.norm_squared()[lit], 1.0, atol=1e-6)
    assert not np.any(img.norm_squared()[~lit])
    assert img.intensity.max() == pytest.approx(1.0)


def test_stokes_is_scale_invariant():
    field = render(VVBState(-3, 5, 1.0, 0.5), GridSpec(resolution=32))
    a = stokes(field)
    b = stokes(field.scaled(3.7))

    for name in ('s1', 's2', 's3'):
        np.testing.assert_allclose(
            getattr(a, name), getattr(b, name), atol=1e-12
        )


@pytest.mark.parametrize('phi', [0.1, 0.3, 0.7, 1.25, math.pi / 3, 5.9])
def test_full_turn_of_phi_is_bit_exact(phi):
    grid = GridSpec(resolution=32)
    a = VVBState(-1, 1, math.pi / 3, phi)
    b = VVBState(-1, 1, math.pi / 3, phi + 2 * math.pi)

    assert a.phi == b.phi
    assert np.array_equal(
        stokes(render(a, grid)).planes(), stokes(render(b, grid)).planes()
    )


def test_intensity_isotropy_under_theta_swap():
    grid = GridSpec(resolution=32)
    a = stokes(render(VVBState(-3, 3, 0.6, 0.2), grid))
    b = stokes(render(VVBState(-3, 3, math.pi - 0.6, 0.2), grid))

    np.testing.assert_allclose(a.intensity, b.intensity, atol=1e-6)


def test_impurity_adds_radial_node():
    grid = GridSpec(resolution=128, half_extent=4.0)
    state = VVBState(1, 3, 0.0)
    x, y = grid.coordinates()
    row = int(np.argmin(np.abs(y[:, 0] - 0.03125)))
    near = int(np.argmin(np.abs(x[row] - 1.6)))
    far = int(np.argmin(np.abs(x[row] - 2.0)))
    az = np.arctan2(y[row], x[row])

    def radial(impurity):
        field = synthesize(state, grid, impurity=impurity)
        return (field.e_l[row] * np.exp(-1j * az)).real

    pure = radial(0.0)
    assert pure[near] > 0
    assert pure[far] > 0

    mixed = radial(0.3)
    assert mixed[near] > 0
    assert mixed[far] < 0


def test_jones_field_shape_check():
    grid = GridSpec(resolution=8)

    with pytest.raises(ShapeMismatchError):
        JonesField(grid, np.zeros((8, 9)), np.zeros((8, 8)))
    with pytest.raises(DomainError):
        JonesField(grid, np.full((8, 8), np.nan), np.zeros((8, 8)))


def _single_pixel(s1, s2, s3):
    plane = np.ones((8, 8))
    return StokesImage(s1 * plane, s2 * plane, s3 * plane, plane)


def test_to_rgb_endpoints():
    assert to_rgb(_single_pixel(0, 0, 0)).channels[0, 0].tolist() == [
        128,
        128,
        128,
    ]
    assert to_rgb(_single_pixel(1, -1, 0)).channels[0, 0].tolist() == [
        255,
        0,
        128,
    ]
    assert to_rgb(_single_pixel(-1, -1, -1)).channels[0, 0].tolist() == [
        0,
        0,
        0,
    ]


def test_dark_pixels_are_grey():
    img = stokes(render(VVBState(-1, 1, math.pi / 2), GridSpec(64)))
    rgb = to_rgb(img)
    dark = ~img.lit()

    assert dark.any()
    assert np.all(rgb.channels[dark] == 128)


def test_ppm_puts_positive_y_on_top():
    s1 = np.zeros((8, 8))
    s1[-1] = 1.0
    zeros = np.zeros((8, 8))
    rgb = to_rgb(StokesImage(s1, zeros, zeros, np.ones((8, 8))))
    data = ppm_bytes(rgb)

    header = b'P6\n8 8\n255\n'
    assert data.startswith(header)
    assert len(data) == len(header) + 8 * 8 * 3
    assert data[len(header)] == 255
    assert data[-3] == 128
