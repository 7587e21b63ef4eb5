import numpy as np
import pytest
from scipy.optimize import brentq

from _sim import RADAR, SURVEY_CIRCLE, body_track, profiles_for, scene_with
from gpsar.geometry import CircleSpec, Pose, Transform
from gpsar.imaging import (
    GridSpec, ImageVolume, PeakError, backproject_plane, coherent_sum, focus_volume, half_power_width,
    psf_metrics,
)
from gpsar.propagation import round_trip_time
from gpsar.signal import ProfileStack, range_compress, sample_profile, synthesize_chirp


def small_grid(cx=0.0, cy=0.0, half=0.05, pitch=0.005, z_top=-0.05, z_bottom=-0.05, dz=0.005):
    return GridSpec.centered(cx, cy, half, half, pitch, z_top, z_bottom, dz)


def peak_xy(plane, grid):
    iy, ix = np.unravel_index(np.argmax(np.abs(plane)), plane.shape)
    return grid.x[ix], grid.y[iy]


@pytest.fixture(scope="module")
def buried_full_circle():
    """Full-circle pass over a single scatterer 50 mm deep."""
    scene = scene_with((0.0, 0.0, -0.05))
    grid = small_grid(half=0.04, z_top=-0.03, z_bottom=-0.07)
    return scene, grid, profiles_for(scene, grid, body_track())


def test_grid_plane_count_for_survey_depth_range():
    g = GridSpec(z_top=0.1, z_bottom=-0.2, dz=0.005)
    assert g.n_planes == 61
    assert g.z[0] == pytest.approx(0.1) and g.z[-1] == pytest.approx(-0.2)
    assert np.all(np.diff(g.z) < 0)
    assert g.plane_index(-0.05) == 30


@pytest.mark.parametrize("kw", [{"dx": 0}, {"dz": -1}, {"nx": 0}, {"z_top": -0.3}])
def test_grid_rejects_invalid(kw):
    with pytest.raises(ValueError):
        GridSpec(**kw)


def test_single_profile_pixel_reads_interpolated_sample():
    tx = Pose(0.0, Transform(translation=(7.75, 0.2, 3.75)))
    rx = Pose(0.0, Transform(translation=(7.75, -0.2, 3.75)))
    scene = scene_with((0.0, 0.0, 0.0))
    prof = range_compress(synthesize_chirp(RADAR, tx, rx, scene), 16)
    grid = GridSpec(0.0, 0.0, 0.005, 0.005, 1, 1, 0.0, 0.0, 0.005)
    p = backproject_plane([prof], grid, 0.0)[0, 0]
    dt = round_trip_time(tx.position, rx.position, np.zeros(3), 0.0, 8.0)
    assert abs(p) == pytest.approx(abs(sample_profile(prof, dt)), rel=1e-12)
    assert abs(p) == pytest.approx(np.abs(prof.bins).max(), rel=0.02)


def test_phase_is_zero_at_true_position():
    body = body_track(stride=60)
    scene = scene_with((0.02, -0.01, -0.08))
    grid = GridSpec(0.02, -0.01, 0.005, 0.005, 1, 1, -0.08, -0.08, 0.005)
    v = backproject_plane(profiles_for(scene, grid, body), grid, -0.08)[0, 0]
    assert abs(np.angle(v)) < 0.05


def test_identical_chirps_add_coherently():
    tx = Pose(0.0, Transform(translation=(3.0, 0.2, 3.0)))
    rx = Pose(0.0, Transform(translation=(3.0, -0.2, 3.0)))
    prof = range_compress(synthesize_chirp(RADAR, tx, rx, scene_with((0.01, 0.0, -0.03))), 16)
    grid = small_grid(half=0.02)
    one = backproject_plane([prof], grid, -0.03)
    five = backproject_plane([prof] * 5, grid, -0.03)
    np.testing.assert_allclose(five, 5 * one, rtol=1e-13)


def test_one_plane_volume_equals_backproject_plane():
    body = body_track(stride=40)
    scene = scene_with((0.0, 0.0, -0.05))
    grid = small_grid()
    stack = profiles_for(scene, grid, body)
    vol = focus_volume(stack, grid)
    assert vol.data.shape == (1, grid.ny, grid.nx)
    np.testing.assert_array_equal(vol.data[0], backproject_plane(stack, grid, -0.05))
    assert vol.n_chirps == len(body)


def test_full_circle_peak_at_target(buried_full_circle):
    _, grid, stack = buried_full_circle
    plane = backproject_plane(stack, grid, -0.05)
    x, y = peak_xy(plane, grid)
    assert abs(x) <= grid.dx and abs(y) <= grid.dy


def test_deep_target_argmax_plane():
    scene = scene_with((0.0, 0.0, -0.14))
    grid = GridSpec.centered(0, 0, 0.02, 0.02, 0.005, 0.1, -0.2, 0.005)
    vol = focus_volume(profiles_for(scene, grid, body_track(stride=4)), grid)
    assert vol.data.shape[0] == 61
    k = np.unravel_index(np.argmax(np.abs(vol.data)), vol.data.shape)[0]
    assert abs(grid.z[k] + 0.14) <= 0.010


def analytic_half_power_width(sigma):
    # root of the Gaussian at 1/sqrt(2), found numerically
    x = brentq(lambda t: np.exp(-t * t / (2 * sigma**2)) - 2**-0.5, 0, 10 * sigma)
    return 2 * x


@pytest.mark.parametrize("sx,sy,sz", [(0.01, 0.02, 0.015), (0.004, 0.004, 0.03)])
def test_gaussian_blob_widths(sx, sy, sz):
    grid = GridSpec.centered(0, 0, 0.15, 0.15, 0.001, 0.15, -0.15, 0.001)
    z, y, x = np.meshgrid(grid.z, grid.y, grid.x, indexing="ij")
    blob = np.exp(-(x**2 / (2 * sx**2) + y**2 / (2 * sy**2) + z**2 / (2 * sz**2)))
    m = psf_metrics(ImageVolume(grid, blob.astype(complex), 8.0), (150, 150, 150))
    for got, s in ((m.cross_range, sx), (m.ground_range, sy), (m.z, sz)):
        # linear interpolation on a 1 mm grid costs up to ~h^2/(8 sigma^2) relative
        tol = max(2e-3, 0.001**2 / (4 * s**2))
        assert got == pytest.approx(analytic_half_power_width(s), rel=tol)
        assert got == pytest.approx(2 * s * np.sqrt(np.log(2)), rel=tol)


def test_psf_rejects_flat_and_clipped_peaks():
    grid = GridSpec.centered(0, 0, 0.02, 0.02, 0.005, 0.0, 0.0)
    with pytest.raises(PeakError):
        psf_metrics(np.zeros((9, 9)), grid=grid)
    ramp = np.tile(np.arange(9.0), (9, 1))
    with pytest.raises(PeakError):
        psf_metrics(ramp, (4, 4), grid=grid)
    with pytest.raises(PeakError):
        half_power_width(np.ones(7), 1.0)


def test_backprojection_is_linear():
    body = body_track(stride=50)
    grid = small_grid(half=0.03)
    a = profiles_for(scene_with((0.01, 0, -0.05)), grid, body)
    b = profiles_for(scene_with((-0.02, 0.01, -0.05), amplitude=0.4), grid, body)
    both = profiles_for(scene_with((0.01, 0, -0.05), (-0.02, 0.01, -0.05)), grid, body)
    # rebuild the two-target stack from the same bins so only the algebra is tested
    combo = ProfileStack(2 * a.bins - 3j * b.bins, a.delay_per_bin, a.start_bin, a.tx, a.rx, a.times)
    lhs = backproject_plane(combo, grid, -0.05)
    rhs = 2 * backproject_plane(a, grid, -0.05) - 3j * backproject_plane(b, grid, -0.05)
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(lhs)
    # physical superposition of two scatterers
    assert both.start_bin == a.start_bin
    img_a = backproject_plane(a, grid, -0.05)
    img_b = backproject_plane(profiles_for(scene_with((-0.02, 0.01, -0.05)), grid, body), grid, -0.05)
    img = backproject_plane(both, grid, -0.05)
    assert np.linalg.norm(img - img_a - img_b) <= 1e-9 * np.linalg.norm(img)


def test_translation_moves_peak_by_same_offset():
    body_a = body_track(stride=30)
    shift = np.array([0.4, -0.25])
    circle_b = CircleSpec(center=(shift[0], shift[1], 0.0), radius=7.75, height=3.75)
    body_b = body_track(circle_b, stride=30)
    target = np.array([0.013, -0.007, -0.05])
    ga = small_grid(0.0, 0.0, half=0.03)
    gb = small_grid(shift[0], shift[1], half=0.03)
    pa = peak_xy(backproject_plane(profiles_for(scene_with(target), ga, body_a), ga, -0.05), ga)
    tb = target + [shift[0], shift[1], 0]
    pb = peak_xy(backproject_plane(profiles_for(scene_with(tb), gb, body_b), gb, -0.05), gb)
    np.testing.assert_allclose(np.subtract(pb, pa), shift, atol=0.005 + 1e-9)


def test_wrong_permittivity_lowers_peak():
    scene = scene_with((0.0, 0.0, -0.1))
    grid = GridSpec.centered(0, 0, 0.03, 0.03, 0.005, 0.0, -0.2, 0.005)
    stack = profiles_for(scene, grid, body_track(stride=6), er_window=16.0)
    peaks = {er: np.abs(focus_volume(stack, grid, er=er).data).max() for er in (4.0, 8.0, 16.0)}
    assert peaks[8.0] > peaks[4.0]
    assert peaks[8.0] > peaks[16.0]


def test_limited_persistence_target_drifts_with_focus_depth():
    # visible only from the +x quadrant: azimuths from -45 to +45 degrees
    vis = ((np.deg2rad(-45), np.deg2rad(45)),)
    scene = scene_with((0.0, 0.0, -0.1), visibility=vis)
    grid = GridSpec.centered(0, 0, 0.15, 0.05, 0.005, -0.07, -0.13, 0.01)
    vol = focus_volume(profiles_for(scene, grid, body_track(stride=3)), grid)
    xs = np.array([peak_xy(p, grid)[0] for p in vol.data])
    # the look direction is -x; too shallow a plane pushes the peak down-range
    assert np.all(np.diff(xs) > 0)
    assert xs[-1] - xs[0] >= 0.1
    assert abs(xs[grid.plane_index(-0.1)]) <= 0.005
    ys = np.array([peak_xy(p, grid)[1] for p in vol.data])
    assert np.all(np.abs(ys) <= 0.005)


def test_parallel_equals_serial_bit_for_bit():
    scene = scene_with((0.0, 0.0, -0.05), (0.02, -0.01, -0.08), noise_std=5.0)
    grid = GridSpec.centered(0, 0, 0.05, 0.05, 0.005, -0.03, -0.09, 0.01)
    stack = profiles_for(scene, grid, body_track(stride=25))
    serial = focus_volume(stack, grid, workers=1).data
    for w in (2, 3, 8):
        np.testing.assert_array_equal(focus_volume(stack, grid, workers=w).data, serial)


def test_errors():
    grid = small_grid()
    with pytest.raises(ValueError):
        backproject_plane([], grid, 0.0)
    stack = profiles_for(scene_with((0, 0, -0.05)), grid, body_track(stride=500))
    with pytest.raises(ValueError):
        focus_volume(stack, grid, er=0.5)
    with pytest.raises(ValueError):
        focus_volume(stack, grid, mode="sideways")
    with pytest.raises(ValueError):
        focus_volume(stack, grid, interface_z=10.0)


def test_coherent_sum_basics(rng):
    grid = GridSpec.centered(0, 0, 0.01, 0.01, 0.005, 0.0, -0.01, 0.005)
    data = rng.normal(size=(3, 5, 5)) + 1j * rng.normal(size=(3, 5, 5))
    v = ImageVolume(grid, data, 8.0, 0.0, ("a",), 10)
    one = coherent_sum([v])
    np.testing.assert_array_equal(one.data, data)
    six = coherent_sum([v] * 6)
    np.testing.assert_array_equal(six.data, 6 * data)
    assert six.n_chirps == 60 and six.aperture_ids == ("a",) * 6
    with pytest.raises(ValueError):
        coherent_sum([v, ImageVolume(GridSpec.centered(0, 0, 0.01, 0.01, 0.005, 0.0, -0.01, 0.005 / 2),
                                     np.zeros((5, 5, 5), complex), 8.0)])
    with pytest.raises(ValueError):
        coherent_sum([v, ImageVolume(grid, data, 4.0)])
    with pytest.raises(ValueError):
        coherent_sum([])


def two_height_volumes(target, er, z_half=0.4):
    scene = scene_with(target, er=er)
    grid = GridSpec.centered(0, 0, 0.03, 0.03, 0.005, target[2] + z_half, target[2] - z_half, 0.005)
    vols = []
    for h in (2.5, 5.0):
        body = body_track(CircleSpec(radius=7.75, height=h), stride=4)
        vols.append(focus_volume(profiles_for(scene, grid, body), grid, er=er, aperture_ids=(f"h{h}",)))
    return grid, vols


def test_two_heights_sharpen_depth_response_in_air():
    grid, vols = two_height_volumes((0.0, 0.0, 0.0), 1.0)
    centre = (grid.plane_index(0.0), 6, 6)
    widths = [psf_metrics(v, centre).z for v in vols]
    m = psf_metrics(coherent_sum(vols), centre)
    assert m.peak_amplitude > max(np.abs(v.data).max() for v in vols)
    assert m.z < min(widths)


def test_two_heights_buried_target_depth_width_is_bandwidth_limited():
    # below the interface both heights refract to nearly the same angle
    grid, vols = two_height_volumes((0.0, 0.0, -0.05), 8.0, z_half=0.2)
    centre = (grid.plane_index(-0.05), 6, 6)
    widths = [psf_metrics(v, centre).z for v in vols]
    m = psf_metrics(coherent_sum(vols), centre)
    assert m.peak_amplitude > max(np.abs(v.data).max() for v in vols)
    assert min(widths) * 0.98 <= m.z <= max(widths) * 1.02
