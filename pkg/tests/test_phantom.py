import numpy as np
import pytest

from scsd.model import TensorCompartment, synth_signal
from scsd.phantom import GroundTruth, PhantomSpec, generate_phantom
from scsd.sphere import angular_separation


@pytest.fixture(scope="module")
def default_phantom():
    return generate_phantom(PhantomSpec(crossing_angle=60, p_iso_inside=0.25))


def test_default_dimensions(default_phantom):
    sig, truth = default_phantom
    assert sig.dims == (16, 16, 12)
    assert sig.K == 81
    assert sig.data.shape == (81, 16 * 16 * 12)
    assert sig.acquisition.b_value == 3000.0


def test_overlap_directions_sixty_degrees(default_phantom):
    _, truth = default_phantom
    both = np.flatnonzero(truth.fibre_count == 2)
    assert len(both) > 0
    for v in both:
        d = truth.directions_at(v)
        assert np.degrees(angular_separation(d[0], d[1])) == pytest.approx(60.0)


def test_truth_consistency(default_phantom):
    _, truth = default_phantom
    iso = np.exp(-3000 * 8e-4)
    for v in range(len(truth.fibre_count)):
        d = truth.directions_at(v)
        assert len(d) == truth.fibre_count[v]
        assert not np.isnan(d).any()
    out = ~truth.inside
    assert np.all(truth.fibre_count[out] == 0)
    assert np.allclose(truth.idm[out], iso)
    assert np.allclose(truth.idm[truth.inside], 0.25 * iso)
    assert np.array_equal(truth.inside, truth.fibre_count > 0)
    assert out.any() and truth.inside.any()


def test_inside_voxels_reproduce_synth():
    spec = PhantomSpec(crossing_angle=60, p_iso_inside=0.0)
    sig, truth = generate_phantom(spec)
    acq = spec.acquisition()
    single = np.flatnonzero(truth.fibre_count == 1)
    for v in single[::37]:
        comp = TensorCompartment(truth.directions_at(v)[0], 1.0, 1.7e-3, 3e-4)
        assert np.array_equal(sig.data[:, v], synth_signal([comp], 0.0, 8e-4, acq))
    for v in np.flatnonzero(truth.fibre_count == 2)[::23]:
        comps = [TensorCompartment(d, 0.5, 1.7e-3, 3e-4) for d in truth.directions_at(v)]
        assert np.allclose(sig.data[:, v], synth_signal(comps, 0.0, 8e-4, acq), rtol=1e-15)


def test_orthogonal_crossing():
    _, truth = generate_phantom(PhantomSpec(crossing_angle=90))
    v = np.flatnonzero(truth.fibre_count == 2)[0]
    d = truth.directions_at(v)
    assert abs(d[0] @ d[1]) < 1e-15


def test_bundle_geometry_membership():
    spec = PhantomSpec(crossing_angle=60)
    _, truth = generate_phantom(spec)
    # the exact voxel centre rule, checked independently per voxel
    nx, ny, nz = spec.dims
    c = np.array([(nx - 1) / 2, (ny - 1) / 2, (nz - 1) / 2])
    h = np.radians(30.0)
    axes = [np.array([np.sin(h), np.cos(h), 0]), np.array([-np.sin(h), np.cos(h), 0])]
    for idx in range(0, nx * ny * nz, 7):
        i, j, k = idx % nx, (idx // nx) % ny, idx // (nx * ny)
        p = np.array([i, j, k]) - c
        n = sum(np.linalg.norm(np.cross(p, a)) <= 4.0 for a in axes)
        assert truth.fibre_count[idx] == n


def test_noise_bounds_and_determinism():
    spec = PhantomSpec(snr=7.0, seed=3)
    a, _ = generate_phantom(spec)
    b, _ = generate_phantom(spec)
    assert np.array_equal(a.data, b.data)
    clean, _ = generate_phantom(PhantomSpec(snr=np.inf))
    sigma = clean.data.mean() / 7.0
    assert np.all(a.data > 0) and np.all(a.data <= 1 + 6 * sigma)
    c, _ = generate_phantom(PhantomSpec(snr=7.0, seed=4))
    assert not np.array_equal(a.data, c.data)


def test_noise_free_range(default_phantom):
    sig, _ = default_phantom
    assert np.all(sig.data > 0) and np.all(sig.data <= 1)


def test_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(crossing_angle=95)
    with pytest.raises(ValueError):
        PhantomSpec(dims=(0, 4, 4))
    with pytest.raises(ValueError):
        PhantomSpec(p_iso_inside=1.5)
    with pytest.raises(ValueError):
        PhantomSpec(snr=0)


def test_single_bundle_at_zero_angle():
    _, truth = generate_phantom(PhantomSpec(crossing_angle=0))
    assert truth.fibre_count.max() == 1


def test_clipped_large_radius():
    _, truth = generate_phantom(PhantomSpec(dims=(6, 6, 2), fibre_radius_vox=10))
    assert truth.inside.all()


def test_truth_round_trip(tmp_path, default_phantom):
    _, truth = default_phantom
    truth.save(tmp_path / "t.json", PhantomSpec())
    back = GroundTruth.load(tmp_path / "t.json")
    assert np.array_equal(back.fibre_count, truth.fibre_count)
    assert np.array_equal(back.inside, truth.inside)
    assert np.allclose(back.idm, truth.idm)
    assert np.array_equal(np.nan_to_num(back.directions), np.nan_to_num(truth.directions))
