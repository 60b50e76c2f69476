import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdepretrain.augment import (
    AugmentationSpec,
    DatasetExpander,
    TrajectoryAugmenter,
    apply_noise,
    apply_scale,
    apply_shift,
    expand_dataset,
)
from pdepretrain.datagen import GridSpec, PdeCoefficients, PdeDataset, sample_sine_ic
from pdepretrain.datagen.solvers import discrete_residual, solve_advection, solve_burgers, solve_heat

G = GridSpec()


def sine_traj(seed=0, pde="heat"):
    ic, _ = sample_sine_ic(np.random.default_rng(seed), G)
    if pde == "heat":
        return solve_heat(ic, PdeCoefficients("heat", nu=1e-2), G)
    return solve_burgers(ic, PdeCoefficients("burgers", nu=1e-2, c_x=0.8, c_y=0.7), G)


def small_dataset(n, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n, 4, 8, 8)).astype(np.float32)
    coeffs = np.tile([1e-2, np.nan, np.nan, np.nan], (n, 1))
    return PdeDataset(u, coeffs, ["heat"] * n, GridSpec(n_t=4, n_x=8, n_y=8))


def test_spec_validation():
    with pytest.raises(ValueError):
        AugmentationSpec(noise_variance=-1)
    with pytest.raises(ValueError):
        AugmentationSpec(apply_probability=1.5)
    with pytest.raises(ValueError):
        AugmentationSpec(scale_range=(1.0, 0.0))
    with pytest.raises(ValueError):
        AugmentationSpec(kind="rotate")


def test_zero_noise_identity():
    tr = sine_traj()
    out = apply_noise(tr, AugmentationSpec("noise", noise_variance=0.0), 1)
    assert out.u.tobytes() == tr.u.tobytes()


def test_noise_magnitude_and_independence():
    tr = sine_traj()
    out = apply_noise(tr, AugmentationSpec("noise"), np.random.default_rng(0))
    d = out.u - tr.u
    assert np.max(np.abs(d)) <= 6e-7
    # frames get independent draws
    a, b = d[3].ravel(), d[4].ravel()
    big = np.concatenate([d[k].ravel() for k in range(0, 20, 2)])
    big2 = np.concatenate([d[k].ravel() for k in range(1, 21, 2)])
    assert abs(np.corrcoef(big, big2)[0, 1]) < 0.05
    assert not np.allclose(a, b)
    assert out.coeffs == tr.coeffs and out.meta["augmented"] == "noise"


def test_shift_full_period_identity():
    tr = sine_traj()
    out = apply_shift(tr, AugmentationSpec("shift"), None, delta=(2.0, 0.0))
    assert np.max(np.abs(out.u - tr.u)) <= 1e-12


def test_shift_sin_half_period():
    X, _ = G.mesh()
    u = np.broadcast_to(np.sin(np.pi * X), (G.n_t, G.n_x, G.n_y)).copy()
    tr = sine_traj().replace_u(u)
    out = apply_shift(tr, AugmentationSpec("shift"), None, delta=(1.0, 0.0))
    assert np.max(np.abs(out.u + u)) <= 1e-10


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
@settings(max_examples=30, deadline=None)
def test_shift_preserves_norm_and_commutes_with_advection(sx, sy):
    ic, _ = sample_sine_ic(np.random.default_rng(3), G)
    c = PdeCoefficients("advection", c_x=1.3, c_y=0.4)
    tr = solve_advection(ic, c, G)
    shifted = apply_shift(tr, AugmentationSpec("shift"), None, delta=(sx, sy))
    norms = np.linalg.norm(tr.u, axis=(1, 2))
    assert np.max(np.abs(np.linalg.norm(shifted.u, axis=(1, 2)) - norms)) <= 1e-10
    ic_shift = apply_shift(tr, AugmentationSpec("shift"), None, delta=(sx, sy)).u[0]
    solved = solve_advection(ic_shift, c, G)
    assert np.max(np.abs(solved.u - shifted.u)) <= 1e-10


def test_shift_single_draw_per_trajectory():
    tr = sine_traj()
    out = apply_shift(tr, AugmentationSpec("shift"), np.random.default_rng(4))
    sx, sy = out.meta["shift"]
    assert -0.5 <= sx <= 0.5 and -0.5 <= sy <= 0.5
    ref = apply_shift(tr, AugmentationSpec("shift"), None, delta=(sx, sy))
    np.testing.assert_array_equal(out.u, ref.u)


def test_scale_identity_and_single_draw():
    tr = sine_traj()
    assert np.array_equal(apply_scale(tr, AugmentationSpec("scale"), None, factor=1.0).u, tr.u)
    out = apply_scale(tr, AugmentationSpec("scale"), np.random.default_rng(2))
    s = out.meta["scale"]
    assert -0.5 <= s <= 0.5
    np.testing.assert_allclose(out.u, s * tr.u)


def test_scale_preserves_heat_but_not_burgers():
    heat = sine_traj(pde="heat")
    scaled = apply_scale(heat, AugmentationSpec("scale"), None, factor=0.5)
    assert discrete_residual(heat) < 1e-12
    assert discrete_residual(scaled) < 1e-12
    burg = sine_traj(pde="burgers")
    assert discrete_residual(burg) < 1e-12
    assert discrete_residual(apply_scale(burg, AugmentationSpec("scale"), None, factor=0.5)) > 1e-6


def test_small_scale_logged(caplog):
    spec = AugmentationSpec("scale", scale_range=(1e-4, 2e-4))
    with caplog.at_level("WARNING"):
        apply_scale(sine_traj(), spec, np.random.default_rng(0))
    assert "close to zero" in caplog.text


def test_expand_doubles():
    ds = small_dataset(500)
    out = expand_dataset(ds, AugmentationSpec("noise"), np.random.default_rng(0))
    assert len(out) == 1000
    np.testing.assert_array_equal(out.u[:500], ds.u)


def test_expand_probability_zero_is_duplicate():
    ds = small_dataset(50)
    out = expand_dataset(ds, AugmentationSpec("scale", apply_probability=0.0), 0)
    np.testing.assert_array_equal(out.u[50:], ds.u)
    assert not out.augmented.any()


def test_expand_rejects_none():
    with pytest.raises(ValueError):
        expand_dataset(small_dataset(4), AugmentationSpec("none"), 0)


def test_expand_binomial_fraction():
    ds = small_dataset(10_000)
    out = expand_dataset(ds, AugmentationSpec("scale"), np.random.default_rng(7))
    frac = out.augmented[10_000:].mean()
    assert 0.48 <= frac <= 0.52
    changed = np.any(out.u[10_000:] != ds.u, axis=(1, 2, 3))
    np.testing.assert_array_equal(changed, out.augmented[10_000:])


@pytest.mark.parametrize("kind", ["noise", "shift", "scale"])
def test_shapes_and_metadata_preserved(kind):
    ds = small_dataset(20)
    out = expand_dataset(ds, AugmentationSpec(kind), 3)
    assert out.u.shape == (40,) + ds.u.shape[1:] and out.u.dtype == ds.u.dtype
    np.testing.assert_array_equal(out.coeffs[20:], ds.coeffs)
    assert list(out.pde) == list(ds.pde) * 2


def test_sklearn_wrappers():
    from sklearn.base import clone
    aug = TrajectoryAugmenter(kind="scale", random_state=0)
    assert clone(aug).get_params()["kind"] == "scale"
    X = small_dataset(6).u
    a = aug.fit_transform(X)
    b = clone(aug).fit_transform(X)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        aug.fit(X[0])
    exp = DatasetExpander(kind="shift", random_state=1)
    assert len(exp.fit_transform(small_dataset(6))) == 12
