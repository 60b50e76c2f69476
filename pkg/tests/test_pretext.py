import itertools
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from pdepretrain.datagen import GridSpec, PdeCoefficients
from pdepretrain.datagen.types import Trajectory
from pdepretrain.exceptions import ShapeError
from pdepretrain.pretext import (
    PatchSpec,
    apply_mask_token,
    build_binary,
    build_coefficient,
    build_derivative,
    build_jigsaw,
    build_masked,
    build_sort,
    decode_sort,
    derivative_fields,
    euler_update,
    gcl_loss,
    hamming_distance,
    jigsaw_bank,
    lexicographic_permutations,
    picl_loss,
    picl_theta,
    psi_matrix,
    unshuffle_patches,
)
from pdepretrain.pretext.builders import from_patches, to_patches

G = GridSpec()


def rand_u(seed=0, shape=(32, 32, 32)):
    return np.random.default_rng(seed).standard_normal(shape).astype(np.float32)


# -- permutations ----------------------------------------------------------------

def test_hamming_examples():
    assert hamming_distance(range(8)) == 0
    assert hamming_distance([3, 2, 1, 0]) == 4
    assert hamming_distance([1, 0, 2, 3, 4, 5, 6, 7]) == 2


def test_pool_size_and_full_s4():
    assert len(lexicographic_permutations(8)) == 40320
    assert len(jigsaw_bank(4, 24)) == 24
    assert {tuple(p) for p in jigsaw_bank(4, 24)} == set(itertools.permutations(range(4)))


def test_bank_matches_brute_force():
    # independent construction: filter derangements in lexicographic order
    derangements = [p for p in itertools.permutations(range(8)) if all(p[i] != i for i in range(8))]
    assert len(derangements) == 14833
    bank = jigsaw_bank(8, 1000)
    assert bank.shape == (1000, 8)
    np.testing.assert_array_equal(bank, np.array(derangements[:1000]))
    np.testing.assert_array_equal(bank, jigsaw_bank(8, 1000))


def test_bank_rejects_large_k():
    with pytest.raises(ValueError):
        jigsaw_bank(4, 25)


def test_s4_enumeration_lexicographic():
    perms = lexicographic_permutations(4)
    assert len(perms) == 24 and perms[0] == (0, 1, 2, 3) and list(perms) == sorted(perms)


# -- patches -----------------------------------------------------------------------

@given(st.sampled_from([(8, 32, 32), (16, 16, 16), (8, 8, 8), (4, 32, 16)]))
@settings(max_examples=10, deadline=None)
def test_patch_roundtrip(dims):
    u = rand_u(1, (2, 32, 32, 32))
    spec = PatchSpec(*dims)
    np.testing.assert_array_equal(from_patches(to_patches(u, spec), spec, u.shape), u)
    t = torch.from_numpy(u)
    assert torch.equal(from_patches(to_patches(t, spec), spec, t.shape), t)


def test_patch_indivisible_rejected():
    with pytest.raises(ShapeError):
        PatchSpec(5, 32, 32).counts((32, 32, 32))


def test_jigsaw_partition():
    spec = PatchSpec.jigsaw((32, 32, 32))
    assert (spec.t_patch, spec.x_patch, spec.y_patch) == (16, 16, 16)
    assert spec.counts((32, 32, 32)) == (2, 2, 2)


# -- builders ------------------------------------------------------------------------

def test_binary_labels():
    u = rand_u(2, (200, 32, 4, 4))
    b = build_binary(u, rng=0)
    for i in range(len(u)):
        if b.labels[i] == 1:
            assert np.array_equal(b.inputs[i], u[i])
        else:
            assert hamming_distance(b.perms[i]) >= 2
            assert not np.array_equal(b.inputs[i], u[i])


def test_binary_balance():
    b = build_binary(np.zeros((10_000, 32, 1, 1), np.float32), rng=np.random.default_rng(5))
    assert 0.48 <= b.labels.mean() <= 0.52


@pytest.mark.parametrize("axis", ["time", "space_x", "space_y"])
def test_sort_roundtrip(axis):
    u = rand_u(3, (30, 32, 32, 32))
    b = build_sort(u, axis=axis, rng=1)
    assert b.labels.min() >= 0 and b.labels.max() < 24
    back = decode_sort(b.inputs, b.labels, axis=axis)
    assert back.tobytes() == u.tobytes()


def test_sort_identity_label():
    u = rand_u(4)
    rng = np.random.default_rng(0)
    for _ in range(200):
        b = build_sort(u, rng=rng)
        if b.labels == 0:
            assert np.array_equal(b.inputs, u)
            return
    pytest.fail("identity never drawn")


def test_jigsaw_roundtrip_and_range():
    u = rand_u(5, (20, 32, 32, 32))
    bank = jigsaw_bank()
    b = build_jigsaw(u, bank=bank, rng=2)
    assert b.labels.min() >= 0 and b.labels.max() < 1000
    np.testing.assert_array_equal(b.perms, bank[b.labels])
    back = unshuffle_patches(b.inputs, b.patch_spec, b.perms)
    assert back.tobytes() == u.tobytes()


@pytest.mark.parametrize("pde,kw,expected", [
    ("heat", {"nu": 0.01}, (0.01, 0, 0)),
    ("burgers", {"nu": 0.01, "c_x": 0.7, "c_y": 0.9}, (0.01, 0.7, 0.9)),
    ("advection", {"c_x": 1.2, "c_y": 2.0}, (0, 1.2, 2.0)),
])
def test_coefficient_labels(pde, kw, expected):
    tr = Trajectory(np.zeros((32, 32, 32)), PdeCoefficients(pde, **kw), G)
    b = build_coefficient(tr)
    np.testing.assert_allclose(b.labels, expected, rtol=1e-6)


def test_derivative_analytic():
    X, Y = G.mesh()
    u = np.broadcast_to(np.sin(np.pi * X), (32, 32, 32)).copy()
    d = build_derivative(u, G, start=4).labels
    assert d.shape == (5, 8, 32, 32)
    ux = np.pi * np.cos(np.pi * X)
    uxx = -np.pi ** 2 * np.sin(np.pi * X)
    assert np.max(np.abs(d[0] - ux)) / np.max(np.abs(ux)) <= 1e-2
    assert np.max(np.abs(d[2] - uxx)) / np.max(np.abs(uxx)) <= 2e-2
    assert np.max(np.abs(d[1])) < 1e-5 and np.max(np.abs(d[4])) < 1e-5


def test_derivative_constant_and_time():
    d = derivative_fields(np.full((32, 32, 32), 3.0), G)
    assert np.all(d == 0)
    # u = t^2 is captured exactly by second-order stencils, boundaries included
    t = G.times
    u = np.broadcast_to((t ** 2)[:, None, None], (32, 8, 8))
    ut = derivative_fields(u, GridSpec(n_x=8, n_y=8))[4]
    np.testing.assert_allclose(ut[:, 0, 0], 2 * t, atol=1e-10)


def test_derivative_second_order_convergence():
    errs = []
    for n in (32, 64):
        g = GridSpec(n_x=n, n_y=n)
        X, Y = g.mesh()
        u = np.broadcast_to(np.sin(np.pi * X + 2 * np.pi * Y), (32, n, n))
        d = derivative_fields(u, g)
        errs.append(np.max(np.abs(d[0] - np.pi * np.cos(np.pi * X + 2 * np.pi * Y))))
    assert 3.8 < errs[0] / errs[1] < 4.2


def test_masked_counts_and_positions():
    u = rand_u(6, (3, 32, 32, 32))
    token = np.full((8, 8, 8), 7.5, np.float32)
    b = build_masked(u, rng=0, mask_token=token)
    assert b.mask.shape == (3, 64) and np.all(b.mask.sum(1) == 48)
    spec = b.patch_spec
    pin, pu = to_patches(b.inputs, spec), to_patches(u, spec)
    assert np.all(pin[b.mask] == 7.5)
    np.testing.assert_array_equal(pin[~b.mask], pu[~b.mask])
    np.testing.assert_array_equal(b.labels, u)
    # a perfect reconstruction has zero loss on the unmasked entries
    assert np.sum((pu[~b.mask] - pin[~b.mask]) ** 2) == 0


def test_masked_zero_ratio_identity():
    u = rand_u(7)
    b = build_masked(u, ratio=0.0, rng=0)
    assert np.array_equal(b.inputs, u) and b.mask.sum() == 0


def test_mask_token_torch_gradient():
    u = torch.randn(2, 32, 32, 32)
    spec = PatchSpec.masked(u.shape)
    mask = np.zeros((2, 64), bool)
    mask[:, :48] = True
    token = torch.zeros(8, 8, 8, requires_grad=True)
    out = apply_mask_token(u, mask, token, spec)
    out.sum().backward()
    assert token.grad is not None and float(token.grad.sum()) == 2 * 48 * 512


# -- PICL ----------------------------------------------------------------------------

def test_theta_layout():
    rows = np.array([[0.01, 0.6, 0.8, np.nan], [0.02, np.nan, np.nan, np.nan], [np.nan, 3.0, 4.0, np.nan]])
    th = picl_theta(rows, ["burgers", "heat", "advection"])
    np.testing.assert_allclose(th, [[1.0, 0.01, 0], [0, 0.02, 0], [0, 0, 5.0]])


def test_psi_properties():
    th = np.random.default_rng(0).uniform(0, 1, (6, 3))
    psi = psi_matrix(th)
    assert torch.allclose(psi, psi.T)
    assert torch.allclose(psi.diagonal(), torch.ones(6, dtype=psi.dtype))
    assert float(psi.min()) >= 0 and float(psi.max()) <= 1 + 1e-12
    assert float(psi_matrix([[0, 0, 0], [0, 0, 0]])[0, 1]) == 1.0


def test_gcl_attraction_and_repulsion():
    d = torch.tensor([[0.0, 0.3], [0.3, 0.0]], dtype=torch.float64)
    same = psi_matrix([[1, 1, 0], [1, 1, 0]])
    assert float(gcl_loss(d, same, 1.0)) == pytest.approx(0.3 ** 2 / 2)
    orth = psi_matrix([[1, 0, 0], [0, 1, 0]])
    assert float(gcl_loss(d, orth, 1.0)) == pytest.approx((1 - 0.3) ** 2 / 2)


def test_picl_hand_computed_three_samples():
    u = torch.zeros(3, 32, 8, 8, dtype=torch.float64)
    rows = np.array([[np.nan, 1.0, 0.0, np.nan], [0.01, np.nan, np.nan, np.nan], [0.01, 0.6, 0.8, np.nan]])
    theta = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
    g = GridSpec(n_x=8, n_y=8)
    loss = picl_loss(lambda x: x, u, rows, ["advection", "heat", "burgers"], g, tau=1.0, theta=theta)
    expected = (1.0 + 2 * (1 - 1 / math.sqrt(2))) / 6
    assert float(loss) == pytest.approx(expected, rel=1e-12)


def test_picl_matches_pairwise_loop():
    rng = np.random.default_rng(1)
    g = GridSpec(n_x=8, n_y=8)
    u = torch.from_numpy(rng.standard_normal((4, 32, 8, 8)) * 0.1)
    rows = np.array([[0.01, 0.6, 0.8, np.nan], [0.02, np.nan, np.nan, np.nan],
                     [np.nan, 1.0, 2.0, np.nan], [0.012, 0.9, 0.7, np.nan]])
    pdes = ["burgers", "heat", "advection", "burgers"]
    model = lambda x: 0.9 * x  # noqa: E731
    got = float(picl_loss(model, u, rows, pdes, g, start=3, tau=0.05))
    th = picl_theta(rows, pdes)
    x = u[:, 3:11]
    gu = model(x)
    fg = euler_update(gu, rows, pdes, g)
    total = []
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            ds = u[i, 12:20] - u[j, 11:19]
            du = fg[i] - gu[j]
            d = float(((ds - du) ** 2).mean())
            psi = math.sqrt(abs(th[i] @ th[j])) / max(np.linalg.norm(th[i]), np.linalg.norm(th[j]))
            total.append(psi / 2 * d ** 2 + (1 - psi) / 2 * max(0.05 - d, 0) ** 2)
    assert got == pytest.approx(np.mean(total), rel=1e-9)


def test_euler_update_matches_solver_step():
    from pdepretrain.datagen.solvers import burgers_rhs

    rng = np.random.default_rng(2)
    g = GridSpec(n_x=16, n_y=16)
    u = rng.standard_normal((1, 2, 16, 16))
    row = np.array([[0.01, 0.6, 0.8, np.nan]])
    got = euler_update(torch.from_numpy(u), row, ["burgers"], g, dt=1e-3).numpy()
    ref = u + 1e-3 * burgers_rhs(u, 0.01, 0.6, 0.8, g)
    np.testing.assert_allclose(got, ref, atol=1e-12)
