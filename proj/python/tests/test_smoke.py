# Copyright Contributors to the voxreg project
# SPDX-License-Identifier: Apache-2.0

import json
import math
import pathlib

import numpy as np
import pytest

import voxreg

ROOT = pathlib.Path(__file__).resolve().parents[2]
CONFIG = ROOT / "configs" / "reference.json"


def test_psi_beta_midpoint_and_limits():
    s = np.array([0.0, 5.0, -5.0])
    d = voxreg.psi_beta(s, alpha=10.0, beta=0.1)
    assert d.shape == (3,)
    assert d[0] == pytest.approx(5.0)
    assert d[1] == pytest.approx(10.0)
    assert d[2] == pytest.approx(0.0, abs=1e-12)


def test_composite_two_samples():
    r = voxreg.composite(np.array([0.5, 1.5]), np.array([1.0, 1.0]))
    a = 1.0 - math.exp(-1.0)
    assert r["weights"] == pytest.approx([a, a * (1 - a)])
    assert r["weight_sum"] == pytest.approx(0.864665, abs=1e-6)
    assert r["depth"] == pytest.approx(0.5 * a + 1.5 * a * (1 - a))


def test_composite_rejects_negative_density():
    with pytest.raises(voxreg.InputError):
        voxreg.composite(np.array([0.5, 1.5]), np.array([1.0, -1.0]))


def test_grid_sample_constant_and_padding():
    grid = np.full((2, 3, 3, 3), 4.0)
    pts = np.array([[0.0, 0.0, 0.0], [9.0, 0.0, 0.0]])
    out = voxreg.grid_sample(grid, [-1.5, -1.5, -1.5], [1.5, 1.5, 1.5], pts)
    assert out.shape == (2, 2)
    assert out[0] == pytest.approx([4.0, 4.0])
    assert out[1] == pytest.approx([0.0, 0.0])


def test_lovasz_single_wrong_pixel():
    loss, grad = voxreg.lovasz_softmax(np.array([[0.0, 1.0]]), [0])
    assert loss == pytest.approx(1.0)
    assert grad.shape == (1, 2)


def test_vxg_round_trip(tmp_path):
    data = np.random.default_rng(0).normal(size=(2, 3, 4, 5))
    path = tmp_path / "g.vxg"
    voxreg.write_vxg(str(path), data, [0, 0, 0], [5, 4, 3])
    back, lo, hi = voxreg.read_vxg(str(path))
    np.testing.assert_array_equal(back, data)
    assert list(hi) == [5, 4, 3]


def test_render_bev_of_slab():
    # Solid below z = 0 inside a 4 x 4 x 8 lattice over z in [-2, 2].
    nz = 8
    z = -2.0 + (np.arange(nz) + 0.5) * 0.5
    sdf = np.broadcast_to(-z[:, None, None], (nz, 4, 4))[None].copy()
    semantic = np.zeros((2, nz, 4, 4))
    out = voxreg.render_bev(sdf, semantic, [-1, -1, -2], [1, 1, 2], alpha=50.0, beta=0.05, nx=4, ny=4)
    height = out["depth"] / out["weight_sum"]
    # Samples sit at voxel centers, so the surface resolves to within half a voxel.
    np.testing.assert_allclose(height, 0.0, atol=0.25)


def test_render_camera_shapes():
    rig = json.loads((ROOT / "configs" / "reference_rig.json").read_text())
    cam = rig["cameras"][0]
    sdf = np.full((1, 4, 4, 4), -1.0)
    semantic = np.zeros((3, 4, 4, 4))
    out = voxreg.render_camera(sdf, semantic, [-2, -2, -2], [2, 2, 2], cam, stride=4)
    assert out["depth"].shape == (cam["height"] // 4, cam["width"] // 4)
    assert out["semantic"].shape[-1] == 3


def test_grad_check_passes():
    for suite in voxreg.grad_check(seed=0):
        assert suite["passed"], suite


def test_short_fit_lowers_loss():
    r = voxreg.fit(str(CONFIG), steps=20)
    assert len(r["log"]) == 20
    assert r["log"][-1]["total"] < r["log"][0]["total"]
    assert r["sdf"].shape == (1, 20, 32, 32)
    assert r["metrics"]["schema"] == "voxreg.metrics/1"
