"""Compiled-vs-reference kernel parity, plus independent oracles."""

import numpy as np
import pytest

from gwlatent._kernels import _ref

try:
    from gwlatent._kernels import _fast
except ImportError:
    _fast = None

IMPLS = [_ref] if _fast is None else [_ref, _fast]


def _rand_tconv(seed, c_in=3, c_out=5, h=4, w=6):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((c_in, h, w)),
            rng.standard_normal((c_in, c_out, 4, 4)),
            rng.standard_normal(c_out))


@pytest.mark.skipif(_fast is None, reason="compiled kernels unavailable")
def test_tconv_fast_matches_ref():
    x, w, b = _rand_tconv(0)
    np.testing.assert_allclose(
        _fast.tconv2d_k4s2p1(x, w, b), _ref.tconv2d_k4s2p1(x, w, b), rtol=1e-9, atol=1e-12
    )


@pytest.mark.parametrize("impl", IMPLS)
def test_tconv_matches_torch(impl):
    torch = pytest.importorskip("torch")
    x, w, b = _rand_tconv(1)
    ours = impl.tconv2d_k4s2p1(x, w, b)
    theirs = torch.nn.functional.conv_transpose2d(
        torch.from_numpy(x[None]), torch.from_numpy(w), torch.from_numpy(b),
        stride=2, padding=1,
    )[0].numpy()
    assert ours.shape == theirs.shape == (5, 8, 12)
    np.testing.assert_allclose(ours, theirs, atol=1e-12)


@pytest.mark.parametrize("impl", IMPLS)
def test_tconv_doubles_spatial_size(impl):
    x, w, b = _rand_tconv(2, c_in=2, c_out=1, h=3, w=7)
    assert impl.tconv2d_k4s2p1(x, w, b).shape == (1, 6, 14)


@pytest.mark.skipif(_fast is None, reason="compiled kernels unavailable")
def test_instance_norm_fast_matches_ref():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 5, 6))
    g, b = rng.standard_normal(4), rng.standard_normal(4)
    np.testing.assert_allclose(
        _fast.instance_norm2d(x, 1e-5, g, b),
        _ref.instance_norm2d(x, 1e-5, g, b),
        rtol=1e-12, atol=1e-12,
    )


@pytest.mark.parametrize("impl", IMPLS)
def test_instance_norm_matches_torch(impl):
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(4)
    x = rng.standard_normal((3, 8, 8))
    g, b = rng.standard_normal(3), rng.standard_normal(3)
    ours = impl.instance_norm2d(x, 1e-5, g, b)
    mod = torch.nn.InstanceNorm2d(3, eps=1e-5, affine=True, dtype=torch.float64)
    with torch.no_grad():
        mod.weight.copy_(torch.from_numpy(g))
        mod.bias.copy_(torch.from_numpy(b))
        theirs = mod(torch.from_numpy(x[None]))[0].numpy()
    np.testing.assert_allclose(ours, theirs, atol=1e-10)


@pytest.mark.parametrize("impl", IMPLS)
def test_instance_norm_standardizes(impl):
    rng = np.random.default_rng(5)
    x = 3.0 + 2.0 * rng.standard_normal((2, 16, 16))
    ones, zeros = np.ones(2), np.zeros(2)
    out = impl.instance_norm2d(x, 1e-5, ones, zeros)
    for c in range(2):
        assert abs(out[c].mean()) <= 1e-6
        assert abs(out[c].var() - 1.0) <= 1e-4


@pytest.mark.skipif(_fast is None, reason="compiled kernels unavailable")
@pytest.mark.parametrize("rows,cols", [(5, 7), (4, 3), (3, 4), (8, 8)])
def test_band_matrix_fast_matches_ref(rows, cols):
    rng = np.random.default_rng(6)
    ch = rng.uniform(0.5, 2.0, (rows, cols - 1))
    cv = rng.uniform(0.5, 2.0, (rows - 1, cols))
    np.testing.assert_allclose(
        _fast.flow_band_matrix(ch, cv), _ref.flow_band_matrix(ch, cv), rtol=1e-15
    )


def test_band_matrix_against_dense_assembly():
    # independent oracle: assemble the dense matrix cell by cell
    rng = np.random.default_rng(7)
    rows, cols = 4, 6
    m = cols - 2
    ch = rng.uniform(0.5, 2.0, (rows, cols - 1))
    cv = rng.uniform(0.5, 2.0, (rows - 1, cols))
    n = rows * m
    dense = np.zeros((n, n))
    for r in range(rows):
        for c in range(1, cols - 1):
            i = r * m + (c - 1)
            dense[i, i] = ch[r, c - 1] + ch[r, c]
            if r > 0:
                dense[i, i] += cv[r - 1, c]
                dense[i, i - m] = -cv[r - 1, c]
            if r < rows - 1:
                dense[i, i] += cv[r, c]
                dense[i, i + m] = -cv[r, c]
            if c > 1:
                dense[i, i - 1] = -ch[r, c - 1]
            if c < cols - 2:
                dense[i, i + 1] = -ch[r, c]
    ab = _ref.flow_band_matrix(ch, cv)
    rebuilt = np.zeros_like(dense)
    for i in range(n):
        rebuilt[i, i] = ab[m, i]
        if i >= 1 and ab[m - 1, i] != 0.0:
            rebuilt[i - 1, i] = rebuilt[i, i - 1] = ab[m - 1, i]
        if i >= m and ab[0, i] != 0.0:
            rebuilt[i - m, i] = rebuilt[i, i - m] = ab[0, i]
    np.testing.assert_allclose(rebuilt, dense, rtol=1e-15)
