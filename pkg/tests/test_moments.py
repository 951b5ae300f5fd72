import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixedlinear.errors import DimensionError
from mixedlinear.model import MixtureParams, make_delta_spaced_params, sample_dataset
from mixedlinear.moments import (
    compensated_sum,
    compute_second_moments,
    compute_whitened_third_moment,
    expected_moments,
    is_symmetric,
    t_map,
    t_map_whitened,
    tensor_contract,
)


def brute_t_map(u):
    p = len(u)
    out = np.zeros((p, p, p))
    for a in range(p):
        for b in range(p):
            for c in range(p):
                out[a, b, c] = u[a] * (b == c) + u[b] * (a == c) + u[c] * (a == b)
    return out


def brute_m3(ys, xs):
    """Third moment straight from its definition, as a full p^3 array."""
    n, p = xs.shape
    m1 = sum(y**3 * x for y, x in zip(ys, xs)) / (6 * n)
    raw = sum(y**3 * np.multiply.outer(np.multiply.outer(x, x), x) for y, x in zip(ys, xs)) / (6 * n)
    return raw - brute_t_map(m1)


def brute_contract(t, W):
    p, k = W.shape
    out = np.zeros((k, k, k))
    for m in range(k):
        for nn in range(k):
            for q in range(k):
                out[m, nn, q] = sum(
                    t[i, j, l] * W[i, m] * W[j, nn] * W[l, q] for i in range(p) for j in range(p) for l in range(p)
                )
    return out


def test_second_moments_single_sample():
    s = compute_second_moments([1.0], [[1.0, 0.0]])
    assert s.m0 == 1.0
    np.testing.assert_allclose(s.M2, np.diag([0.0, -0.5]), atol=1e-15)
    z = compute_second_moments([0.0], [[0.3, -2.0]])
    assert z.m0 == 0 and np.all(z.M2 == 0)


def test_second_moments_empty_slice():
    with pytest.raises(ValueError):
        compute_second_moments([], np.zeros((0, 3)))


def test_second_moment_single_model_converges():
    params = MixtureParams(np.eye(3)[:1], [1.0])
    data = sample_dataset(params, 200_000, 0)
    m2 = compute_second_moments(data.ys, data.xs).M2
    e1 = np.eye(3)[0]
    assert np.linalg.norm(m2 - np.outer(e1, e1), 2) <= 0.05


def test_second_moment_slice_linearity():
    rng = np.random.default_rng(0)
    ys, xs = rng.standard_normal(300), rng.standard_normal((300, 4))
    a, b = compute_second_moments(ys[:110], xs[:110]), compute_second_moments(ys[110:], xs[110:])
    whole = compute_second_moments(ys, xs)
    merged = (110 * a.M2 + 190 * b.M2) / 300
    assert np.max(np.abs(merged - whole.M2)) <= 1e-12 * np.max(np.abs(whole.M2))
    assert whole.m0 == pytest.approx((110 * a.m0 + 190 * b.m0) / 300, rel=1e-12)


def test_second_moment_chunking_matches_single_pass(monkeypatch):
    rng = np.random.default_rng(2)
    ys, xs = rng.standard_normal(1000), rng.standard_normal((1000, 3))
    whole = compute_second_moments(ys, xs).M2
    monkeypatch.setattr("mixedlinear.moments.CHUNK", 37)
    chunked = compute_second_moments(ys, xs).M2
    np.testing.assert_allclose(chunked, whole, rtol=1e-12, atol=1e-14)
    assert np.array_equal(chunked, chunked.T)


def test_t_map_entries():
    t = t_map([1.0, 0.0])
    assert t[0, 0, 0] == 3 and t[0, 1, 1] == 1 and t[1, 0, 1] == 1 and t[1, 1, 1] == 0
    assert np.all(t_map(np.zeros(3)) == 0)


@given(seed=st.integers(0, 10**6), p=st.integers(1, 5))
def test_t_map_matches_definition(seed, p):
    u = np.random.default_rng(seed).standard_normal(p)
    np.testing.assert_allclose(t_map(u), brute_t_map(u), atol=1e-15)


def test_t_map_operator_norm_bound():
    rng = np.random.default_rng(3)
    u = rng.standard_normal(6)
    v = rng.standard_normal((500, 6))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    vals = np.einsum("abc,la,lb,lc->l", t_map(u), v, v, v)
    assert np.max(np.abs(vals)) <= 3 * np.linalg.norm(u) + 1e-10


@given(seed=st.integers(0, 10**6), p=st.integers(1, 4), data=st.data())
def test_t_map_whitened_matches_full_contraction(seed, p, data):
    k = data.draw(st.integers(1, p))
    rng = np.random.default_rng(seed)
    u, W = rng.standard_normal(p), rng.standard_normal((p, k))
    np.testing.assert_allclose(t_map_whitened(u, W), brute_contract(brute_t_map(u), W), rtol=1e-10, atol=1e-12)


def test_whitened_third_moment_identity_whitener():
    t = compute_whitened_third_moment([1.0], [[1.0, 0.0]], np.eye(2)).tilde_M3
    e1 = np.eye(2)[0]
    expected = np.einsum("a,b,c->abc", e1, e1, e1) / 6 - t_map(e1 / 6)
    np.testing.assert_allclose(t, expected, atol=1e-15)


def test_whitened_third_moment_small_brute_force():
    rng = np.random.default_rng(4)
    ys, xs, W = rng.standard_normal(10), rng.standard_normal((10, 3)), rng.standard_normal((3, 2))
    got = compute_whitened_third_moment(ys, xs, W).tilde_M3
    np.testing.assert_allclose(got, brute_contract(brute_m3(ys, xs), W), rtol=1e-10, atol=1e-12)


def test_whitened_path_equivalence_100_cases():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = int(rng.integers(1, 5))
        k = int(rng.integers(1, p + 1))
        n = int(rng.integers(1, 12))
        ys, xs, W = rng.standard_normal(n), rng.standard_normal((n, p)), rng.standard_normal((p, k))
        got = compute_whitened_third_moment(ys, xs, W)
        want = tensor_contract(brute_m3(ys, xs), W)
        scale = max(np.max(np.abs(want)), 1.0)
        assert np.max(np.abs(got.tilde_M3 - want)) <= 1e-10 * scale
        assert is_symmetric(got.tilde_M3)


def test_whitened_third_moment_errors():
    with pytest.raises(ValueError):
        compute_whitened_third_moment([], np.zeros((0, 2)), np.eye(2))
    with pytest.raises(DimensionError):
        compute_whitened_third_moment([1.0], [[1.0, 2.0]], np.ones((2, 3)))


def test_rank_one_population_whitened_tensor():
    m2, m3 = expected_moments(MixtureParams(np.eye(3)[:1], [1.0]))
    W = np.eye(3)[:, :1]
    assert tensor_contract(m3, W).item() == pytest.approx(1.0)
    np.testing.assert_array_equal(m2, np.diag([1.0, 0, 0]))


def test_expected_moments_examples():
    m2, _ = expected_moments(MixtureParams(np.eye(4)[:2], [0.5, 0.5]))
    np.testing.assert_allclose(m2, np.diag([0.5, 0.5, 0, 0]))


def test_empirical_moments_approach_population():
    params = make_delta_spaced_params(5, 2, 1.2, 7)
    m2_bar, m3_bar = expected_moments(params)
    W = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 2)))[0]
    gaps = []
    for n in (10**4, 10**5, 10**6):
        g = []
        for s in range(3):
            data = sample_dataset(params, n, 50 + s)
            g.append(np.linalg.norm(compute_second_moments(data.ys, data.xs).M2 - m2_bar, 2))
            t = compute_whitened_third_moment(data.ys, data.xs, W).tilde_M3
            g.append(np.max(np.abs(t - tensor_contract(m3_bar, W))))
        gaps.append(np.mean(g))
    # sqrt(10) shrinkage per decade; allow a factor-2 slack either way.
    for a, b in zip(gaps, gaps[1:]):
        assert np.sqrt(10) / 2 <= a / b <= 2 * np.sqrt(10)


def test_gaussian_sixth_moment_identity():
    beta = np.array([0.6, -0.3, 0.2])
    target = 6 * np.einsum("a,b,c->abc", beta, beta, beta) + 3 * t_map(beta @ beta * beta)
    rng = np.random.default_rng(8)
    gaps = []
    for n in (2000, 200_000):
        x = rng.standard_normal((n, 3))
        emp = np.einsum("i,ia,ib,ic->abc", (x @ beta) ** 3, x, x, x) / n
        gaps.append(np.max(np.abs(emp - target)))
    assert gaps[1] < gaps[0]
    assert gaps[1] < 0.05


def test_compensated_sum_recovers_cancellation():
    parts = [np.array([1e16]), np.array([1.0]), np.array([-1e16]), np.array([1.0])]
    assert compensated_sum(parts)[0] == 2.0
    assert sum(parts)[0] != 2.0
