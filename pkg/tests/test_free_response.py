import math

import numpy as np
import pytest

from srsfa import free_response as fr
from srsfa.errors import DomainError
from srsfa.sfa import correlation_value

# (j, Delta, C1) for T=45, at the published precision
PUBLISHED = [
    (0, 0.0, 1.0),
    (1, 0.005, 0.997),
    (2, 0.02, 0.99),
    (3, 0.046, 0.977),
    (22, 2.0, 0.0),
    (41, 3.954, -0.977),
    (42, 3.98, -0.99),
    (43, 3.995, -0.997),
    (44, 4.0, -1.0),
]


@pytest.mark.parametrize("j, delta, c1", PUBLISHED)
def test_published_values(j, delta, c1):
    d, c = fr.free_response_stats(j, 45)
    assert round(d, 3) == pytest.approx(delta, abs=1e-9)
    assert round(c, 3) == pytest.approx(c1, abs=1e-9)


def test_extreme_responses():
    assert np.array_equal(fr.free_response(0, 45).values, np.ones(45))
    for T in (8, 9):
        y = fr.free_response(T - 1, T).values
        assert np.allclose(y, (-1.0) ** np.arange(T))


def test_scale_and_second_moment():
    for T in (10, 45, 101):
        for j in range(T):
            resp = fr.free_response(j, T)
            assert resp.scale == (1.0 if j in (0, T - 1) else math.sqrt(2.0))
            assert abs(np.mean(resp.values**2) - 1) <= 2 / T


def test_values_follow_cosine():
    resp = fr.free_response(5, 12)
    t = np.arange(1, 13)
    assert np.allclose(resp.values, math.sqrt(2) * np.cos(5 * np.pi * (t - 1) / 11))


def test_domain_errors():
    with pytest.raises(DomainError):
        fr.free_response(45, 45)
    with pytest.raises(DomainError):
        fr.free_response(-1, 45)
    with pytest.raises(DomainError):
        fr.free_response(0, 1)


def test_pairwise_decorrelation():
    T = 45
    Y = np.stack([fr.free_response(j, T).values for j in range(1, T)], axis=1)
    gram = Y.T @ Y / T
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) <= 4 / T


def test_c1_strictly_decreasing_and_ranges():
    T = 45
    stats = [fr.free_response_stats(j, T) for j in range(T)]
    deltas = np.array([s[0] for s in stats])
    c1 = np.array([s[1] for s in stats])
    assert np.all(np.diff(c1) < 0)
    assert np.all((deltas >= 0) & (deltas <= 4))
    assert np.all((c1 >= -1) & (c1 <= 1))


@pytest.mark.parametrize("T", [45, 46])
def test_c2_parity(T):
    for j in range(T):
        a = correlation_value(fr.free_response(j, T).values, 2)
        b = correlation_value(fr.free_response(T - 1 - j, T).values, 2)
        assert abs(a - b) <= 2 / T


def test_middle_response_even_length_is_measured():
    # only odd T has an exact middle index; for even T we record the value without a claim
    d_odd, _ = fr.free_response_stats(22, 45)
    assert d_odd == pytest.approx(2.0, abs=1e-12)
    d_even, _ = fr.free_response_stats(22, 46)
    assert 0 < d_even < 4


def test_spatial_reference_value():
    ref = fr.SpatialReference(0, 0)
    assert np.all(fr.spatial_reference_value(ref, np.linspace(0, 1, 5), 0.3) == 1.0)
    assert fr.spatial_reference_value(fr.SpatialReference(1, 0), 0.0, 0.7) == pytest.approx(math.sqrt(2))
    ref = fr.SpatialReference(2, 1, lx=15, ly=10)
    x, y = 3.7, 8.1
    expect = 2 * math.cos(2 * math.pi * x / 15) * math.cos(math.pi * y / 10)
    assert fr.spatial_reference_value(ref, x, y) == pytest.approx(expect)


def test_spatial_reference_delta():
    assert fr.spatial_reference_delta(fr.SpatialReference(0, 0)) == 0
    assert fr.spatial_reference_delta(fr.SpatialReference(1, 0)) == pytest.approx(math.pi**2)
    for j, l in [(1, 1), (2, 3), (4, 0)]:
        full = fr.spatial_reference_delta(fr.SpatialReference(j, l, 15, 10, 0.3))
        parts = fr.spatial_reference_delta(fr.SpatialReference(j, 0, 15, 10, 0.3)) + fr.spatial_reference_delta(
            fr.SpatialReference(0, l, 15, 10, 0.3)
        )
        assert full == pytest.approx(parts)
    with pytest.raises(DomainError):
        fr.SpatialReference(-1, 0)
    with pytest.raises(DomainError):
        fr.SpatialReference(0, 0, lx=0)


def test_sampled_reference_cell_centers():
    g = fr.sampled_reference(2, 1, 15, 10)
    assert g.shape == (10, 15)
    row, col = 4, 9
    expect = 2 * math.cos(2 * math.pi * (col + 0.5) / 15) * math.cos(math.pi * (row + 0.5) / 10)
    assert g[row, col] == pytest.approx(expect)


@pytest.mark.parametrize("j, l", [(1, 0), (0, 1), (2, 1), (3, 2)])
def test_match_exact_and_noisy(rng, j, l):
    g = fr.sampled_reference(j, l, 15, 10)
    m = fr.match_to_reference(g)
    assert (m.j, m.l, m.sign) == (j, l, 1) and m.score > 0.999
    m = fr.match_to_reference(-g)
    assert (m.j, m.l, m.sign) == (j, l, -1)
    noisy = g + 0.01 * np.std(g) * rng.normal(size=g.shape)
    m = fr.match_to_reference(noisy)
    assert (m.j, m.l) == (j, l) and 0 <= m.score <= 1


def test_match_zero_field():
    assert fr.match_to_reference(np.zeros((3, 4))).score == 0.0


def test_rank_by_delta_for_field_shape():
    ranked = fr.rank_by_delta(15, 10)
    assert ranked[:6] == [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 1)]
    square = fr.rank_by_delta(1, 1, max_index=2)
    # equal Delta pairs are ordered by index
    assert square[1:3] == [(0, 1), (1, 0)]
