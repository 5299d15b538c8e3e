import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latcodec.companding import (
    Compander,
    ScalarQuantMap,
    build_compander,
    cell_pmf_companded,
    cell_pmf_direct,
    equivalence_check,
)


def gaussian_pdf(y):
    return math.exp(-0.5 * y * y) / math.sqrt(2 * math.pi)


def random_map(rng, cells=8, lo=-3.0, hi=3.0):
    while True:
        edges = np.sort(rng.uniform(lo, hi, cells + 1))
        if np.min(np.diff(edges)) > 0.05:
            break
    centers = edges[:-1] + np.diff(edges) * rng.uniform(0.2, 0.8, cells)
    return ScalarQuantMap(edges, centers)


class TestScalarQuantMap:
    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError, match="non-monotone"):
            ScalarQuantMap(np.array([0.0, 1.0, 0.5]), np.array([0.4, 0.8]))
        with pytest.raises(ValueError, match="non-monotone"):
            # center outside its cell
            ScalarQuantMap(np.array([0.0, 1.0, 2.0]), np.array([1.2, 1.5]))

    def test_quantize_clamps_to_end_cells(self):
        q = ScalarQuantMap(np.array([0.0, 1.0, 2.0]), np.array([0.5, 1.5]))
        assert q.reconstruct(np.array([-5.0]))[0] == 0.5
        assert q.reconstruct(np.array([9.0]))[0] == 1.5


class TestCompanderKnots:
    def test_forced_knot_correspondence(self):
        # interleaved knots {0, 0.5, 1, 2, 4} map to {0.5, 1, 1.5, 2, 2.5}
        q = ScalarQuantMap(np.array([0.0, 1.0, 4.0]), np.array([0.5, 2.0]))
        c = build_compander(q)
        for y, z in [(0.0, 0.5), (0.5, 1.0), (1.0, 1.5), (2.0, 2.0), (4.0, 2.5)]:
            assert c.forward(y) == pytest.approx(z, abs=1e-14)
            assert c.inverse(z) == pytest.approx(y, abs=1e-14)

    def test_uniform_map_gives_affine_f(self):
        q = ScalarQuantMap(np.array([-0.5, 0.5, 1.5]), np.array([0.0, 1.0]))
        c = build_compander(q)
        ys = np.linspace(-2.0, 3.0, 33)  # beyond the span: linear extension
        assert np.allclose(c.forward(ys), ys + 1.0, atol=1e-12)

    def test_inverse_identity_within_tolerance(self):
        rng = np.random.default_rng(0)
        q = random_map(rng)
        c = build_compander(q)
        ys = np.linspace(q.borders[0], q.borders[-1], 501)
        assert np.max(np.abs(c.inverse(c.forward(ys)) - ys)) < 1e-12
        zs = np.linspace(0.5, 0.5 * len(c.knots_z), 501)
        assert np.max(np.abs(c.forward(c.inverse(zs)) - zs)) < 1e-12

    def test_strictly_increasing(self):
        q = random_map(np.random.default_rng(1))
        c = build_compander(q)
        ys = np.linspace(q.borders[0] - 1, q.borders[-1] + 1, 200)
        assert np.all(np.diff(c.forward(ys)) > 0)


class TestQuantizationCommutes:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), y=st.floats(-6.0, 6.0))
    def test_reconstruction_exact_everywhere(self, seed, y):
        q = random_map(np.random.default_rng(seed))
        c = build_compander(q)
        direct = q.reconstruct(np.array([y]))[0]
        via = c.reconstruct(np.array([y]))[0]
        assert direct == via  # bitwise: both are center lookups

    def test_pmf_preservation_random_maps_gaussian(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            q = random_map(rng)
            c = build_compander(q)
            left = cell_pmf_direct(q, gaussian_pdf)
            right = cell_pmf_companded(c, gaussian_pdf)
            assert np.max(np.abs(left - right)) < 1e-6


class TestEquivalenceCheck:
    def test_uniform_map_gaussian_source(self):
        q = ScalarQuantMap(np.arange(-3.0, 3.5, 0.5), np.arange(-2.75, 3.0, 0.5))
        rep = equivalence_check(q, gaussian_pdf, np.random.default_rng(3).standard_normal(5000))
        assert rep.pmf_max_abs_diff < 1e-9
        assert rep.reconstruction_exact

    def test_random_map_uniform_source(self):
        rng = np.random.default_rng(4)
        q = random_map(rng, lo=0.0, hi=4.0)
        uni = lambda y: 0.25 if 0.0 <= y <= 4.0 else 0.0
        rep = equivalence_check(q, uni, rng.uniform(0, 4, 5000))
        assert rep.pmf_max_abs_diff < 1e-6
        assert rep.reconstruction_exact
