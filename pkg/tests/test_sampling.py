import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from accel_dse.sampling import (
    HaltonSequence,
    SobolSequence,
    lhs,
    lhs_candidates,
    lhs_strata,
    make_sequence,
    min_pairwise_distance,
    radical_inverse,
    sample_unit,
    star_discrepancy_bruteforce,
)

from .oracles import star_discrepancy_naive


@given(st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**31))
@settings(max_examples=40)
def test_lhs_every_stratum_once(dim, n, seed):
    pts = lhs(dim, n, seed)
    assert pts.shape == (n, dim)
    assert np.all((pts >= 0) & (pts < 1))
    strata = lhs_strata(pts)
    for j in range(dim):
        assert sorted(strata[:, j]) == list(range(n))


def test_lhs_keeps_maximin_candidate():
    cands = lhs_candidates(3, 10, seed=5)
    best = max(range(len(cands)), key=lambda i: (min_pairwise_distance(cands[i]), -i))
    assert np.array_equal(lhs(3, 10, seed=5), cands[best])


def test_lhs_seed_determinism():
    assert np.array_equal(lhs(4, 16, 3), lhs(4, 16, 3))
    assert not np.array_equal(lhs(4, 16, 3), lhs(4, 16, 4))


def test_halton_base2_base3_prefix():
    pts = HaltonSequence(2).draw(8)
    assert pts[:, 0].tolist() == [1 / 2, 1 / 4, 3 / 4, 1 / 8, 5 / 8, 3 / 8, 7 / 8, 1 / 16]
    assert np.allclose(pts[:, 1], [1 / 3, 2 / 3, 1 / 9, 4 / 9, 7 / 9, 2 / 9, 5 / 9, 8 / 9], rtol=0, atol=1e-15)


@given(st.integers(0, 10**6), st.sampled_from([2, 3, 5, 7, 11]))
def test_radical_inverse_digits(i, base):
    digits = []
    k = i
    while k:
        k, d = divmod(k, base)
        digits.append(d)
    expected = sum(d * base ** -(p + 1) for p, d in enumerate(digits))
    assert radical_inverse(i, base) == pytest.approx(expected, abs=1e-15)


def test_sequences_match_scipy_reference():
    # scipy's unscrambled sequences start at index 0; ours skip it
    assert np.array_equal(SobolSequence(6).draw(127), qmc.Sobol(6, scramble=False).random_base2(7)[1:])
    assert np.allclose(HaltonSequence(4).draw(50), qmc.Halton(4, scramble=False).random(51)[1:], atol=1e-15, rtol=0)


@given(st.integers(1, 8), st.lists(st.integers(0, 20), min_size=1, max_size=4))
@settings(max_examples=30)
def test_prefix_extension(dim, chunks):
    for method in ("sobol", "halton"):
        total = sum(chunks)
        whole = make_sequence(method, dim).draw(total)
        seq = make_sequence(method, dim)
        parts = [seq.draw(c) for c in chunks]
        assert np.array_equal(np.vstack(parts) if parts else np.zeros((0, dim)), whole)
        assert seq.emitted == total


def test_sobol_first_points_dim2():
    pts = SobolSequence(2).draw(4)
    assert pts.tolist() == [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75], [0.375, 0.375]]


def test_sampler_guards():
    with pytest.raises(ValueError):
        SobolSequence(0)
    with pytest.raises(ValueError):
        HaltonSequence(65)
    with pytest.raises(ValueError):
        make_sequence("grid", 2)
    with pytest.raises(ValueError):
        lhs(2, 0, 0)
    with pytest.raises(ValueError):
        sample_unit("sobol", 2, 0)


@given(st.integers(1, 12), st.integers(1, 3), st.integers(0, 1000))
@settings(max_examples=40)
def test_star_discrepancy_matches_naive(n, d, seed):
    pts = np.random.default_rng(seed).random((n, d))
    assert star_discrepancy_bruteforce(pts) == pytest.approx(star_discrepancy_naive(pts), abs=1e-12)


def test_star_discrepancy_single_point():
    # one point at x: sup is max(x, 1 - x) in 1-D
    assert star_discrepancy_bruteforce([[0.3]]) == pytest.approx(0.7)
    assert star_discrepancy_bruteforce([[0.5]]) == pytest.approx(0.5)


@given(st.integers(1, 10), st.integers(1, 3), st.integers(0, 1000))
@settings(max_examples=25)
def test_star_discrepancy_bounds(n, d, seed):
    pts = np.random.default_rng(seed).random((n, d))
    disc = star_discrepancy_bruteforce(pts)
    assert 1.0 / (2 * n) - 1e-12 <= disc <= 1.0
