import numpy as np
import pytest

from anomalens.rng import PortableRng, derive_seed

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def splitmix64_reference(seed, n):
    """Pure-int SplitMix64, independent of the numpy implementation."""

    def mix(z):
        z &= MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    out = []
    state = seed & MASK
    for _ in range(n):
        state = (state + GAMMA) & MASK
        out.append(mix(state))
    return out


class TestRawStream:
    def test_matches_pure_python_reference(self):
        for seed in [0, 1, 42, 0xDEADBEEF, MASK]:
            rng = PortableRng(seed)
            got = rng.raw(64)
            want = splitmix64_reference(seed, 64)
            assert [int(v) for v in got] == want

    def test_counter_mode_is_stateless_in_chunks(self):
        whole = PortableRng(123).raw(100)
        rng = PortableRng(123)
        parts = np.concatenate([rng.raw(13), rng.raw(50), rng.raw(37)])
        assert np.array_equal(whole, parts)

    def test_streams_with_different_seeds_differ(self):
        a = PortableRng(7).raw(32)
        b = PortableRng(8).raw(32)
        assert not np.array_equal(a, b)


class TestDerivedValues:
    def test_random_unit_interval(self):
        u = PortableRng(5).random(10_000)
        assert u.dtype == np.float64
        assert np.all(u >= 0.0) and np.all(u < 1.0)
        # mean of U[0,1) over 10k draws; loose 5-sigma band
        assert abs(u.mean() - 0.5) < 5 * 0.2887 / 100

    def test_uniform_bounds(self):
        u = PortableRng(6).uniform(-3.0, 2.0, 5000)
        assert np.all(u >= -3.0) and np.all(u < 2.0)

    def test_normal_moments(self):
        z = PortableRng(7).normal(10.0, 3.0, 50_000)
        assert np.all(np.isfinite(z))
        assert abs(z.mean() - 10.0) < 0.1
        assert abs(z.std() - 3.0) < 0.1

    def test_normal_deterministic_and_scaled(self):
        a = PortableRng(9).normal(2.0, 0.5, 64)
        b = PortableRng(9).normal(2.0, 0.5, 64)
        z = PortableRng(9).normal(0.0, 1.0, 64)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(a, 2.0 + 0.5 * z, rtol=1e-12)

    def test_permutation_is_a_permutation(self):
        for seed in range(5):
            p = PortableRng(seed).permutation(257)
            assert sorted(p.tolist()) == list(range(257))

    def test_permutation_deterministic(self):
        assert np.array_equal(
            PortableRng(11).permutation(100), PortableRng(11).permutation(100)
        )

    def test_integer_below_range_and_coverage(self):
        rng = PortableRng(13)
        draws = [rng.integer_below(7) for _ in range(2000)]
        assert set(draws) == set(range(7))

    def test_choice_without_replacement(self):
        rng = PortableRng(17)
        picked = rng.choice_without_replacement(50, 12)
        assert len(picked) == 12
        assert len(set(picked.tolist())) == 12
        assert all(0 <= v < 50 for v in picked)

    def test_integer_below_requires_positive_bound(self):
        with pytest.raises(ValueError):
            PortableRng(1).integer_below(0)


class TestDeriveSeed:
    def test_deterministic_and_tag_sensitive(self):
        assert derive_seed(42, 1) == derive_seed(42, 1)
        assert derive_seed(42, 1) != derive_seed(42, 2)
        assert derive_seed(42, 1) != derive_seed(43, 1)

    def test_derived_streams_do_not_collide(self):
        a = PortableRng(derive_seed(100, 0)).raw(16)
        b = PortableRng(derive_seed(100, 1)).raw(16)
        assert not np.array_equal(a, b)
