"""Critical-value recipes, the rescaling quantities and the exact gamma arithmetic."""

from fractions import Fraction
from itertools import count

import numpy as np
import pytest

from core import constants
from core.errors import ParameterError
from core.state_schema import ControlParams, Recipe, parse_gamma


def params(s, alpha=0.05, gamma=None, k=1):
    return ControlParams(s=s, gamma=gamma, alpha=alpha, k=k)


def base_at_one(s, gamma):
    """Base FDP constants at alpha = 1 (built at 0.5 and doubled, exact in binary)."""
    return np.asarray(constants.fdp_base_constants(params(s, 0.5, gamma)).values) * 2.0


# ── gamma parsing ─────────────────────────────────────────────

@pytest.mark.parametrize("raw, expected", [
    ("0.1", Fraction(1, 10)),
    ("1/3", Fraction(1, 3)),
    (0.1, Fraction(1, 10)),
    (Fraction(1, 40), Fraction(1, 40)),
    (" 0.05 ", Fraction(1, 20)),
])
def test_parse_gamma_is_exact(raw, expected):
    assert parse_gamma(raw) == expected


@pytest.mark.parametrize("raw", ["0", "1", "1.5", "-0.1", "abc", True, None])
def test_parse_gamma_rejects(raw):
    with pytest.raises(ParameterError):
        parse_gamma(raw)


def test_parse_gamma_allows_zero_when_asked():
    assert parse_gamma("0", allow_zero=True) == 0


def test_control_params_validation():
    with pytest.raises(ValueError):
        params(4, k=5)
    with pytest.raises(ValueError):
        params(4, alpha=1.0)
    with pytest.raises(ValueError):
        params(4, gamma="1")
    assert params(4, gamma="0.1").gamma == Fraction(1, 10)


# ── exact floors and ceilings ─────────────────────────────────

@pytest.mark.parametrize("gamma_text", ["0.1", "0.05", "0.01", "1/3"])
def test_floor_and_ceil_match_integer_search(gamma_text):
    gamma = parse_gamma(gamma_text)
    for s in (1, 9, 10, 11, 29, 30, 100, 333, 1000, 5000):
        floor_ref = max(j for j in range(s + 1) if j <= gamma * s)
        assert constants.floor_gamma_times(gamma, s) == floor_ref
        step = 1 if s <= 1000 else 7
        for m in range(1, floor_ref + 2, step):
            ceil_ref = next(j for j in count(0) if j >= m / gamma)
            assert constants.ceil_over_gamma(m, gamma) == ceil_ref


def test_floor_at_boundary_points():
    assert constants.floor_gamma_times(Fraction(1, 10), 10) == 1
    assert constants.floor_gamma_times(Fraction(1, 10), 30) == 3
    assert constants.ceil_over_gamma(3, Fraction(1, 10)) == 30


# ── simple closed forms ───────────────────────────────────────

def test_holm():
    assert constants.holm_constants(params(4)).values == pytest.approx([0.0125, 0.05 / 3, 0.025, 0.05])
    assert constants.holm_constants(params(1)).values == pytest.approx([0.05])


def test_kfwer():
    assert constants.kfwer_constants(params(4, k=2)).values == pytest.approx([0.025, 0.025, 0.1 / 3, 0.05])
    assert constants.kfwer_constants(params(4, k=4)).values == pytest.approx([0.05] * 4)


@pytest.mark.parametrize("s, alpha", [(1, 0.05), (3, 0.15), (4, 0.05), (50, 0.1)])
def test_kfwer_with_k_one_is_holm(s, alpha):
    assert constants.kfwer_constants(params(s, alpha)).values == pytest.approx(
        constants.holm_constants(params(s, alpha)).values)


def test_harmonic():
    assert constants.harmonic(0) == 0.0
    assert constants.harmonic(1) == 1.0
    assert constants.harmonic(11) == pytest.approx(3.0199, abs=5e-5)
    with pytest.raises(ParameterError):
        constants.harmonic(-1)


def test_fdp_base(params_100):
    values = constants.fdp_base_constants(params_100).values
    assert values[0] == pytest.approx(0.0005)
    assert values[8] == pytest.approx(0.05 / 92)
    assert values[10] == pytest.approx(2 * 0.05 / 91)


def test_fdp_base_degenerates_to_holm():
    assert constants.fdp_base_constants(params(3, gamma="0.01")).values == pytest.approx(
        constants.holm_constants(params(3)).values)


def test_fdp_base_needs_gamma():
    with pytest.raises(ParameterError):
        constants.fdp_base_constants(params(10))


def test_fdp_lr(params_100):
    sequence = constants.fdp_lr_constants(params_100)
    assert sequence.d_used == pytest.approx(3.0199, abs=5e-5)
    assert sequence.values[0] == pytest.approx(1.6557e-4, rel=1e-4)
    assert constants.fdp_lr_constants(params(10, gamma="0.1")).d_used == pytest.approx(1.5)


def test_fdr_stepdown():
    alpha = 0.05
    assert constants.fdr_stepdown_constants(params(3, alpha)).values == pytest.approx(
        [alpha / 3, 3 * alpha / 4, min(3 * alpha, 1.0)])
    assert constants.fdr_stepdown_constants(params(1, alpha)).values == pytest.approx([alpha])
    conservative = constants.fdr_stepdown_constants(params(3, alpha), conservative=True)
    assert conservative.values == pytest.approx([0.05 / 3, 0.0375, 0.05])
    assert conservative.recipe is Recipe.FDR_CONSERVATIVE


def test_fdr_stepdown_caps_at_one():
    values = constants.fdr_stepdown_constants(params(3, 0.4)).values
    assert values[-1] == 1.0


def test_bh_stepup():
    assert constants.bh_stepup_constants(params(4)).values == pytest.approx([0.0125, 0.025, 0.0375, 0.05])
    assert constants.bh_stepup_constants(params(1, 0.2)).values == pytest.approx([0.2])


# ── beta, N, S, D ─────────────────────────────────────────────

def test_beta_sequence_examples(params_100):
    betas = constants.beta_sequence(params_100, None, 90)
    assert len(betas) == 11
    assert betas[0] == pytest.approx(1 / 92)
    assert betas[10] == pytest.approx(11 / 90)


@pytest.mark.parametrize("s, I, expected", [(1000, 712, 33), (100, 1, 1), (100, 100, 1)])
def test_n_cap(s, I, expected):
    assert constants.n_cap(params(s, gamma="0.1"), I) == expected


def test_n_cap_rejects_out_of_range(params_100):
    with pytest.raises(ParameterError):
        constants.n_cap(params_100, 0)
    with pytest.raises(ParameterError):
        constants.n_cap(params_100, 101)


def test_s_value_examples(params_100):
    assert constants.s_value(params_100, None, 55) == pytest.approx(2.0385, abs=5e-5)
    assert constants.s_value(params(1000, gamma="0.1"), None, 712) == pytest.approx(3.4179, abs=5e-5)


def test_s_value_single_term_is_I_times_beta1(params_100):
    # |I| = 100 gives N = 1
    assert constants.s_value(params_100, None, 100) == pytest.approx(100 * constants.beta_sequence(params_100, None, 100)[0])
    assert constants.s_value(params_100, None, 100) <= 1.0


def test_d_value(params_100):
    result = constants.d_value(params_100, keep_per_I=True)
    assert result.d == pytest.approx(2.0385, abs=5e-5)
    assert result.argmax_I == 55
    assert len(result.per_I) == 100
    assert constants.d_value(params(10, gamma="0.1")).d == pytest.approx(1.0)


def test_d_value_with_eta(params_100):
    eta = np.arange(1, 101) / 100
    assert constants.d_value(params_100, eta).d == pytest.approx(13.02, abs=5e-4)


def test_d_value_ties_go_to_smallest_I():
    # s = 10, gamma = 0.1: S(|I|) = 1 for several |I|
    result = constants.d_value(params(10, gamma="0.1"), keep_per_I=True)
    tied = [I for I, _, value in result.per_I if value >= result.d * (1 - 1e-12)]
    assert result.argmax_I == min(tied)


@pytest.mark.parametrize("s", [5, 17, 50, 120, 200])
@pytest.mark.parametrize("gamma", ["0.01", "0.05", "0.1", "0.25", "0.5"])
def test_beta_monotone_and_bounded(s, gamma):
    p = params(s, gamma=gamma)
    for I in range(1, s + 1):
        betas = np.asarray(constants.beta_sequence(p, None, I))
        assert np.all(np.diff(betas) >= 0)
        cap = constants.n_cap(p, I)
        assert np.all(betas[:cap] <= np.arange(1, cap + 1) / I + 1e-15)
        assert np.all(betas[:cap] <= 1.0)


@pytest.mark.parametrize("s, gamma", [(20, "0.1"), (57, "0.05"), (100, "0.1"), (64, "0.25"), (30, "1/3")])
def test_base_deltas_reproduce_direct_betas(s, gamma):
    p = params(s, gamma=gamma)
    deltas = base_at_one(s, p.gamma)
    for I in range(1, s + 1):
        cap = constants.n_cap(p, I)
        direct = constants.beta_sequence(p, None, I)[:cap]
        via_deltas = constants.beta_sequence(p, deltas, I)[:cap]
        assert via_deltas == pytest.approx(direct, rel=1e-12)
        assert constants.s_value(p, deltas, I) == pytest.approx(constants.s_value(p, None, I), rel=1e-12)


def test_beta_sequence_rejects_bad_deltas(params_100):
    with pytest.raises(ParameterError):
        constants.beta_sequence(params_100, np.linspace(0, 2, 100), 10)
    with pytest.raises(ParameterError):
        constants.beta_sequence(params_100, np.linspace(1, 0, 100), 10)
    with pytest.raises(ParameterError):
        constants.beta_sequence(params_100, [0.5] * 99, 10)


# ── rescaled sequences ────────────────────────────────────────

def test_fdp_improved(params_100):
    sequence = constants.fdp_improved_constants(params_100)
    assert sequence.d_used == pytest.approx(2.0385, abs=5e-5)
    assert sequence.values[0] == pytest.approx(2.4528e-4, rel=1e-4)
    small = params(10, gamma="0.1")
    assert constants.fdp_improved_constants(small).values == pytest.approx(
        constants.fdp_base_constants(small).values)


@pytest.mark.parametrize("s, gamma", [(100, "0.01"), (250, "0.05"), (100, "0.1"), (500, "0.1")])
def test_fdp_improved_dominates_lr(s, gamma):
    p = params(s, gamma=gamma)
    improved = constants.fdp_improved_constants(p)
    lr = constants.fdp_lr_constants(p)
    assert improved.d_used <= lr.d_used
    assert np.all(improved.as_array() >= lr.as_array())


def test_fdp_known_i(params_100):
    sequence = constants.known_i_constants(params_100, 55)
    assert sequence.d_used == pytest.approx(2.0385, abs=5e-5)
    assert sequence.recipe is Recipe.FDP_KNOWN_I
    smaller = constants.known_i_constants(params_100, 95)
    assert smaller.d_used < sequence.d_used
    assert np.all(smaller.as_array() >= sequence.as_array())


def test_rescale_custom_with_eta(params_100):
    sequence = constants.rescale_custom(params_100, np.arange(1, 101) / 100)
    assert sequence.d_used == pytest.approx(13.02, abs=5e-4)
    assert sequence.delta_scale is None


def test_rescale_custom_with_base_deltas_reproduces_improved(params_100):
    sequence = constants.rescale_custom(params_100, base_at_one(100, params_100.gamma))
    improved = constants.fdp_improved_constants(params_100)
    assert sequence.d_used == pytest.approx(improved.d_used, rel=1e-12)
    assert sequence.values == pytest.approx(improved.values, rel=1e-12)


def test_rescale_custom_constant_deltas(params_100):
    # beta_m = c for every m, so S(|I|) = |I| c and D = s c
    sequence = constants.rescale_custom(params_100, [0.4] * 100)
    brute = max(constants.s_value(params_100, [0.4] * 100, I) for I in range(1, 101))
    assert sequence.d_used == pytest.approx(brute)
    assert sequence.d_used == pytest.approx(40.0)
    assert sequence.values == pytest.approx([0.05 / 100] * 100)


def test_rescale_custom_rescales_large_deltas(params_100):
    raw = np.arange(1, 101, dtype=float)            # max 100
    scaled = constants.rescale_custom(params_100, raw)
    reference = constants.rescale_custom(params_100, raw / 100)
    assert scaled.delta_scale == pytest.approx(100.0)
    assert scaled.values == pytest.approx(reference.values)


def test_rescale_custom_rejects_zero_deltas(params_100):
    with pytest.raises(ParameterError):
        constants.rescale_custom(params_100, [0.0] * 100)


def test_eta_constants():
    variant_ii = constants.eta_constants(params(100, gamma="0.1"), "ii")
    assert variant_ii.d_used == pytest.approx(29.29, abs=5e-3)
    assert constants.eta_constants(params(10, gamma="0.05"), "ii").d_used == pytest.approx(20.0)
    assert constants.eta_constants(params(25, gamma="0.05"), "i").d_used == pytest.approx(6.76, abs=5e-5)
    with pytest.raises(ParameterError):
        constants.eta_constants(params(10, gamma="0.1"), "iii")


@pytest.mark.parametrize("s, gamma", [(10, "0.1"), (50, "0.05"), (100, "0.1"), (250, "0.01")])
def test_eta_d_below_harmonic_bound(s, gamma):
    p = params(s, gamma=gamma)
    eta_i = constants.eta_constants(p, "i")
    eta_ii = constants.eta_constants(p, "ii")
    assert eta_i.d_used <= eta_ii.d_used + 1e-12


# ── level conversion ──────────────────────────────────────────

def test_convert_levels():
    assert constants.convert_levels("fdr_to_fdp", "0.1", 0.005) == pytest.approx(0.05)
    assert constants.convert_levels("fdr_to_fdp", "0.1", 0.5) == 1.0
    assert constants.convert_levels("fdp_to_fdr", "0.025", 0.05 / 1.95) == pytest.approx(0.05)
    assert constants.convert_levels("fdp_to_fdr", "0", 0.05) == pytest.approx(0.05)


def test_convert_levels_errors():
    with pytest.raises(ParameterError):
        constants.convert_levels("fdr_to_fdp", "0", 0.05)
    with pytest.raises(ParameterError):
        constants.convert_levels("sideways", "0.1", 0.05)
    with pytest.raises(ParameterError):
        constants.convert_levels("fdp_to_fdr", "0.1", 1.5)


# ── headroom ──────────────────────────────────────────────────

def test_headroom_analysis():
    report = constants.headroom_analysis(params(1000, gamma="0.1"))
    assert report.argmax_I == 712
    assert report.n_cap == 33
    assert report.d == pytest.approx(3.4179, abs=5e-5)
    assert report.trigger_steps == 28
    # exact sum over the 28 trigger steps; often quoted as 3.2212 and 1.061
    assert report.lower_bound == pytest.approx(3.2112, abs=5e-5)
    assert report.headroom == pytest.approx(1.0644, abs=5e-4)


# ── dispatch and structural properties ────────────────────────

def test_build_constants_dispatch(params_100):
    assert constants.build_constants("holm", params_100).recipe is Recipe.HOLM
    assert constants.build_constants(Recipe.FDP_IMPROVED, params_100).d_used == pytest.approx(2.0385, abs=5e-5)
    assert constants.build_constants("fdr-stepdown", params_100, conservative=True).recipe is Recipe.FDR_CONSERVATIVE
    with pytest.raises(ParameterError):
        constants.build_constants("nope", params_100)
    with pytest.raises(ParameterError):
        constants.build_constants("fdp-known-i", params_100)
    with pytest.raises(ParameterError):
        constants.build_constants("rescaled-custom", params_100)


def test_every_recipe_is_nondecreasing_in_unit_interval():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        s = int(rng.integers(1, 120))
        alpha = float(rng.uniform(0.001, 0.5))
        gamma = Fraction(int(rng.integers(1, 20)), 20)
        k = int(rng.integers(1, s + 1))
        p = ControlParams(s=s, gamma=gamma, alpha=alpha, k=k)
        deltas = np.sort(rng.uniform(0.01, 3.0, s))
        for recipe in Recipe:
            sequence = constants.build_constants(recipe, p, deltas=deltas, known_I=int(rng.integers(1, s + 1)))
            values = sequence.as_array()
            assert values.size == s
            assert np.all(np.diff(values) >= 0)
            assert np.all((values >= 0) & (values <= 1))
