import numpy as np
import pytest
from scipy.special import logsumexp

from tempora.exact import (
    EnumerationLimitError,
    all_hidden_states,
    brute_force_log_z,
    estimate_log_z,
    exact_log_prob,
    exact_log_probs,
    exact_log_z,
    exact_rsm_gradient,
    finite_difference_check,
    sequence_count_vectors,
)
from tempora.replicated_softmax import RsmParams, SliceBiases, free_energy

from conftest import random_rsm


def montecarlo_log_z(params, n_words, n_samples, rng):
    """Importance sampling from the uniform sequence distribution.

    Z = K^D * E_uniform[exp(-F(v))]; returns (log estimate, rel. std error).
    """
    k = params.n_terms
    seqs = rng.integers(0, k, size=(n_samples, n_words))
    counts = np.zeros((n_samples, k))
    for i in range(n_samples):
        counts[i] = np.bincount(seqs[i], minlength=k)
    w = np.exp(-free_energy(params, counts))
    est = w.mean() * k**n_words
    se = w.std(ddof=1) / np.sqrt(n_samples) * k**n_words
    return float(np.log(est)), float(se / est)


class TestHiddenStates:
    def test_enumeration(self):
        states = all_hidden_states(3)
        assert states.shape == (8, 3)
        assert len({tuple(s) for s in states.astype(int)}) == 8

    def test_limit_refused(self):
        with pytest.raises(EnumerationLimitError):
            all_hidden_states(25)


class TestExactLogZ:
    def test_zero_params_closed_form(self):
        p = RsmParams(np.zeros((3, 2)), np.zeros(3), np.zeros(2))
        assert exact_log_z(p, 2) == pytest.approx(np.log(2**2 * 3**2), rel=1e-14)

    def test_four_term_hand_enumeration(self):
        # K=2, F=1, D=1, single weight ln 2: Z = (1 + 1) + (2 + 1) = 5
        p = RsmParams(np.array([[np.log(2.0)], [0.0]]), np.zeros(2), np.zeros(1))
        assert np.exp(exact_log_z(p, 1)) == pytest.approx(5.0, rel=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(5):
            p = random_rsm(rng, n_terms=3, n_topics=3, scale=0.8)
            for n_words in (1, 2, 3):
                closed = exact_log_z(p, n_words)
                brute = brute_force_log_z(p, n_words)
                assert closed == pytest.approx(brute, rel=1e-10)

    def test_bias_override_used(self, rng):
        p = random_rsm(rng)
        biases = SliceBiases(vbias=np.full(3, 0.5), hbias=np.full(2, -0.2))
        assert exact_log_z(p, 2, biases) != exact_log_z(p, 2)
        assert exact_log_z(p, 2, biases) == pytest.approx(
            brute_force_log_z(p, 2, biases), rel=1e-10)

    def test_montecarlo_agreement(self, rng):
        p = random_rsm(rng, scale=0.4)
        exact = exact_log_z(p, 2)
        mc, rel_se = montecarlo_log_z(p, 2, 20_000, rng)
        assert abs(np.exp(mc) - np.exp(exact)) <= 3 * rel_se * np.exp(mc)

    def test_zero_length_rejected(self, rng):
        with pytest.raises(ValueError):
            exact_log_z(random_rsm(rng), 0)


class TestExactLogProb:
    def test_uniform_model(self):
        p = RsmParams(np.zeros((4, 2)), np.zeros(4), np.zeros(2))
        doc = np.array([1.0, 0.0, 2.0, 0.0])
        assert exact_log_prob(p, doc) == pytest.approx(-3 * np.log(4.0), rel=1e-14)

    def test_sequence_probabilities_sum_to_one(self, rng):
        p = random_rsm(rng, n_terms=3, n_topics=2, scale=0.9)
        lps = [exact_log_prob(p, v) for v in sequence_count_vectors(3, 2)]
        assert np.exp(logsumexp(lps)) == pytest.approx(1.0, abs=1e-12)

    def test_depends_only_on_counts(self, rng):
        p = random_rsm(rng)
        assert exact_log_prob(p, np.array([2.0, 1.0, 0.0])) == exact_log_prob(
            p, np.array([2, 1, 0]))

    def test_free_energy_consistency(self, rng):
        # -F(v) must equal log sum_h exp(-E(v, h)) exactly
        p = random_rsm(rng, scale=1.1)
        states = all_hidden_states(2)
        v = np.array([1.0, 2.0, 0.0])
        energies = [-(v @ (p.vbias + p.weights @ h)) - v.sum() * (p.hbias @ h)
                    for h in states]
        direct = logsumexp([-e for e in energies])
        assert -free_energy(p, v) == pytest.approx(direct, rel=1e-12)


class TestExactGradient:
    def test_matches_finite_differences(self, rng):
        p = random_rsm(rng, n_terms=4, n_topics=3, scale=0.7)
        docs = rng.multinomial(3, np.ones(4) / 4, size=3).astype(float)
        g = exact_rsm_gradient(p, docs)

        def cost(d):
            return -float(exact_log_probs(
                RsmParams(d["weights"], d["vbias"], d["hbias"]), docs).sum())

        chk = finite_difference_check(
            cost,
            {"weights": p.weights, "vbias": p.vbias, "hbias": p.hbias},
            {"weights": g.weights, "vbias": g.vbias, "hbias": g.hbias})
        assert chk.max_rel < 1e-6, chk

    def test_zero_at_symmetric_critical_point(self):
        # symmetric data under symmetric (all-zero) parameters
        p = RsmParams(np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        docs = np.array([[1.0, 0.0], [0.0, 1.0]])
        g = exact_rsm_gradient(p, docs)
        assert np.allclose(g.vbias, 0.0, atol=1e-14)
        assert np.allclose(g.weights, 0.0, atol=1e-14)

    def test_bias_override_respected(self, rng):
        p = random_rsm(rng)
        biases = SliceBiases(vbias=rng.normal(0, 0.3, 3), hbias=rng.normal(0, 0.3, 2))
        docs = np.array([[2.0, 1.0, 0.0]])
        g = exact_rsm_gradient(p, docs, biases)

        def cost(d):
            return -float(exact_log_probs(
                RsmParams(d["weights"], p.vbias, p.hbias), docs,
                SliceBiases(d["vbias_t"], d["hbias_t"])).sum())

        chk = finite_difference_check(
            cost,
            {"weights": p.weights, "vbias_t": biases.vbias, "hbias_t": biases.hbias},
            {"weights": g.weights, "vbias_t": g.vbias, "hbias_t": g.hbias})
        assert chk.max_rel < 1e-6, chk


class TestFiniteDifferenceCheck:
    def test_exact_for_quadratics(self):
        a = np.array([1.0, -2.0, 0.5])

        def cost(x):
            return float(0.5 * x @ x + a @ x)

        x0 = np.array([0.3, -1.2, 2.0])
        chk = finite_difference_check(cost, x0, x0 + a)
        assert chk.max_rel < 1e-9

    def test_epsilon_out_of_range(self):
        with pytest.raises(ValueError):
            finite_difference_check(lambda x: float(x.sum()), np.ones(2),
                                    np.ones(2), epsilon=1e-2)

    def test_nonfinite_cost_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            finite_difference_check(lambda x: float("nan"), np.ones(2), np.ones(2))

    def test_deviation_grows_with_epsilon(self):
        # quartic cost: truncation error scales with epsilon^2
        def cost(x):
            return float((x**4).sum())

        x0 = np.array([1.3])
        grad = 4 * x0**3
        small = finite_difference_check(cost, x0, grad, epsilon=1e-5).max_rel
        large = finite_difference_check(cost, x0, grad, epsilon=1e-3).max_rel
        assert large > small

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            finite_difference_check(lambda d: 0.0, {"a": np.ones(2)},
                                    {"a": np.ones(3)})


class TestAnnealedImportanceSampling:
    def test_close_to_exact_on_tiny_instance(self, rng):
        p = random_rsm(rng, n_terms=4, n_topics=3, scale=0.6)
        exact = exact_log_z(p, 3)
        est = estimate_log_z(p, 3, n_temps=400, n_chains=200,
                             rng=np.random.default_rng(99))
        assert est == pytest.approx(exact, abs=0.05)

    def test_exact_for_zero_weights(self, rng):
        # with W = 0 every intermediate distribution is the base model
        p = RsmParams(np.zeros((3, 2)), rng.normal(0, 0.5, 3), rng.normal(0, 0.5, 2))
        est = estimate_log_z(p, 2, n_temps=5, n_chains=3,
                             rng=np.random.default_rng(0))
        assert est == pytest.approx(exact_log_z(p, 2), rel=1e-12)

    def test_respects_bias_override(self, rng):
        p = random_rsm(rng, scale=0.4)
        biases = SliceBiases(vbias=np.full(3, 0.3), hbias=np.full(2, -0.1))
        est = estimate_log_z(p, 2, biases, n_temps=400, n_chains=200,
                             rng=np.random.default_rng(7))
        assert est == pytest.approx(exact_log_z(p, 2, biases), abs=0.05)
