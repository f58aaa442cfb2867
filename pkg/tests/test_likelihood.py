import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lccmkit.core import ChoiceSituation, RankingObservation
from lccmkit.data import PanelDataset, Respondent
from lccmkit.exceptions import DataError, NumericError
from lccmkit.likelihood import (MembershipModel, PanelLikelihood, class_membership_probabilities,
                                lccm_panel_loglik, loglik_gradient, mnl_probabilities,
                                rmnl_ranking_probability)
from lccmkit.spec import ModelSpec, ParameterSpec, build_spec

from conftest import central_fd, hand_utilities

finite = st.floats(-20, 20, allow_nan=False)


def test_mnl_examples():
    assert np.allclose(mnl_probabilities([0, 0, 0]), [1 / 3] * 3, atol=1e-15)
    assert np.allclose(mnl_probabilities([math.log(2), 0]), [2 / 3, 1 / 3], atol=1e-15)
    v = [1.2, 0.4, -0.3]
    e = [math.exp(x) for x in v]
    assert np.allclose(mnl_probabilities(v), [x / sum(e) for x in e], rtol=0, atol=1e-12)


def test_mnl_overflow_and_nan():
    p = mnl_probabilities([1000.0, 999.0, -1000.0])
    assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1, abs=1e-12)
    with pytest.raises(NumericError):
        mnl_probabilities([0.0, float("nan")])


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=1, max_size=6), st.floats(-50, 50))
def test_mnl_simplex_and_translation(v, c):
    p = mnl_probabilities(v)
    assert np.all(p > 0) and np.all(p <= 1)
    assert p.sum() == pytest.approx(1, abs=1e-12)
    assert np.allclose(mnl_probabilities(np.array(v) + c), p, atol=1e-12)


def test_rmnl_examples():
    for perm in itertools.permutations(range(3)):
        assert rmnl_ranking_probability([0.3] * 3, perm) == pytest.approx(1 / 6, abs=1e-15)
    v = [1.0, 0.0, -1.0]
    e = np.exp(v)
    oracle = e[0] / e.sum() * e[1] / (e[1] + e[2])
    assert rmnl_ranking_probability(v, (0, 1, 2)) == pytest.approx(oracle, abs=1e-15)
    assert rmnl_ranking_probability(v, ("train1", "train2", "opt_out")) == pytest.approx(oracle)


def test_rmnl_invalid_permutation():
    with pytest.raises(DataError):
        rmnl_ranking_probability([0, 0, 0], (0, 0, 1))


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3))
def test_rmnl_total_probability_and_top_consistency(v):
    perms = list(itertools.permutations(range(3)))
    assert sum(rmnl_ranking_probability(v, p) for p in perms) == pytest.approx(1, abs=1e-12)
    p = mnl_probabilities(v)
    for top in range(3):
        assert sum(rmnl_ranking_probability(v, q) for q in perms if q[0] == top) == \
            pytest.approx(p[top], abs=1e-12)


def table3_membership():
    return MembershipModel(np.array([0.0, -1.160]),
                           np.array([[0, 0, 0], [-0.107, -0.275, 0.820]]),
                           ("age", "female", "train_freq_covid"))


def test_membership_examples():
    flat = MembershipModel(np.zeros(2), np.zeros((2, 1)), ("age",))
    assert np.allclose(class_membership_probabilities({"age": 4}, flat), [0.5, 0.5])
    m = table3_membership()
    score = -1.160 - 0.107 * 3 - 0.275 * 1 + 0.820 * 2
    assert score == pytest.approx(-0.116, abs=1e-12)
    p2 = 1 / (1 + math.exp(-score))
    p = class_membership_probabilities({"age": 3, "female": 1, "train_freq_covid": 2}, m)
    assert p == pytest.approx([1 - p2, p2], abs=1e-12)
    seq = [class_membership_probabilities({"age": 3, "female": 1, "train_freq_covid": f}, m)[1]
           for f in (1, 2, 3, 4)]
    assert np.all(np.diff(seq) > 0)
    with pytest.raises(DataError):
        class_membership_probabilities({"age": 3}, m)


def test_single_class_is_sum_of_logit_terms(small_panel, mnl_spec):
    theta = mnl_spec.initial_theta()
    params = mnl_spec.class_parameters(theta, 0)
    oracle = 0.0
    for r in small_panel.respondents:
        for obs in r.observations:
            v = hand_utilities(params, small_panel.situations[obs.situation_id])
            oracle += math.log(mnl_probabilities(v)[["train1", "train2", "opt_out"].index(obs.ranking[0])])
    assert lccm_panel_loglik(small_panel, mnl_spec, theta) == pytest.approx(oracle, rel=1e-12)


def test_rank_rule_single_class(small_panel, mnl_spec):
    theta = mnl_spec.initial_theta()
    params = mnl_spec.class_parameters(theta, 0)
    oracle = 0.0
    for r in small_panel.respondents:
        for obs in r.observations:
            v = hand_utilities(params, small_panel.situations[obs.situation_id])
            oracle += math.log(rmnl_ranking_probability(v, obs.ranking))
    assert lccm_panel_loglik(small_panel, mnl_spec, theta, rule="rank") == pytest.approx(oracle, rel=1e-12)


def tiny_panel(n_resp=2, n_tasks=2, seed=0):
    rng = np.random.default_rng(seed)
    levels = dict(crowd=(5, 18, 23, 28, 36), wt=(3, 12, 25), infect=(0.01, 0.1, 0.5, 2, 10), ivt=(10, 25, 40))
    sits, resp = {}, []
    labels = ["train1", "train2", "opt_out"]
    for n in range(n_resp):
        obs = []
        for _ in range(n_tasks):
            sit = ChoiceSituation.from_values(rng.choice(levels["crowd"]), rng.choice(levels["wt"]),
                                              rng.choice(levels["crowd"]), rng.choice(levels["wt"]),
                                              rng.choice(levels["infect"]), rng.choice(levels["ivt"]))
            sits[sit.id] = sit
            obs.append(RankingObservation(sit.id, tuple(rng.permutation(labels))))
        covs = {"age": float(rng.integers(1, 8)), "female": float(rng.choice([-1, 1])),
                "train_freq_covid": float(rng.integers(1, 5))}
        resp.append(Respondent(f"r{n}", covs, obs))
    return PanelDataset(resp, sits)


def brute_force_loglik(data, spec, theta, rule="top"):
    S = spec.n_classes
    params = [spec.class_parameters(theta, s) for s in range(S)]
    total = 0.0
    for r in data.respondents:
        scores = []
        for s in range(S):
            m = spec.membership_parameters(theta, s) if s else {}
            scores.append(m.get("intercept", 0.0) + sum(m.get(c, 0.0) * r.covariates[c]
                                                        for c in spec.covariates))
        pis = [math.exp(x) / sum(math.exp(y) for y in scores) for x in scores]
        like = 0.0
        for s in range(S):
            prod = 1.0
            for obs in r.observations:
                v = np.array(hand_utilities(params[s], data.situations[obs.situation_id]))
                e = np.exp(v)
                order = [["train1", "train2", "opt_out"].index(x) for x in obs.ranking]
                if rule == "top":
                    prod *= e[order[0]] / e.sum()
                else:
                    prod *= e[order[0]] / e.sum() * e[order[1]] / (e[order[1]] + e[order[2]])
            like += pis[s] * prod
        total += math.log(like)
    return total


@pytest.mark.parametrize("rule", ["top", "rank"])
def test_mixture_matches_brute_force(paper_spec, rule):
    data = tiny_panel()
    rng = np.random.default_rng(5)
    for _ in range(5):
        theta = rng.uniform(-0.5, 0.5, paper_spec.n_free) * 0.1
        assert lccm_panel_loglik(data, paper_spec, theta, rule) == \
            pytest.approx(brute_force_loglik(data, paper_spec, theta, rule), rel=1e-12)


def test_duplicate_classes_collapse(mnl_spec):
    data = tiny_panel(n_resp=1, n_tasks=1)
    two = build_spec(2, fixed={(1, "membership.intercept"): 0.0})
    th1 = mnl_spec.initial_theta()
    # both classes carry the same taste vector
    k = mnl_spec.n_free
    th2 = np.concatenate([th1, th1])
    assert two.n_free == 2 * k
    assert lccm_panel_loglik(data, two, th2) == pytest.approx(lccm_panel_loglik(data, mnl_spec, th1), rel=1e-13)


def test_class_relabelling_symmetry(small_panel):
    spec = build_spec(3, covariates=("age", "female"))
    rng = np.random.default_rng(1)
    theta = rng.normal(0, 0.3, spec.n_free)
    lik = PanelLikelihood(small_panel, spec)
    idx, _, midx, _ = spec._maps
    swapped = theta.copy()
    for a, b in ((1, 2), (2, 1)):
        swapped[idx[a][idx[a] >= 0]] = theta[idx[b][idx[b] >= 0]]
        swapped[midx[a][midx[a] >= 0]] = theta[midx[b][midx[b] >= 0]]
    assert lik.loglik(swapped) == pytest.approx(lik.loglik(theta), rel=1e-13)


def test_zero_parameters_equal_shares(paper_panel, paper_spec):
    ll = lccm_panel_loglik(paper_panel, paper_spec, np.zeros(paper_spec.n_free))
    assert ll == pytest.approx(paper_panel.n_observations * math.log(1 / 3), rel=1e-13)


def test_probabilities_on_simplex(paper_panel, paper_spec, table3_theta):
    p = PanelLikelihood(paper_panel, paper_spec).choice_probabilities(table3_theta)
    assert np.all((p > 0) & (p < 1))
    assert np.allclose(p.sum(axis=1), 1, atol=1e-12)


def test_gradient_matches_finite_differences(small_panel, paper_spec):
    lik = PanelLikelihood(small_panel, paper_spec)
    scale = np.ones(paper_spec.n_free)
    cols = np.abs(lik.X).max(axis=(0, 1))
    idx = paper_spec._maps[0]
    for s in range(2):
        free = idx[s] >= 0
        scale[idx[s][free]] = cols[free]
    rng = np.random.default_rng(0)
    for rule in ("top", "rank"):
        lik = PanelLikelihood(small_panel, paper_spec, rule)
        for _ in range(5):
            theta = rng.uniform(-1, 1, paper_spec.n_free) / scale
            g = lik.gradient(theta)
            fd = central_fd(lik.loglik, theta, 1e-5 / scale)
            assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6


def test_gradient_small_at_truth(paper_panel, paper_spec, table3_theta):
    lik = PanelLikelihood(paper_panel, paper_spec)
    g = lik.gradient(table3_theta)
    assert g.shape == (23,)
    from lccmkit.estimation import numerical_hessian
    info = -numerical_hessian(lik.gradient, table3_theta)
    stat = g @ np.linalg.solve(info, g)
    # score statistic at the generating values is chi-square(23)
    assert stat < stats.chi2.ppf(0.999, 23)


def test_functional_wrappers_agree(small_panel, paper_spec, table3_theta):
    lik = PanelLikelihood(small_panel, paper_spec)
    assert lccm_panel_loglik(small_panel, paper_spec, table3_theta) == lik.loglik(table3_theta)
    assert np.array_equal(loglik_gradient(small_panel, paper_spec, table3_theta),
                          lik.gradient(table3_theta))


def test_posterior_rows_and_prior(small_panel, paper_spec, table3_theta):
    lik = PanelLikelihood(small_panel, paper_spec)
    post = lik.posterior(table3_theta)
    assert np.allclose(post.sum(axis=1), 1, atol=1e-12)


def test_non_finite_parameter_rejected(small_panel, paper_spec):
    theta = np.zeros(paper_spec.n_free)
    theta[0] = np.inf
    with pytest.raises(NumericError):
        lccm_panel_loglik(small_panel, paper_spec, theta)
