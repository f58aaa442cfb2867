import numpy as np
import pytest
from scipy import stats

from lccmkit.core import RankingObservation
from lccmkit.data import PanelDataset, Respondent
from lccmkit.estimation import (BoundaryWarning, FitResult, fit, fit_statistics, standard_errors,
                                stepwise_prune)
from lccmkit.exceptions import EstimationError
from lccmkit.likelihood import PanelLikelihood
from lccmkit.simulate import SimulationConfig, simulate_panel
from lccmkit.spec import build_spec

from conftest import mnl_truth


def test_fit_statistics_formula():
    fs = fit_statistics(-100.0, -200.0, 5, 50)
    assert fs.adjusted_rho2 == pytest.approx(1 - (-105) / -200)
    assert fs.bic == pytest.approx(200 + 5 * np.log(50))
    with pytest.raises(ValueError):
        fit_statistics(-1, -2, 1, 0)


@pytest.fixture(scope="module")
def mnl_data():
    spec = mnl_truth()
    data, _ = simulate_panel(SimulationConfig(spec, n_respondents=500, rng_seed=3))
    return spec, data


@pytest.fixture(scope="module")
def mnl_fit(mnl_data):
    spec, data = mnl_data
    return fit(data, spec, starts=3, seed=0)


def test_single_class_recovery(mnl_data, mnl_fit):
    spec, _ = mnl_data
    res = mnl_fit
    assert res.diagnostics.converged and res.diagnostics.gradient_norm < 1e-6
    z = (res.theta_array - spec.initial_theta()) / res.std_errors
    assert np.all(np.abs(z) < 3)
    assert res.n_observations == 500 * 15 and res.n_params == spec.n_free
    assert res.class_sizes == (1.0,)


def test_starts_agree_on_concave_problem(mnl_fit):
    lls = np.array(mnl_fit.diagnostics.start_logliks)
    assert np.ptp(lls) < 1e-6


def test_derived_reference_has_delta_se(mnl_fit):
    rows = {p.label: p for p in mnl_fit.parameters}
    ref = rows["class1.crowd:5"]
    assert ref.role == "derived" and ref.std_error > 0
    named = [rows[f"class1.crowd:{x}"].value for x in (18, 23, 28, 36)]
    assert ref.value == pytest.approx(-sum(named), abs=1e-12)


def test_result_round_trip(tmp_path, mnl_fit):
    path = tmp_path / "fit.json"
    mnl_fit.save(path)
    again = FitResult.load(path)
    assert again == mnl_fit


@pytest.mark.filterwarnings("ignore::lccmkit.estimation.BoundaryWarning")
def test_seed_reproducible(small_panel, paper_spec):
    a = fit(small_panel, paper_spec, starts=2, seed=9)
    b = fit(small_panel, paper_spec, starts=2, seed=9)
    assert a.theta == b.theta and a.final_ll == b.final_ll


@pytest.mark.filterwarnings("ignore::lccmkit.estimation.BoundaryWarning")
def test_more_starts_never_worse(small_panel, paper_spec):
    # with the same seed the first starts coincide, so the best can only improve
    few = fit(small_panel, paper_spec, starts=1, seed=4)
    many = fit(small_panel, paper_spec, starts=3, seed=4)
    assert many.final_ll >= few.final_ll - 1e-9


@pytest.mark.filterwarnings("ignore::lccmkit.estimation.BoundaryWarning")
def test_threads_match_serial(small_panel, paper_spec):
    a = fit(small_panel, paper_spec, starts=2, seed=1)
    b = fit(small_panel, paper_spec, starts=2, seed=1, n_jobs=2)
    assert np.allclose(a.theta, b.theta, atol=1e-10)


def test_initial_ll_default_and_override(mnl_data, mnl_fit):
    spec, data = mnl_data
    assert mnl_fit.initial_ll == pytest.approx(data.n_observations * np.log(1 / 3))
    res = fit(data, spec, starts=1, seed=0, initial_ll=-9000.0)
    assert res.adjusted_rho2 == pytest.approx(1 - (res.final_ll - res.n_params) / -9000.0)


def test_robust_errors_close_under_correct_model(mnl_data, mnl_fit):
    spec, data = mnl_data
    lik = PanelLikelihood(data, spec)
    rob = standard_errors(lik, mnl_fit.theta_array, robust=True)
    ratio = rob.std_errors / mnl_fit.std_errors
    assert np.all((ratio > 0.7) & (ratio < 1.4))


def test_always_opt_out_is_flagged():
    spec = build_spec(1)
    data, _ = simulate_panel(SimulationConfig(mnl_truth(), n_respondents=40, rng_seed=1))
    resp = [Respondent(r.respondent_id, r.covariates,
                       [RankingObservation(o.situation_id, ("opt_out", "train1", "train2"))
                        for o in r.observations]) for r in data.respondents]
    degenerate = PanelDataset(resp, data.situations)
    with pytest.warns(BoundaryWarning):
        try:
            res = fit(degenerate, spec, starts=1, seed=0)
        except EstimationError as exc:
            res = exc.best
    assert any("opt_out" in b for b in res.diagnostics.boundary)


def test_singular_hessian_reported(small_panel, paper_spec, table3_theta):
    # a constant covariate is collinear with the membership intercept
    resp = [Respondent(r.respondent_id, {**r.covariates, "female": 1.0}, r.observations)
            for r in small_panel.respondents]
    data = PanelDataset(resp, small_panel.situations)
    ses = standard_errors(PanelLikelihood(data, paper_spec), table3_theta)
    names = [paper_spec.free_names[i] for i in ses.singular]
    assert "class2.membership.intercept" in names and "class2.membership.female" in names
    assert ses.condition > 1e8
    assert all(np.isnan(ses.std_errors[i]) for i in ses.singular)
    regular = standard_errors(PanelLikelihood(small_panel, paper_spec), table3_theta)
    assert regular.singular == ()


@pytest.mark.slow
def test_standard_errors_match_sampling_spread():
    spec = mnl_truth()
    truth = spec.initial_theta()
    est, ses = [], []
    for r in range(50):
        data, _ = simulate_panel(SimulationConfig(spec, n_respondents=200, rng_seed=1000 + r))
        res = fit(data, spec, starts=1, seed=r, init="spec")
        est.append(res.theta_array)
        ses.append(res.std_errors)
    est, ses = np.array(est), np.array(ses)
    ratio = ses.mean(axis=0) / est.std(axis=0, ddof=1)
    assert np.all(np.abs(ratio - 1) < 0.2 + 3 * np.sqrt(1 / (2 * 49)))
    assert np.mean(np.abs(ratio - 1) < 0.2) > 0.8
    z = (est - truth) / ses
    assert abs(z.mean()) < 0.2


@pytest.mark.slow
def test_p_values_uniform_for_null_parameter():
    values = {(0, "crowd_x_infect"): 0.0, (0, "wt"): -0.05, (0, "opt_out"): -1.0}
    spec = build_spec(1, values=values)
    i = spec.free_names.index("class1.crowd_x_infect")
    pvals = []
    for r in range(60):
        data, _ = simulate_panel(SimulationConfig(spec, n_respondents=100, rng_seed=5000 + r))
        res = fit(data, spec, starts=1, seed=r, init="spec")
        pvals.append([p.p_value for p in res.parameters if p.label == "class1.crowd_x_infect"][0])
    assert stats.kstest(pvals, "uniform").pvalue > 0.01


def test_stepwise_prune_removes_null_terms(mnl_data):
    spec, data = mnl_data
    pruned, removed = stepwise_prune(data, spec, alpha=0.10, starts=1, seed=0)
    for label in removed:
        row = [p for p in pruned.parameters if p.label == label][0]
        assert row.role == "fixed" and row.value == 0.0
    assert all(p.p_value <= 0.10 for p in pruned.parameters
               if p.role == "free" and p.p_value is not None)
