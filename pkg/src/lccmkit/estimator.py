"""scikit-learn style wrapper around :func:`lccmkit.estimation.fit`."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_panel, check_seed, check_spec
from .core import ALTERNATIVES
from .estimation import fit as _fit
from .likelihood import PanelLikelihood


class LatentClassChoiceModel(BaseEstimator):
    """Latent class logit for ranked choices with panel effects.

    ``X`` is a :class:`~lccmkit.data.PanelDataset` or a data frame in the
    dataset CSV layout; rankings are part of ``X``, so ``y`` is ignored.

    Parameters
    ----------
    spec : ModelSpec or str, default="paper-2class"
        Model structure, a built-in name or a JSON path.
    n_starts : int, default=20
        Random starting points for the optimiser.
    choice_rule : {"top", "rank"}, default="top"
        Top-choice logit or exploded logit over the full ranking.
    tol : float, default=1e-6
        Convergence threshold on the gradient infinity norm.
    max_iter : int, default=1000
    random_state : int or None
    n_jobs : int or None
        Threads used for the starts.
    robust_se : bool, default=False
        Sandwich instead of inverse-Hessian standard errors.
    initial_ll : float or None
        Reference log-likelihood for adjusted rho-squared; defaults to the
        log-likelihood at zero free parameters.

    Attributes
    ----------
    result_ : FitResult
    coef_ : ndarray of shape (n_free,)
    class_sizes_ : ndarray of shape (n_classes,)
    loglik_ : float
    n_iter_ : int
    """

    def __init__(self, spec="paper-2class", n_starts=20, choice_rule="top", tol=1e-6,
                 max_iter=1000, random_state=None, n_jobs=None, robust_se=False,
                 initial_ll=None):
        self.spec = spec
        self.n_starts = n_starts
        self.choice_rule = choice_rule
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.robust_se = robust_se
        self.initial_ll = initial_ll

    def fit(self, X, y=None):
        spec = check_spec(self.spec)
        data = check_panel(X, spec)
        self.result_ = _fit(data, spec, starts=self.n_starts, seed=check_seed(self.random_state),
                            tol=self.tol, max_iter=self.max_iter, rule=self.choice_rule,
                            initial_ll=self.initial_ll, robust=self.robust_se,
                            n_jobs=self.n_jobs or 1)
        self.spec_ = spec
        self.coef_ = self.result_.theta_array
        self.class_sizes_ = np.asarray(self.result_.class_sizes)
        self.loglik_ = self.result_.final_ll
        self.n_iter_ = self.result_.diagnostics.iterations
        self.feature_names_in_ = np.asarray(spec.free_names, dtype=object)
        return self

    def _likelihood(self, X) -> PanelLikelihood:
        check_is_fitted(self, "result_")
        return PanelLikelihood(check_panel(X, self.spec_), self.spec_, self.result_.rule)

    def predict_proba(self, X) -> np.ndarray:
        """``(n_obs, 3)`` top-choice probabilities, mixed over prior class shares."""
        return self._likelihood(X).choice_probabilities(self.coef_)

    def predict(self, X) -> np.ndarray:
        """Most probable top-ranked alternative per observation."""
        return np.asarray(ALTERNATIVES, dtype=object)[self.predict_proba(X).argmax(axis=1)]

    def predict_class_proba(self, X) -> np.ndarray:
        """``(n_respondents, n_classes)`` posterior class probabilities."""
        return self._likelihood(X).posterior(self.coef_)

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per choice observation."""
        lik = self._likelihood(X)
        return lik.loglik(self.coef_) / lik.n_obs
