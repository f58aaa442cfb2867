"""Latent class choice models for ranked stated-choice data."""
from .analysis import (class_profile, descriptive_shares, opt_out_curve, posterior_membership,
                       scaled_impacts, uncrowded_vs_crowded_wait, value_of_crowding)
from .core import (ALTERNATIVES, Alternative, AttributeSchema, ChoiceSituation,
                   RankingObservation, effect_code, paper_schema)
from .data import PanelDataset, Respondent, read_dataset_csv, validate_dataset, write_dataset_csv
from .design import (DesignConfig, filter_dominated_and_symmetric, full_factorial, generate_design,
                     make_blocks)
from .estimation import FitResult, fit, fit_statistics, standard_errors, stepwise_prune
from .estimator import LatentClassChoiceModel
from .exceptions import (ConfigError, DataError, EstimationError, LCCMError, NumericError,
                         SchemaError, SpecError)
from .likelihood import (MembershipModel, PanelLikelihood, class_membership_probabilities,
                         lccm_panel_loglik, loglik_gradient, mnl_probabilities,
                         rmnl_ranking_probability)
from .simulate import (SimulationConfig, assign_classes, recovery_experiment, simulate_dataset,
                       simulate_panel, simulate_rankings)
from .spec import (ModelSpec, ParameterSpec, Term, UtilitySpec, build_spec, expand_utility_row,
                   load_model_spec, paper_2class_spec)

__all__ = [name for name in dir() if not name.startswith("_")]
