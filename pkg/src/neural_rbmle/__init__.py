"""Reward-biased maximum likelihood estimation for neural contextual bandits."""

from .bandit import History, RegretTrace, Round, cumulative_regret, record_round
from .baselines import LinRbmle, NeuralUcb, RandomAgent, lin_rbmle_index, neural_ucb_index, random_policy
from .envs import (
    Dataset,
    DatasetEnv,
    SyntheticEnv,
    load_dataset,
    make_synthetic_env,
    preprocess_context,
    preprocess_many,
    synthetic_env_step,
    to_bandit_contexts,
)
from .errors import ConfigurationError, ContractError, NumericError, ParseError, ShapeError
from .harness import ExperimentConfig, SummaryRow, build_config, run_experiment, run_trial
from .net import (
    NetworkConfig,
    NetworkParams,
    axpy,
    forward,
    forward_many,
    gradient,
    gradient_many,
    init_params,
    param_distance,
)
from .ntk import NtkMatrix, arc_cosine_expectation, effective_dim, linearization_error, ntk_matrix
from .precision import PrecisionMatrix, solve_precision, update_precision
from .rbmle_ga import GaConfig, NeuralRbmleGa, fit_arm_estimator, ga_index, ga_objective, select_arm_ga
from .rbmle_pc import NeuralRbmlePc, PcConfig, correct_params, fit_base_estimator, select_arm_pc
from .surrogate import SurrogateFamily, log_likelihood, make_family

__version__ = "0.1.0"
