"""Futures pricing and optimal futures portfolios under the multiscale
central tendency Ornstein-Uhlenbeck (MCTOU) model."""

from .model import (InvalidParameters, ModelMatrices, ModelParams, assemble_matrices,
                    lambda_from_zeta, table1_params, validate_params)
from .strategy import (InvalidPortfolio, NumericalError, PortfolioSpec, RedundantContractError,
                       certainty_equivalent, lambda_squared, optimal_strategy, value_function)
from .term_structure import ContractSpec, FactorState, beta_intercept, futures_price, loading_vector

__all__ = [
    "ContractSpec", "FactorState", "InvalidParameters", "InvalidPortfolio", "ModelMatrices",
    "ModelParams", "NumericalError", "PortfolioSpec", "RedundantContractError",
    "assemble_matrices", "beta_intercept", "certainty_equivalent", "futures_price",
    "lambda_from_zeta", "lambda_squared", "loading_vector", "optimal_strategy",
    "table1_params", "validate_params", "value_function",
]
