"""Beta-Bernoulli process sparse coding."""

from ._bpe import (
    Error,
    Model,
    config_keys,
    exhaustive_encode,
    fingerprint,
    gauss_lambda_posterior,
    gauss_marginal_loglik,
    generate_synthetic,
    greedy_encode,
    hoyer,
    poiss_lambda_posterior,
    sparsity,
    train,
)

__all__ = [
    "Error",
    "Model",
    "config_keys",
    "exhaustive_encode",
    "fingerprint",
    "gauss_lambda_posterior",
    "gauss_marginal_loglik",
    "generate_synthetic",
    "greedy_encode",
    "hoyer",
    "poiss_lambda_posterior",
    "sparsity",
    "train",
]
