#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "bpe/code.hpp"

namespace bpe {

/// Digamma function for x > 0, accurate to about 1e-12.
double digamma(double x);

struct EtaSchedule {
  double t0 = 1.0;
  double kappa = 0.7;
};

/// Finite-K beta process: pi_k ~ Beta(alpha*gamma/K, alpha*(1 - gamma/K)).
struct BetaProcessConfig {
  double alpha = 1.0;
  double gamma_mass = 1.0;
  std::size_t K = 5;
  EtaSchedule eta;

  /// Defaults with gamma = K/5.
  static BetaProcessConfig with_defaults(std::size_t K);

  double prior_a() const;
  double prior_b() const;
  void validate() const;
};

/// q(pi) = prod_k Beta(a_k, b_k).
struct BetaPosterior {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  std::uint64_t step_count = 0;

  std::size_t K() const { return static_cast<std::size_t>(a.size()); }

  /// Starts at the prior.
  static BetaPosterior from_prior(const BetaProcessConfig& cfg);
};

/// Per-dimension expected log prior contributions:
/// on_k = psi(a_k) - psi(a_k+b_k), off_k = psi(b_k) - psi(a_k+b_k).
struct PriorTerms {
  Eigen::VectorXd on;
  Eigen::VectorXd off;
  double empty_code = 0.0;  // sum of off_k

  explicit PriorTerms(const BetaPosterior& post);

  double score(const Code& z) const;
  /// Change in score from switching bit k on, starting from a code where it is off.
  double gain(std::size_t k) const { return on[static_cast<Eigen::Index>(k)] - off[static_cast<Eigen::Index>(k)]; }
};

/// E_q(pi)[ln p(z | pi)].
double expected_log_prior(const Code& z, const BetaPosterior& post);

/// Stochastic natural-gradient step toward the batch-estimated conjugate
/// posterior, scaled to a dataset of size N.
BetaPosterior natural_grad_update(const BetaPosterior& post, const std::vector<Code>& batch_codes,
                                  std::size_t N, double eta, const BetaProcessConfig& cfg);

/// eta_t = (t0 + t)^-kappa.
double eta_at(std::uint64_t t, const EtaSchedule& schedule);

/// Per-dimension empirical mean of z_k.
Eigen::VectorXd activation_probabilities(const std::vector<Code>& codes, std::size_t K);

void write_beta_posterior(std::ostream& os, const BetaPosterior& post);
BetaPosterior read_beta_posterior(std::istream& is);

}  // namespace bpe
