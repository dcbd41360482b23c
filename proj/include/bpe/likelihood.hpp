#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "bpe/code.hpp"
#include "bpe/nn.hpp"

namespace bpe {

// ---------------------------------------------------------------------------
// Gaussian observations with a Gaussian scale:
//   lambda_n ~ N(0, c),  x_n ~ N(lambda_n f(z_n), sigma2 I)
// ---------------------------------------------------------------------------

struct GaussianLikelihoodConfig {
  double sigma2 = 0.1;
  double c = 1.0;
  void validate() const;
};

struct GaussianScalePosterior {
  double mean = 0.0;
  double variance = 0.0;
};

GaussianScalePosterior gauss_lambda_posterior(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                                              const GaussianLikelihoodConfig& cfg);

/// ln of the integral over lambda of p(x, lambda | f), including the
/// -(D/2) ln(2 pi sigma2) normalizer.
double gauss_marginal_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                             const GaussianLikelihoodConfig& cfg);

struct BoundAndGrad {
  double bound = 0.0;
  GradientBuffer grad;
};

/// Expected complete-data log likelihood under a frozen q(lambda), keeping only
/// the terms that move with f:  -(1/2 sigma2) [ ||x - mu f||^2 + s2 f'f ].
double gauss_theta_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                         const GaussianLikelihoodConfig& cfg, const GaussianScalePosterior& post);

/// dL/df of gauss_theta_bound.
Eigen::VectorXd gauss_theta_upstream(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                                     const GaussianLikelihoodConfig& cfg,
                                     const GaussianScalePosterior& post);

/// Everything gauss_theta_bound drops from E_q[ln N(x; lambda f, sigma2 I) + ln N(lambda; 0, c)].
double gauss_theta_dropped_constant(std::size_t D, const GaussianLikelihoodConfig& cfg,
                                    const GaussianScalePosterior& post);

BoundAndGrad gauss_theta_bound_and_grad(const Eigen::VectorXd& x, const Code& z,
                                        const DecoderNetwork& net,
                                        const GaussianLikelihoodConfig& cfg,
                                        const GaussianScalePosterior& post);

// ---------------------------------------------------------------------------
// Poisson counts with a Gamma scale and a column-stochastic topic matrix:
//   lambda_n ~ Gamma(a, b),  x_n ~ Poiss(lambda_n beta f(z_n))
// ---------------------------------------------------------------------------

/// beta columns are the softmax of the matching logit columns.
class PoissonLikelihoodConfig {
 public:
  PoissonLikelihoodConfig() = default;
  PoissonLikelihoodConfig(double a, double b, Eigen::MatrixXd beta_logits);

  double a() const { return a_; }
  double b() const { return b_; }
  std::size_t vocab_size() const { return static_cast<std::size_t>(logits_.rows()); }
  std::size_t topic_count() const { return static_cast<std::size_t>(logits_.cols()); }

  const Eigen::MatrixXd& beta_logits() const { return logits_; }
  const Eigen::MatrixXd& beta() const { return beta_; }

  /// Replaces the logits and refreshes beta.
  void set_beta_logits(Eigen::MatrixXd logits);

  void validate() const;

 private:
  double a_ = 1.0;
  double b_ = 1.0;
  Eigen::MatrixXd logits_;
  Eigen::MatrixXd beta_;
};

/// Random logits, uniform in +-scale, drawn from a seeded generator.
Eigen::MatrixXd random_beta_logits(std::size_t W, std::size_t T, double scale, std::uint64_t seed);

/// Column-wise softmax.
Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits);

struct GammaScalePosterior {
  double shape = 1.0;
  double rate = 1.0;
  double mean() const { return shape / rate; }
};

/// Throws on negative or non-integral counts.
void validate_counts(const Eigen::VectorXd& x);

/// Gamma(sum(x) + a, b + 1). Takes only the prior hyperparameters so that it
/// cannot depend on the decoder or on beta.
GammaScalePosterior poiss_lambda_posterior(const Eigen::VectorXd& x, double a, double b);
GammaScalePosterior poiss_lambda_posterior(const Eigen::VectorXd& x,
                                           const PoissonLikelihoodConfig& cfg);

/// sum_w [ x_w ln phi_w - E[lambda] phi_w ] with phi = beta f.
/// Returns -infinity when some phi_w = 0 has x_w > 0.
double poiss_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                   const PoissonLikelihoodConfig& cfg, const GammaScalePosterior& post);

/// Terms poiss_bound drops from E_q[ln Poiss(x | lambda phi) + ln Gamma(lambda; a, b)]:
/// sum_w x_w E[ln lambda] - sum_w ln x_w! + E_q[ln Gamma(lambda; a, b)].
double poiss_dropped_constant(const Eigen::VectorXd& x, const PoissonLikelihoodConfig& cfg,
                              const GammaScalePosterior& post);

struct PoissonThetaGrad {
  double bound = 0.0;
  GradientBuffer net;
  Eigen::MatrixXd beta_logits;  // W x T
};

/// dL/df and dL/d(beta) for a given decoder output f.
struct PoissonUpstream {
  Eigen::VectorXd dphi;   // W, x/phi - E[lambda]
  Eigen::VectorXd df;     // T
  Eigen::MatrixXd dbeta;  // W x T
};
PoissonUpstream poiss_upstream(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                               const PoissonLikelihoodConfig& cfg, const GammaScalePosterior& post);

/// Pulls a gradient with respect to beta back onto its logits.
Eigen::MatrixXd beta_logit_gradient(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& dbeta);

PoissonThetaGrad poiss_theta_grad(const Eigen::VectorXd& x, const Code& z,
                                  const DecoderNetwork& net, const PoissonLikelihoodConfig& cfg,
                                  const GammaScalePosterior& post);

/// Fully normalized ln Poiss(x | rate) summed over coordinates.
double poisson_log_pmf(const Eigen::VectorXd& x, const Eigen::VectorXd& rate);

// ---------------------------------------------------------------------------
// Bernoulli observations: x_n ~ Bern(f(z_n)).
// ---------------------------------------------------------------------------

double bern_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& f);

/// x/f - (1-x)/(1-f).
Eigen::VectorXd bern_upstream(const Eigen::VectorXd& x, const Eigen::VectorXd& f);

BoundAndGrad bern_theta_grad(const Eigen::VectorXd& x, const Code& z, const DecoderNetwork& net);

// ---------------------------------------------------------------------------

struct BernoulliLikelihood {};

enum class LikelihoodKind { Gaussian, Poisson, Bernoulli };

const char* likelihood_name(LikelihoodKind kind);
LikelihoodKind parse_likelihood(const std::string& name);

/// Tagged union over the three observation models.
using LikelihoodModel =
    std::variant<GaussianLikelihoodConfig, PoissonLikelihoodConfig, BernoulliLikelihood>;

LikelihoodKind kind_of(const LikelihoodModel& model);

/// Decoder final activation each model expects.
Activation final_activation_for(LikelihoodKind kind);

}  // namespace bpe
