#include "bpe/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "bpe/beta_bernoulli.hpp"
#include "bpe/error.hpp"

namespace bpe {
namespace {

void require_same(const char* what, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require_dim(what, static_cast<std::size_t>(a.size()), static_cast<std::size_t>(b.size()));
}

}  // namespace

// --- Gaussian ---------------------------------------------------------------

void GaussianLikelihoodConfig::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw Error("gaussian: sigma2 must be positive");
  if (!(c > 0.0) || !std::isfinite(c)) throw Error("gaussian: c must be positive");
}

GaussianScalePosterior gauss_lambda_posterior(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                                              const GaussianLikelihoodConfig& cfg) {
  require_same("gaussian scale posterior", x, f);
  cfg.validate();
  GaussianScalePosterior p;
  p.variance = 1.0 / (1.0 / cfg.c + f.squaredNorm() / cfg.sigma2);
  p.mean = p.variance * f.dot(x) / cfg.sigma2;
  return p;
}

double gauss_marginal_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                             const GaussianLikelihoodConfig& cfg) {
  require_same("gaussian marginal", x, f);
  const double s2 = cfg.sigma2;
  const double ff = f.squaredNorm();
  const double fx = f.dot(x);
  const double quad = x.squaredNorm() / s2 - (fx * fx / s2) / (s2 / cfg.c + ff);
  const double D = static_cast<double>(x.size());
  return -0.5 * (std::log1p(cfg.c / s2 * ff) + quad) -
         0.5 * D * std::log(2.0 * std::numbers::pi * s2);
}

double gauss_theta_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                         const GaussianLikelihoodConfig& cfg, const GaussianScalePosterior& post) {
  require_same("gaussian theta bound", x, f);
  return -0.5 / cfg.sigma2 * ((x - post.mean * f).squaredNorm() + post.variance * f.squaredNorm());
}

Eigen::VectorXd gauss_theta_upstream(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                                     const GaussianLikelihoodConfig& cfg,
                                     const GaussianScalePosterior& post) {
  require_same("gaussian theta bound", x, f);
  return (post.mean * (x - post.mean * f) - post.variance * f) / cfg.sigma2;
}

double gauss_theta_dropped_constant(std::size_t D, const GaussianLikelihoodConfig& cfg,
                                    const GaussianScalePosterior& post) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double second_moment = post.mean * post.mean + post.variance;
  return -0.5 * static_cast<double>(D) * std::log(two_pi * cfg.sigma2) -
         0.5 * std::log(two_pi * cfg.c) - 0.5 * second_moment / cfg.c;
}

BoundAndGrad gauss_theta_bound_and_grad(const Eigen::VectorXd& x, const Code& z,
                                        const DecoderNetwork& net,
                                        const GaussianLikelihoodConfig& cfg,
                                        const GaussianScalePosterior& post) {
  const Eigen::VectorXd f = forward(net, z);
  require_same("gaussian theta bound", x, f);
  BoundAndGrad out;
  out.bound = gauss_theta_bound(x, f, cfg, post);
  out.grad = backward(net, z, gauss_theta_upstream(x, f, cfg, post));
  return out;
}

// --- Poisson ----------------------------------------------------------------

Eigen::MatrixXd column_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const double mx = logits.col(t).maxCoeff();
    out.col(t) = (logits.col(t).array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
    out.col(t) /= out.col(t).sum();
  }
  return out;
}

Eigen::MatrixXd random_beta_logits(std::size_t W, std::size_t T, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(W), static_cast<Eigen::Index>(T));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
  return m;
}

PoissonLikelihoodConfig::PoissonLikelihoodConfig(double a, double b, Eigen::MatrixXd beta_logits)
    : a_(a), b_(b) {
  set_beta_logits(std::move(beta_logits));
  validate();
}

void PoissonLikelihoodConfig::set_beta_logits(Eigen::MatrixXd logits) {
  if (!logits.allFinite()) throw NumericError("poisson: non-finite beta logits");
  logits_ = std::move(logits);
  beta_ = column_softmax(logits_);
}

void PoissonLikelihoodConfig::validate() const {
  if (!(a_ > 0.0)) throw Error("poisson: gamma shape prior a must be positive");
  if (!(b_ > 0.0)) throw Error("poisson: gamma rate prior b must be positive");
  if (logits_.size() == 0) throw Error("poisson: empty topic matrix");
}

void validate_counts(const Eigen::VectorXd& x) {
  for (Eigen::Index w = 0; w < x.size(); ++w) {
    if (!(x[w] >= 0.0)) throw Error("poisson: negative count at index " + std::to_string(w));
    if (x[w] != std::floor(x[w]) || !std::isfinite(x[w]))
      throw Error("poisson: non-integral count at index " + std::to_string(w));
  }
}

GammaScalePosterior poiss_lambda_posterior(const Eigen::VectorXd& x, double a, double b) {
  validate_counts(x);
  if (!(a > 0.0) || !(b > 0.0)) throw Error("poisson: gamma prior parameters must be positive");
  return GammaScalePosterior{x.sum() + a, b + 1.0};
}

GammaScalePosterior poiss_lambda_posterior(const Eigen::VectorXd& x,
                                           const PoissonLikelihoodConfig& cfg) {
  return poiss_lambda_posterior(x, cfg.a(), cfg.b());
}

double poiss_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                   const PoissonLikelihoodConfig& cfg, const GammaScalePosterior& post) {
  require_dim("poisson topic distribution", cfg.topic_count(), static_cast<std::size_t>(f.size()));
  require_dim("poisson counts", cfg.vocab_size(), static_cast<std::size_t>(x.size()));
  const Eigen::VectorXd phi = cfg.beta() * f;
  double data = 0.0;
  for (Eigen::Index w = 0; w < x.size(); ++w) {
    if (x[w] == 0.0) continue;
    if (!(phi[w] > 0.0)) return -std::numeric_limits<double>::infinity();
    data += x[w] * std::log(phi[w]);
  }
  return data - post.mean() * phi.sum();
}

double poiss_dropped_constant(const Eigen::VectorXd& x, const PoissonLikelihoodConfig& cfg,
                              const GammaScalePosterior& post) {
  const double e_log = digamma(post.shape) - std::log(post.rate);
  double log_fact = 0.0;
  for (Eigen::Index w = 0; w < x.size(); ++w) log_fact += std::lgamma(x[w] + 1.0);
  const double a = cfg.a();
  const double b = cfg.b();
  const double prior = a * std::log(b) - std::lgamma(a) + (a - 1.0) * e_log - b * post.mean();
  return x.sum() * e_log - log_fact + prior;
}

PoissonUpstream poiss_upstream(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                               const PoissonLikelihoodConfig& cfg, const GammaScalePosterior& post) {
  require_dim("poisson topic distribution", cfg.topic_count(), static_cast<std::size_t>(f.size()));
  require_dim("poisson counts", cfg.vocab_size(), static_cast<std::size_t>(x.size()));
  const Eigen::MatrixXd& beta = cfg.beta();
  const Eigen::VectorXd phi = beta * f;
  Eigen::VectorXd g(x.size());
  for (Eigen::Index w = 0; w < x.size(); ++w) {
    if (x[w] != 0.0 && !(phi[w] > 0.0))
      throw NumericError("poisson: zero rate for an observed word; gradient undefined");
    g[w] = (x[w] == 0.0 ? 0.0 : x[w] / phi[w]) - post.mean();
  }
  PoissonUpstream up;
  up.dphi = g;
  up.df = beta.transpose() * g;
  up.dbeta = g * f.transpose();
  return up;
}

Eigen::MatrixXd beta_logit_gradient(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& dbeta) {
  Eigen::MatrixXd out(beta.rows(), beta.cols());
  for (Eigen::Index t = 0; t < beta.cols(); ++t) {
    const double dot = beta.col(t).dot(dbeta.col(t));
    out.col(t) = (beta.col(t).array() * (dbeta.col(t).array() - dot)).matrix();
  }
  return out;
}

PoissonThetaGrad poiss_theta_grad(const Eigen::VectorXd& x, const Code& z,
                                  const DecoderNetwork& net, const PoissonLikelihoodConfig& cfg,
                                  const GammaScalePosterior& post) {
  const Eigen::VectorXd f = forward(net, z);
  PoissonThetaGrad out;
  out.bound = poiss_bound(x, f, cfg, post);
  const auto up = poiss_upstream(x, f, cfg, post);
  out.net = backward(net, z, up.df);
  out.beta_logits = beta_logit_gradient(cfg.beta(), up.dbeta);
  return out;
}

double poisson_log_pmf(const Eigen::VectorXd& x, const Eigen::VectorXd& rate) {
  require_same("poisson log pmf", x, rate);
  double s = 0.0;
  for (Eigen::Index w = 0; w < x.size(); ++w) {
    if (x[w] == 0.0) {
      s -= rate[w];
      continue;
    }
    if (!(rate[w] > 0.0)) return -std::numeric_limits<double>::infinity();
    s += x[w] * std::log(rate[w]) - rate[w] - std::lgamma(x[w] + 1.0);
  }
  return s;
}

// --- Bernoulli --------------------------------------------------------------

double bern_loglik(const Eigen::VectorXd& x, const Eigen::VectorXd& f) {
  require_same("bernoulli", x, f);
  double s = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d)
    s += x[d] * std::log(f[d]) + (1.0 - x[d]) * std::log1p(-f[d]);
  return s;
}

Eigen::VectorXd bern_upstream(const Eigen::VectorXd& x, const Eigen::VectorXd& f) {
  require_same("bernoulli", x, f);
  return (x.array() / f.array() - (1.0 - x.array()) / (1.0 - f.array())).matrix();
}

BoundAndGrad bern_theta_grad(const Eigen::VectorXd& x, const Code& z, const DecoderNetwork& net) {
  const Eigen::VectorXd f = forward(net, z);
  BoundAndGrad out;
  out.bound = bern_loglik(x, f);
  out.grad = backward(net, z, bern_upstream(x, f));
  return out;
}

// --- Tagged union -----------------------------------------------------------

const char* likelihood_name(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::Gaussian: return "gaussian";
    case LikelihoodKind::Poisson: return "poisson";
    case LikelihoodKind::Bernoulli: return "bernoulli";
  }
  return "?";
}

LikelihoodKind parse_likelihood(const std::string& name) {
  if (name == "gaussian") return LikelihoodKind::Gaussian;
  if (name == "poisson") return LikelihoodKind::Poisson;
  if (name == "bernoulli") return LikelihoodKind::Bernoulli;
  throw Error("unknown likelihood '" + name + "' (expected gaussian, poisson or bernoulli)");
}

LikelihoodKind kind_of(const LikelihoodModel& model) {
  return static_cast<LikelihoodKind>(model.index());
}

Activation final_activation_for(LikelihoodKind kind) {
  return kind == LikelihoodKind::Poisson ? Activation::Softmax : Activation::Sigmoid;
}

}  // namespace bpe
