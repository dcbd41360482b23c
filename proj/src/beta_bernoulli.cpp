#include "bpe/beta_bernoulli.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "bpe/binary_io.hpp"
#include "bpe/error.hpp"

namespace bpe {

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw Error("digamma requires a finite positive argument, got " + std::to_string(x));
  // Shift up with psi(x) = psi(x+1) - 1/x until the asymptotic series is accurate.
  double shift = 0.0;
  while (x < 6.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number series: B_2n / (2n x^2n).
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

BetaProcessConfig BetaProcessConfig::with_defaults(std::size_t K) {
  BetaProcessConfig cfg;
  cfg.K = K;
  cfg.alpha = 1.0;
  cfg.gamma_mass = static_cast<double>(K) / 5.0;
  return cfg;
}

double BetaProcessConfig::prior_a() const { return alpha * gamma_mass / static_cast<double>(K); }

double BetaProcessConfig::prior_b() const {
  return alpha * (1.0 - gamma_mass / static_cast<double>(K));
}

void BetaProcessConfig::validate() const {
  if (K == 0) throw Error("beta process: K must be positive");
  if (!(alpha > 0.0)) throw Error("beta process: alpha must be positive");
  if (!(gamma_mass > 0.0)) throw Error("beta process: gamma must be positive");
  if (!(gamma_mass < static_cast<double>(K)))
    throw Error("beta process: gamma must be smaller than K");
  if (!(eta.t0 >= 1.0)) throw Error("eta schedule: t0 must be >= 1 so that eta_0 <= 1");
  if (!(eta.kappa > 0.0)) throw Error("eta schedule: kappa must be positive");
}

BetaPosterior BetaPosterior::from_prior(const BetaProcessConfig& cfg) {
  cfg.validate();
  BetaPosterior p;
  const auto K = static_cast<Eigen::Index>(cfg.K);
  p.a = Eigen::VectorXd::Constant(K, cfg.prior_a());
  p.b = Eigen::VectorXd::Constant(K, cfg.prior_b());
  return p;
}

PriorTerms::PriorTerms(const BetaPosterior& post) : on(post.a.size()), off(post.a.size()) {
  for (Eigen::Index k = 0; k < post.a.size(); ++k) {
    const double total = digamma(post.a[k] + post.b[k]);
    on[k] = digamma(post.a[k]) - total;
    off[k] = digamma(post.b[k]) - total;
  }
  empty_code = off.sum();
}

double PriorTerms::score(const Code& z) const {
  validate_code(z, static_cast<std::size_t>(on.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    s += z[k] ? on[i] : off[i];
  }
  return s;
}

double expected_log_prior(const Code& z, const BetaPosterior& post) {
  return PriorTerms(post).score(z);
}

BetaPosterior natural_grad_update(const BetaPosterior& post, const std::vector<Code>& batch_codes,
                                  std::size_t N, double eta, const BetaProcessConfig& cfg) {
  if (batch_codes.empty()) throw Error("natural_grad_update: empty batch");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error("natural_grad_update: eta must lie in [0,1]");
  if (N < batch_codes.size()) throw Error("natural_grad_update: batch larger than dataset");
  const std::size_t K = post.K();
  require_dim("beta process K", cfg.K, K);

  std::vector<std::uint64_t> on(K, 0);
  for (const auto& z : batch_codes) {
    validate_code(z, K);
    for (std::size_t k = 0; k < K; ++k) on[k] += z[k];
  }
  const auto S = static_cast<std::uint64_t>(batch_codes.size());
  const double scale = static_cast<double>(N) / static_cast<double>(S);

  BetaPosterior next = post;
  for (std::size_t k = 0; k < K; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double a_target = cfg.prior_a() + scale * static_cast<double>(on[k]);
    const double b_target = cfg.prior_b() + scale * static_cast<double>(S - on[k]);
    next.a[i] = (1.0 - eta) * post.a[i] + eta * a_target;
    next.b[i] = (1.0 - eta) * post.b[i] + eta * b_target;
  }
  next.step_count = post.step_count + 1;
  return next;
}

double eta_at(std::uint64_t t, const EtaSchedule& schedule) {
  return std::pow(schedule.t0 + static_cast<double>(t), -schedule.kappa);
}

Eigen::VectorXd activation_probabilities(const std::vector<Code>& codes, std::size_t K) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  if (codes.empty()) return p;
  for (const auto& z : codes) {
    validate_code(z, K);
    for (std::size_t k = 0; k < K; ++k) p[static_cast<Eigen::Index>(k)] += z[k];
  }
  return p / static_cast<double>(codes.size());
}

void write_beta_posterior(std::ostream& os, const BetaPosterior& post) {
  using namespace binio;
  put_u64(os, post.K());
  put_u64(os, post.step_count);
  put_array(os, post.a);
  put_array(os, post.b);
}

BetaPosterior read_beta_posterior(std::istream& is) {
  using namespace binio;
  const auto K = get_u64(is);
  if (K == 0 || K > (1u << 20)) throw FormatError("implausible K in beta posterior");
  BetaPosterior p;
  p.step_count = get_u64(is);
  p.a.resize(static_cast<Eigen::Index>(K));
  p.b.resize(static_cast<Eigen::Index>(K));
  get_array(is, p.a);
  get_array(is, p.b);
  return p;
}

}  // namespace bpe
