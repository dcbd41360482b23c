#include "bpe/pursuit.hpp"

#include <algorithm>
#include <limits>

#include "bpe/error.hpp"
#include "bpe/parallel.hpp"

namespace bpe {

std::vector<double> BoundEvaluator::score_batch(const std::vector<Code>& codes) const {
  std::vector<double> out;
  out.reserve(codes.size());
  for (const auto& z : codes) out.push_back(score(z));
  return out;
}

std::vector<double> BoundEvaluator::score_extensions(
    const Code& base, const std::vector<std::size_t>& candidates) const {
  std::vector<Code> codes;
  codes.reserve(candidates.size());
  for (auto j : candidates) {
    Code z = base;
    z[j] = 1;
    codes.push_back(std::move(z));
  }
  return score_batch(codes);
}

double FunctionEvaluator::score(const Code& z) const {
  validate_code(z, K_);
  return fn_(z);
}

// --- Decoder-backed evaluators ---------------------------------------------

DecoderEvaluator::DecoderEvaluator(const DecoderNetwork& net, const PriorTerms* prior)
    : net_(net), prior_(prior) {
  if (prior_ != nullptr)
    require_dim("prior terms", net_.input_dim(), static_cast<std::size_t>(prior_->on.size()));
}

double DecoderEvaluator::prior_score(const Code& z) const {
  return prior_ == nullptr ? 0.0 : prior_->score(z);
}

double DecoderEvaluator::score(const Code& z) const {
  return likelihood_term(forward(net_, z)) + prior_score(z);
}

std::vector<double> DecoderEvaluator::score_batch(const std::vector<Code>& codes) const {
  std::vector<double> out(codes.size());
  if (codes.empty()) return out;
  const Eigen::MatrixXd f = forward_batch(net_, codes_to_matrix(codes, K()));
  for (std::size_t j = 0; j < codes.size(); ++j)
    out[j] = likelihood_term(f.col(static_cast<Eigen::Index>(j))) + prior_score(codes[j]);
  return out;
}

std::vector<double> DecoderEvaluator::score_extensions(
    const Code& base, const std::vector<std::size_t>& candidates) const {
  validate_code(base, K());
  std::vector<double> out(candidates.size());
  if (candidates.empty()) return out;
  const auto K_rows = static_cast<Eigen::Index>(K());
  Eigen::MatrixXd codes(K_rows, static_cast<Eigen::Index>(candidates.size()));
  codes.colwise() = code_to_vector(base);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j] >= K() || base[candidates[j]])
      throw Error("score_extensions: candidate bit already set or out of range");
    codes(static_cast<Eigen::Index>(candidates[j]), static_cast<Eigen::Index>(j)) = 1.0;
  }
  const Eigen::MatrixXd f = forward_batch(net_, codes);
  const double base_prior = prior_score(base);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const double prior = prior_ == nullptr ? 0.0 : base_prior + prior_->gain(candidates[j]);
    out[j] = likelihood_term(f.col(static_cast<Eigen::Index>(j))) + prior;
  }
  return out;
}

GaussianEvaluator::GaussianEvaluator(Eigen::VectorXd x, const DecoderNetwork& net,
                                     const GaussianLikelihoodConfig& cfg, const PriorTerms* prior)
    : DecoderEvaluator(net, prior), x_(std::move(x)), cfg_(cfg) {
  require_dim("gaussian datum", net.output_dim(), static_cast<std::size_t>(x_.size()));
}

double GaussianEvaluator::likelihood_term(const Eigen::VectorXd& f) const {
  return gauss_marginal_loglik(x_, f, cfg_);
}

PoissonEvaluator::PoissonEvaluator(Eigen::VectorXd x, const DecoderNetwork& net,
                                   const PoissonLikelihoodConfig& cfg, GammaScalePosterior post,
                                   const PriorTerms* prior)
    : DecoderEvaluator(net, prior), x_(std::move(x)), cfg_(cfg), post_(post) {
  require_dim("poisson topic count", cfg.topic_count(), net.output_dim());
  require_dim("poisson datum", cfg.vocab_size(), static_cast<std::size_t>(x_.size()));
}

double PoissonEvaluator::likelihood_term(const Eigen::VectorXd& f) const {
  return poiss_bound(x_, f, cfg_, post_);
}

BernoulliEvaluator::BernoulliEvaluator(Eigen::VectorXd x, const DecoderNetwork& net,
                                       const PriorTerms* prior)
    : DecoderEvaluator(net, prior), x_(std::move(x)) {
  require_dim("bernoulli datum", net.output_dim(), static_cast<std::size_t>(x_.size()));
}

double BernoulliEvaluator::likelihood_term(const Eigen::VectorXd& f) const {
  return bern_loglik(x_, f);
}

// --- Pursuit ----------------------------------------------------------------

PursuitResult encode(const BoundEvaluator& eval, std::size_t max_active) {
  const std::size_t K = eval.K();
  const std::size_t cap = (max_active == 0 || max_active > K) ? K : max_active;

  PursuitResult r;
  r.code.assign(K, 0);
  r.initial_score = eval.score(r.code);
  double best_so_far = r.initial_score;

  std::vector<std::size_t> candidates;
  while (r.active_set.size() < cap) {
    candidates.clear();
    for (std::size_t j = 0; j < K; ++j)
      if (!r.code[j]) candidates.push_back(j);
    const auto scores = eval.score_extensions(r.code, candidates);
    r.evaluations += candidates.size();

    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    if (!(scores[best] > best_so_far)) break;

    r.code[candidates[best]] = 1;
    r.active_set.push_back(candidates[best]);
    r.trace.push_back(scores[best]);
    best_so_far = scores[best];
  }
  return r;
}

ExhaustiveResult exhaustive_encode(const BoundEvaluator& eval) {
  const std::size_t K = eval.K();
  if (K > kMaxExhaustiveK)
    throw Error("exhaustive_encode: K=" + std::to_string(K) + " exceeds the limit of " +
                std::to_string(kMaxExhaustiveK));

  auto better = [](double s, const Code& z, double best_s, const Code& best_z) {
    if (s != best_s) return s > best_s;
    const auto n = active_count(z), best_n = active_count(best_z);
    if (n != best_n) return n < best_n;
    return z < best_z;
  };

  ExhaustiveResult best{Code(K, 0), -std::numeric_limits<double>::infinity()};
  bool first = true;
  const std::uint64_t total = 1ull << K;
  constexpr std::uint64_t kChunk = 512;
  std::vector<Code> chunk;
  for (std::uint64_t start = 0; start < total; start += kChunk) {
    chunk.clear();
    for (std::uint64_t m = start; m < std::min(total, start + kChunk); ++m) {
      Code z(K, 0);
      for (std::size_t k = 0; k < K; ++k) z[k] = static_cast<std::uint8_t>((m >> k) & 1u);
      chunk.push_back(std::move(z));
    }
    const auto scores = eval.score_batch(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (first || better(scores[i], chunk[i], best.score, best.code)) {
        best.code = chunk[i];
        best.score = scores[i];
        first = false;
      }
    }
  }
  return best;
}

std::vector<PursuitResult> batch_encode(std::size_t count, const EvaluatorFactory& factory,
                                        std::size_t workers, std::size_t max_active) {
  std::vector<PursuitResult> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    const auto eval = factory(i);
    out[i] = encode(*eval, max_active);
  });
  return out;
}

}  // namespace bpe
