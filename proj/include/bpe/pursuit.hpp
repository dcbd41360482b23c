#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "bpe/beta_bernoulli.hpp"
#include "bpe/code.hpp"
#include "bpe/likelihood.hpp"
#include "bpe/nn.hpp"

namespace bpe {

/// Scores binary codes for one datum. Implementations must be deterministic and
/// safe to call concurrently through a const reference.
class BoundEvaluator {
 public:
  virtual ~BoundEvaluator() = default;

  virtual std::size_t K() const = 0;
  virtual double score(const Code& z) const = 0;

  /// Scores several codes at once; the default loops over score().
  virtual std::vector<double> score_batch(const std::vector<Code>& codes) const;

  /// Scores base with each candidate bit switched on (candidates must be off in base).
  virtual std::vector<double> score_extensions(const Code& base,
                                               const std::vector<std::size_t>& candidates) const;
};

/// Wraps an arbitrary callable; used for synthetic objectives.
class FunctionEvaluator final : public BoundEvaluator {
 public:
  FunctionEvaluator(std::size_t K, std::function<double(const Code&)> fn)
      : K_(K), fn_(std::move(fn)) {}
  std::size_t K() const override { return K_; }
  double score(const Code& z) const override;

 private:
  std::size_t K_;
  std::function<double(const Code&)> fn_;
};

/// Shared machinery for the three likelihood-specific evaluators: candidate codes
/// are pushed through the decoder as one batch, and the expected log prior is
/// added incrementally from the base code's value.
class DecoderEvaluator : public BoundEvaluator {
 public:
  /// `prior` may be null, in which case only the likelihood term is scored.
  DecoderEvaluator(const DecoderNetwork& net, const PriorTerms* prior);

  std::size_t K() const override { return net_.input_dim(); }
  double score(const Code& z) const override;
  std::vector<double> score_batch(const std::vector<Code>& codes) const override;
  std::vector<double> score_extensions(const Code& base,
                                       const std::vector<std::size_t>& candidates) const override;

 protected:
  /// Likelihood term for one decoder output.
  virtual double likelihood_term(const Eigen::VectorXd& f) const = 0;

 private:
  double prior_score(const Code& z) const;

  const DecoderNetwork& net_;
  const PriorTerms* prior_;
};

/// ln int p(x, lambda | z) dlambda + E[ln p(z | pi)].
class GaussianEvaluator final : public DecoderEvaluator {
 public:
  GaussianEvaluator(Eigen::VectorXd x, const DecoderNetwork& net, const GaussianLikelihoodConfig& cfg,
                    const PriorTerms* prior);

 protected:
  double likelihood_term(const Eigen::VectorXd& f) const override;

 private:
  Eigen::VectorXd x_;
  GaussianLikelihoodConfig cfg_;
};

/// E_q(lambda)[ln p(x, lambda | z)] (z-independent terms dropped) + E[ln p(z | pi)].
class PoissonEvaluator final : public DecoderEvaluator {
 public:
  PoissonEvaluator(Eigen::VectorXd x, const DecoderNetwork& net, const PoissonLikelihoodConfig& cfg,
                   GammaScalePosterior post, const PriorTerms* prior);

 protected:
  double likelihood_term(const Eigen::VectorXd& f) const override;

 private:
  Eigen::VectorXd x_;
  const PoissonLikelihoodConfig& cfg_;
  GammaScalePosterior post_;
};

/// ln p(x | z) + E[ln p(z | pi)].
class BernoulliEvaluator final : public DecoderEvaluator {
 public:
  BernoulliEvaluator(Eigen::VectorXd x, const DecoderNetwork& net, const PriorTerms* prior);

 protected:
  double likelihood_term(const Eigen::VectorXd& f) const override;

 private:
  Eigen::VectorXd x_;
};

struct PursuitResult {
  Code code;
  std::vector<std::size_t> active_set;  // in order of addition
  std::vector<double> trace;            // bound after each accepted addition
  double initial_score = 0.0;           // bound of the empty code
  std::size_t evaluations = 0;          // candidate evaluations, empty code excluded

  double final_score() const { return trace.empty() ? initial_score : trace.back(); }
};

/// Greedy single-bit pursuit. Starts from the empty code and, each round, switches
/// on the bit with the highest resulting bound (lowest index on ties). The bit is
/// kept only if it strictly raises the bound; otherwise the search stops.
/// `max_active` caps |active set| (0 means K).
PursuitResult encode(const BoundEvaluator& eval, std::size_t max_active = 0);

struct ExhaustiveResult {
  Code code;
  double score = 0.0;
};

constexpr std::size_t kMaxExhaustiveK = 16;

/// Exact argmax over all 2^K codes. Ties go to fewer active bits, then to the
/// lexicographically smaller code. Refuses K > 16.
ExhaustiveResult exhaustive_encode(const BoundEvaluator& eval);

using EvaluatorFactory = std::function<std::unique_ptr<BoundEvaluator>(std::size_t index)>;

/// Encodes `count` data independently; results keep input order for any worker count.
std::vector<PursuitResult> batch_encode(std::size_t count, const EvaluatorFactory& factory,
                                        std::size_t workers = 1, std::size_t max_active = 0);

}  // namespace bpe
