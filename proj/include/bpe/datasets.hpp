#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bpe/beta_bernoulli.hpp"
#include "bpe/code.hpp"
#include "bpe/likelihood.hpp"
#include "bpe/nn.hpp"

namespace bpe {

/// Where a dataset came from and what was done to it, in order.
struct Provenance {
  std::string source;
  std::vector<std::string> transforms;

  Provenance then(std::string step) const;
  /// "# provenance.source: ..." / "# provenance.transform: ..." lines.
  void write_header(std::ostream& os) const;
};

struct DenseDataset {
  Eigen::MatrixXd values;  // N x D, one datum per row
  std::vector<int> labels;  // empty or N entries
  Provenance provenance;

  std::size_t N() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t D() const { return static_cast<std::size_t>(values.cols()); }
};

struct CountDataset {
  Eigen::MatrixXi counts;  // N x W
  std::vector<std::string> vocabulary;
  std::vector<long> doc_ids;  // source id of each retained row
  Provenance provenance;

  std::size_t N() const { return static_cast<std::size_t>(counts.rows()); }
  std::size_t W() const { return static_cast<std::size_t>(counts.cols()); }
  Eigen::MatrixXd as_real() const { return counts.cast<double>(); }
};

// --- IDX -------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image file (and optionally its label file); pixels scaled to [0,1].
DenseDataset read_idx(const std::string& images_path, const std::string& labels_path = {});

/// Writes unsigned-byte IDX images; values are clamped to [0,1] and rounded to /255.
void write_idx_images(const std::string& path, const Eigen::MatrixXd& values, std::size_t rows,
                      std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

// --- Transforms --------------------------------------------------------------

/// Entries >= threshold become 1, the rest 0.
DenseDataset binarize(const DenseDataset& ds, double threshold = 0.5);

/// Per-datum multipliers 1 + u_n with u_n ~ U(-scale_max, scale_max).
Eigen::VectorXd sample_scale_factors(std::size_t N, double scale_max, std::uint64_t seed);

/// Multiplies each datum by its own factor from sample_scale_factors.
DenseDataset scale_corrupt(const DenseDataset& ds, double scale_max, std::uint64_t seed);

// --- Text formats ------------------------------------------------------------

/// Bag-of-words counts: lines "doc_id token_id count" (0-based ids, '#' comments),
/// plus a vocabulary file with one token per line. Documents with no counts are dropped.
CountDataset read_bow(const std::string& counts_path, const std::string& vocab_path);
void write_bow(const std::string& counts_path, const std::string& vocab_path,
               const CountDataset& ds);

/// Comma-separated rows of reals; '#' lines are skipped.
DenseDataset read_dense_csv(const std::string& path);
void write_dense_csv(const std::string& path, const Eigen::MatrixXd& values,
                     const Provenance& provenance);

/// One row of K 0/1 values per datum.
void write_codes_csv(std::ostream& os, const std::vector<Code>& codes);
void write_codes_csv(const std::string& path, const std::vector<Code>& codes);
std::vector<Code> read_codes_csv(const std::string& path);

// --- Synthetic data from the generative model -------------------------------

struct SyntheticSpec {
  LikelihoodKind kind = LikelihoodKind::Gaussian;
  std::size_t K = 8;
  std::size_t D = 16;  // data width; vocabulary size W for Poisson
  std::size_t T = 4;   // topics (Poisson only)
  std::vector<std::size_t> hidden{32};
  double weight_scale = 6.0;  // multiplies the true decoder's initial weights
  double alpha = 1.0;
  double gamma_mass = 2.0;
  GaussianLikelihoodConfig gauss;
  double gamma_a = 1.0;
  double gamma_b = 1.0;
  double beta_logit_scale = 3.0;
  std::size_t N = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Eigen::MatrixXd X;  // N x D (counts stored as reals for Poisson)
  std::vector<Code> codes;
  Eigen::VectorXd lambda;  // per-datum scale (all ones for Bernoulli)
  Eigen::VectorXd pi;
  DecoderNetwork decoder;
  Eigen::MatrixXd beta_logits;  // W x T, Poisson only
  Provenance provenance;
};

/// Samples pi, z, lambda and x forward through the model.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace bpe
