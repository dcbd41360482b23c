#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bpe/code.hpp"
#include "bpe/likelihood.hpp"
#include "bpe/nn.hpp"

namespace bpe {

/// (sqrt(K) - |z|_1/|z|_2) / (sqrt(K) - 1); the empty code counts as fully sparse.
double hoyer(const Code& z);

/// Mean Hoyer sparsity over a set of codes.
double sparsity(const std::vector<Code>& codes);

/// (1/N) sum_n |x_n - E[lambda_n] f(z_n)|^2. Rows of `data` are data.
double mse(const Eigen::MatrixXd& data, const std::vector<Code>& codes, const DecoderNetwork& net,
           const Eigen::VectorXd& scale_means);

/// -(1/N) sum_n ln Bern(x_n | f(z_n)).
double nll(const Eigen::MatrixXd& data, const std::vector<Code>& codes, const DecoderNetwork& net);

/// -(1/N) sum_n ln Poiss(x_n | E[lambda_n] beta f(z_n)), normalized with ln x!.
double poisson_nll(const Eigen::MatrixXd& counts, const std::vector<Code>& codes,
                   const DecoderNetwork& net, const Eigen::MatrixXd& beta,
                   const Eigen::VectorXd& scale_means);

struct EvalReport {
  std::string metric;  // "mse" or "nll"
  double value = 0.0;
  double sparsity = 0.0;
  std::size_t N = 0;
  double mean_active_bits = 0.0;
  Eigen::VectorXd activation;  // per-dimension activation probability
  std::string fingerprint;     // hash of the configuration that produced it

  /// "metric,value\n" rows; activation probabilities as act_<k>.
  void write_csv(std::ostream& os) const;
  /// Human-readable "name: value" lines.
  void write_text(std::ostream& os) const;
};

struct TopicEntry {
  std::size_t topic = 0;
  double probability = 0.0;
  std::vector<std::string> words;   // top words, most probable first
  std::vector<double> word_probs;
};

struct TopicGroup {
  Code code;
  std::size_t count = 0;  // data sharing this code
  std::vector<TopicEntry> topics;  // by decreasing probability
};

struct TopicReportOptions {
  std::size_t top_words = 15;
  std::size_t max_topics = 5;
  double min_topic_probability = 0.05;
};

/// Groups data by distinct code (in order of first appearance) and lists, for each
/// code, the topics its decoder output puts mass on and their top words.
std::vector<TopicGroup> topic_report(const std::vector<Code>& codes, const Eigen::MatrixXd& beta,
                                     const DecoderNetwork& net,
                                     const std::vector<std::string>& vocabulary,
                                     const TopicReportOptions& options = {});

void write_topic_report_text(std::ostream& os, const std::vector<TopicGroup>& groups);
/// group,code,count,topic,topic_prob,rank,word,word_prob
void write_topic_report_csv(std::ostream& os, const std::vector<TopicGroup>& groups);

}  // namespace bpe
