#include "bpe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>

#include "bpe/error.hpp"

namespace bpe {
namespace {

void check_rows(const Eigen::MatrixXd& data, const std::vector<Code>& codes) {
  if (codes.empty()) throw Error("metrics need at least one datum");
  require_dim("codes per datum", static_cast<std::size_t>(data.rows()), codes.size());
}

std::string code_string(const Code& z) {
  std::string s;
  for (auto b : z) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<std::size_t> top_indices(const Eigen::VectorXd& v, std::size_t m) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  m = std::min(m, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto va = v[static_cast<Eigen::Index>(a)];
                      const auto vb = v[static_cast<Eigen::Index>(b)];
                      return va != vb ? va > vb : a < b;
                    });
  idx.resize(m);
  return idx;
}

}  // namespace

double hoyer(const Code& z) {
  const std::size_t K = z.size();
  if (K < 2) throw Error("hoyer needs K >= 2");
  const auto n = active_count(z);
  if (n == 0) return 1.0;
  // For binary z, |z|_1 / |z|_2 = sqrt(n).
  const double rk = std::sqrt(static_cast<double>(K));
  return (rk - std::sqrt(static_cast<double>(n))) / (rk - 1.0);
}

double sparsity(const std::vector<Code>& codes) {
  if (codes.empty()) throw Error("sparsity of an empty code set");
  double s = 0.0;
  for (const auto& z : codes) s += hoyer(z);
  return s / static_cast<double>(codes.size());
}

double mse(const Eigen::MatrixXd& data, const std::vector<Code>& codes, const DecoderNetwork& net,
           const Eigen::VectorXd& scale_means) {
  check_rows(data, codes);
  require_dim("scale means", codes.size(), static_cast<std::size_t>(scale_means.size()));
  const Eigen::MatrixXd f = forward_batch(net, codes_to_matrix(codes, net.input_dim()));
  require_dim("data width", net.output_dim(), static_cast<std::size_t>(data.cols()));
  double total = 0.0;
  for (Eigen::Index n = 0; n < data.rows(); ++n)
    total += (data.row(n).transpose() - scale_means[n] * f.col(n)).squaredNorm();
  return total / static_cast<double>(data.rows());
}

double nll(const Eigen::MatrixXd& data, const std::vector<Code>& codes, const DecoderNetwork& net) {
  check_rows(data, codes);
  const Eigen::MatrixXd f = forward_batch(net, codes_to_matrix(codes, net.input_dim()));
  double total = 0.0;
  for (Eigen::Index n = 0; n < data.rows(); ++n)
    total += bern_loglik(data.row(n).transpose(), f.col(n));
  return -total / static_cast<double>(data.rows());
}

double poisson_nll(const Eigen::MatrixXd& counts, const std::vector<Code>& codes,
                   const DecoderNetwork& net, const Eigen::MatrixXd& beta,
                   const Eigen::VectorXd& scale_means) {
  check_rows(counts, codes);
  require_dim("scale means", codes.size(), static_cast<std::size_t>(scale_means.size()));
  const Eigen::MatrixXd f = forward_batch(net, codes_to_matrix(codes, net.input_dim()));
  const Eigen::MatrixXd phi = beta * f;
  double total = 0.0;
  for (Eigen::Index n = 0; n < counts.rows(); ++n)
    total += poisson_log_pmf(counts.row(n).transpose(), scale_means[n] * phi.col(n));
  return -total / static_cast<double>(counts.rows());
}

void EvalReport::write_csv(std::ostream& os) const {
  os << std::setprecision(17);
  os << "metric,value\n";
  os << metric << ',' << value << '\n';
  os << "sparsity," << sparsity << '\n';
  os << "N," << N << '\n';
  os << "mean_active_bits," << mean_active_bits << '\n';
  for (Eigen::Index k = 0; k < activation.size(); ++k) os << "act_" << k << ',' << activation[k] << '\n';
  os << "fingerprint," << fingerprint << '\n';
}

void EvalReport::write_text(std::ostream& os) const {
  os << std::setprecision(6);
  os << metric << ": " << value << '\n';
  os << "sparsity: " << sparsity << '\n';
  os << "N: " << N << '\n';
  os << "mean_active_bits: " << mean_active_bits << '\n';
  os << "activation:";
  for (Eigen::Index k = 0; k < activation.size(); ++k) os << ' ' << activation[k];
  os << '\n';
  os << "fingerprint: " << fingerprint << '\n';
}

std::vector<TopicGroup> topic_report(const std::vector<Code>& codes, const Eigen::MatrixXd& beta,
                                     const DecoderNetwork& net,
                                     const std::vector<std::string>& vocabulary,
                                     const TopicReportOptions& options) {
  require_dim("vocabulary", static_cast<std::size_t>(beta.rows()), vocabulary.size());
  require_dim("topic count", static_cast<std::size_t>(beta.cols()), net.output_dim());

  std::vector<TopicGroup> groups;
  std::map<Code, std::size_t> index;
  for (const auto& z : codes) {
    auto [it, inserted] = index.try_emplace(z, groups.size());
    if (inserted) groups.push_back(TopicGroup{z, 0, {}});
    groups[it->second].count += 1;
  }

  for (auto& g : groups) {
    const Eigen::VectorXd f = forward(net, g.code);
    for (auto t : top_indices(f, options.max_topics)) {
      const double p = f[static_cast<Eigen::Index>(t)];
      if (p < options.min_topic_probability) break;
      TopicEntry e;
      e.topic = t;
      e.probability = p;
      const Eigen::VectorXd col = beta.col(static_cast<Eigen::Index>(t));
      for (auto w : top_indices(col, options.top_words)) {
        e.words.push_back(vocabulary[w]);
        e.word_probs.push_back(col[static_cast<Eigen::Index>(w)]);
      }
      g.topics.push_back(std::move(e));
    }
  }
  return groups;
}

void write_topic_report_text(std::ostream& os, const std::vector<TopicGroup>& groups) {
  os << std::setprecision(4);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    os << "group " << i << " code=" << code_string(g.code) << " count=" << g.count << '\n';
    for (const auto& t : g.topics) {
      os << "  topic " << t.topic << " p=" << t.probability << ":";
      for (const auto& w : t.words) os << ' ' << w;
      os << '\n';
    }
  }
}

void write_topic_report_csv(std::ostream& os, const std::vector<TopicGroup>& groups) {
  os << std::setprecision(17);
  os << "group,code,count,topic,topic_prob,rank,word,word_prob\n";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    for (const auto& t : g.topics)
      for (std::size_t r = 0; r < t.words.size(); ++r)
        os << i << ',' << code_string(g.code) << ',' << g.count << ',' << t.topic << ','
           << t.probability << ',' << r << ',' << t.words[r] << ',' << t.word_probs[r] << '\n';
  }
}

}  // namespace bpe
