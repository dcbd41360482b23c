#include "bpe/code.hpp"

#include "bpe/error.hpp"

namespace bpe {

std::vector<std::size_t> active_set(const Code& z) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (z[k]) out.push_back(k);
  return out;
}

Code code_from_active_set(std::size_t K, const std::vector<std::size_t>& active) {
  Code z(K, 0);
  for (auto k : active) {
    if (k >= K) throw Error("active index " + std::to_string(k) + " out of range for K=" +
                            std::to_string(K));
    z[k] = 1;
  }
  return z;
}

void validate_code(const Code& z, std::size_t K) {
  require_dim("code", K, z.size());
  for (auto b : z)
    if (b > 1) throw Error("code entries must be 0 or 1");
}

Eigen::VectorXd code_to_vector(const Code& z) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z.size()));
  for (std::size_t k = 0; k < z.size(); ++k) v[static_cast<Eigen::Index>(k)] = z[k] ? 1.0 : 0.0;
  return v;
}

Eigen::MatrixXd codes_to_matrix(const std::vector<Code>& codes, std::size_t K) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(codes.size()));
  for (std::size_t j = 0; j < codes.size(); ++j) {
    validate_code(codes[j], K);
    for (std::size_t k = 0; k < K; ++k)
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = codes[j][k] ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace bpe
