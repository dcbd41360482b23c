#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace bpe {

/// Binary latent code z in {0,1}^K, one byte per bit.
using Code = std::vector<std::uint8_t>;

inline std::size_t active_count(const Code& z) {
  std::size_t n = 0;
  for (auto b : z) n += (b != 0);
  return n;
}

/// Indices of the set bits, ascending.
std::vector<std::size_t> active_set(const Code& z);

Code code_from_active_set(std::size_t K, const std::vector<std::size_t>& active);

/// Throws DimensionError on a width mismatch and Error on a non-binary entry.
void validate_code(const Code& z, std::size_t K);

Eigen::VectorXd code_to_vector(const Code& z);

/// Packs codes into the columns of a K x B matrix.
Eigen::MatrixXd codes_to_matrix(const std::vector<Code>& codes, std::size_t K);

}  // namespace bpe
