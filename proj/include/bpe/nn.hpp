#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "bpe/code.hpp"

namespace bpe {

enum class Activation : std::uint32_t { Identity = 0, ReLU = 1, Sigmoid = 2, Softmax = 3 };

const char* activation_name(Activation a);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(bias.size()); }
};

/// Dense feed-forward decoder mapping {0,1}^K to the natural-parameter space.
///
/// Layer l consumes the output of layer l-1; the first layer consumes the code.
/// The last layer's activation is the network's final activation.
class DecoderNetwork {
 public:
  DecoderNetwork() = default;
  explicit DecoderNetwork(std::vector<DenseLayer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  Activation final_activation() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  /// Checks width chaining and finiteness; throws on violation.
  void validate() const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Builds a decoder with ReLU hidden layers and the given final activation.
/// Weights are drawn uniformly in +-sqrt(6/(fan_in+fan_out)); biases start at 0.
DecoderNetwork make_decoder(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                            std::size_t output_dim, Activation final_activation,
                            std::uint64_t seed);

/// Per-layer values cached by a batched forward pass (columns are samples).
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> activations;  // output of each layer
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

/// Column-wise forward pass over a K x B matrix of codes.
Eigen::MatrixXd forward_batch(const DecoderNetwork& net, const Eigen::MatrixXd& codes);
ForwardCache forward_cached(const DecoderNetwork& net, const Eigen::MatrixXd& codes);

/// f_theta(z) for a single binary code.
Eigen::VectorXd forward(const DecoderNetwork& net, const Code& z);

/// Gradient arrays shaped like a DecoderNetwork's parameters.
struct GradientBuffer {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  std::size_t count = 0;  // number of data accumulated

  static GradientBuffer zeros_like(const DecoderNetwork& net);

  bool congruent_with(const DecoderNetwork& net) const;
  bool all_finite() const;
  bool is_zero() const;
  GradientBuffer& operator+=(const GradientBuffer& other);
  GradientBuffer& operator*=(double s);
};

/// Reverse-mode pass for one code; upstream is dL/df.
GradientBuffer backward(const DecoderNetwork& net, const Code& z,
                        const Eigen::VectorXd& upstream);

/// Summed gradient over the columns of `codes` with matching upstream columns.
GradientBuffer backward_batch(const DecoderNetwork& net, const Eigen::MatrixXd& codes,
                              const Eigen::MatrixXd& upstream);

struct AdamConfig {
  double rho = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Eigen::MatrixXd> m_weight, v_weight;
  std::vector<Eigen::VectorXd> m_bias, v_bias;
  std::uint64_t t = 0;

  static AdamState for_network(const DecoderNetwork& net, const AdamConfig& cfg);
  bool congruent_with(const DecoderNetwork& net) const;
};

/// Moment state for a single free-standing parameter matrix (the topic logits).
struct MatrixAdamState {
  AdamConfig config;
  Eigen::MatrixXd m, v;
  std::uint64_t t = 0;

  static MatrixAdamState for_shape(Eigen::Index rows, Eigen::Index cols, const AdamConfig& cfg);
};

/// One ADAM ascent step on the network; grads point uphill.
/// Non-finite gradients throw NumericError and leave net and state untouched.
void adam_step(DecoderNetwork& net, const GradientBuffer& grads, AdamState& state);

/// Same update rule for a single matrix parameter.
void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, MatrixAdamState& state);

// Checkpoint payload: "BBPC", u32 version, u32 layer count, per-layer
// (in, out, activation) u32 triples, then f64 arrays in declaration order.
void write_network(std::ostream& os, const DecoderNetwork& net, const AdamState& adam);
void read_network(std::istream& is, DecoderNetwork& net, AdamState& adam);

}  // namespace bpe
