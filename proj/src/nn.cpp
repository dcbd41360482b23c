#include "bpe/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "bpe/binary_io.hpp"
#include "bpe/error.hpp"

namespace bpe {
namespace {

constexpr std::uint32_t kNetworkFormatVersion = 1;

// Keeps sigmoid outputs strictly inside (0,1) so log-likelihoods stay finite.
constexpr double kSigmoidClamp = 1e-12;

double stable_sigmoid(double x) {
  double s;
  if (x >= 0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kSigmoidClamp, 1.0 - kSigmoidClamp);
}

void apply_activation(Activation act, Eigen::MatrixXd& m) {
  switch (act) {
    case Activation::Identity:
      break;
    case Activation::ReLU:
      m = m.cwiseMax(0.0);
      break;
    case Activation::Sigmoid:
      m = m.unaryExpr([](double x) { return stable_sigmoid(x); });
      break;
    case Activation::Softmax:
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        auto col = m.col(j);
        const double mx = col.maxCoeff();
        col = (col.array() - mx).exp().matrix();
        col /= col.sum();
      }
      break;
  }
}

// Maps dL/d(output) to dL/d(pre-activation), given the layer output.
Eigen::MatrixXd activation_backward(Activation act, const Eigen::MatrixXd& out,
                                    const Eigen::MatrixXd& delta) {
  switch (act) {
    case Activation::Identity:
      return delta;
    case Activation::ReLU:
      return (out.array() > 0.0).select(delta, 0.0);
    case Activation::Sigmoid:
      return (delta.array() * out.array() * (1.0 - out.array())).matrix();
    case Activation::Softmax: {
      Eigen::MatrixXd g(out.rows(), out.cols());
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double dot = out.col(j).dot(delta.col(j));
        g.col(j) = (out.col(j).array() * (delta.col(j).array() - dot)).matrix();
      }
      return g;
    }
  }
  return delta;
}

template <typename Derived>
bool finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <typename P, typename G, typename M>
void adam_kernel(P& param, const G& grad, M& m, M& v, const AdamConfig& c, double bc1,
                 double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = (c.beta2 * v.array() + (1.0 - c.beta2) * grad.array().square()).matrix();
  param.array() += c.rho * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

DecoderNetwork::DecoderNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  validate();
}

std::size_t DecoderNetwork::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t DecoderNetwork::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

Activation DecoderNetwork::final_activation() const {
  return layers_.empty() ? Activation::Identity : layers_.back().activation;
}

std::size_t DecoderNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void DecoderNetwork::validate() const {
  if (layers_.empty()) throw Error("decoder network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    require_dim("layer bias", static_cast<std::size_t>(layer.weight.rows()), layer.out_dim());
    if (l > 0) require_dim("layer input", layers_[l - 1].out_dim(), layer.in_dim());
    if (!finite(layer.weight) || !finite(layer.bias))
      throw NumericError("layer " + std::to_string(l) + " has non-finite parameters");
  }
}

DecoderNetwork make_decoder(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                            std::size_t output_dim, Activation final_activation,
                            std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw Error("decoder widths must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_dim);

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    if (in == 0 || out == 0) throw Error("hidden widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = (l + 2 == widths.size()) ? final_activation : Activation::ReLU;
    layers.push_back(std::move(layer));
  }
  return DecoderNetwork(std::move(layers));
}

ForwardCache forward_cached(const DecoderNetwork& net, const Eigen::MatrixXd& codes) {
  require_dim("forward input", net.input_dim(), static_cast<std::size_t>(codes.rows()));
  ForwardCache cache;
  cache.inputs.reserve(net.layers().size());
  cache.activations.reserve(net.layers().size());
  const Eigen::MatrixXd* in = &codes;
  for (const auto& layer : net.layers()) {
    cache.inputs.push_back(*in);
    Eigen::MatrixXd out = layer.weight * (*in);
    out.colwise() += layer.bias;
    apply_activation(layer.activation, out);
    cache.activations.push_back(std::move(out));
    in = &cache.activations.back();
  }
  return cache;
}

Eigen::MatrixXd forward_batch(const DecoderNetwork& net, const Eigen::MatrixXd& codes) {
  require_dim("forward input", net.input_dim(), static_cast<std::size_t>(codes.rows()));
  Eigen::MatrixXd cur = codes;
  for (const auto& layer : net.layers()) {
    Eigen::MatrixXd out = layer.weight * cur;
    out.colwise() += layer.bias;
    apply_activation(layer.activation, out);
    cur = std::move(out);
  }
  return cur;
}

Eigen::VectorXd forward(const DecoderNetwork& net, const Code& z) {
  validate_code(z, net.input_dim());
  return forward_batch(net, code_to_vector(z)).col(0);
}

GradientBuffer GradientBuffer::zeros_like(const DecoderNetwork& net) {
  GradientBuffer g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

bool GradientBuffer::congruent_with(const DecoderNetwork& net) const {
  const auto& layers = net.layers();
  if (weight.size() != layers.size() || bias.size() != layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (weight[l].rows() != layers[l].weight.rows() || weight[l].cols() != layers[l].weight.cols())
      return false;
    if (bias[l].size() != layers[l].bias.size()) return false;
  }
  return true;
}

bool GradientBuffer::all_finite() const {
  for (const auto& w : weight)
    if (!finite(w)) return false;
  for (const auto& b : bias)
    if (!finite(b)) return false;
  return true;
}

bool GradientBuffer::is_zero() const {
  for (const auto& w : weight)
    if (!w.isZero(0.0)) return false;
  for (const auto& b : bias)
    if (!b.isZero(0.0)) return false;
  return true;
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
  if (weight.size() != other.weight.size())
    throw DimensionError("gradient buffer layers", weight.size(), other.weight.size());
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
  count += other.count;
  return *this;
}

GradientBuffer& GradientBuffer::operator*=(double s) {
  for (auto& w : weight) w *= s;
  for (auto& b : bias) b *= s;
  return *this;
}

GradientBuffer backward_batch(const DecoderNetwork& net, const Eigen::MatrixXd& codes,
                              const Eigen::MatrixXd& upstream) {
  require_dim("backward upstream rows", net.output_dim(),
              static_cast<std::size_t>(upstream.rows()));
  require_dim("backward upstream cols", static_cast<std::size_t>(codes.cols()),
              static_cast<std::size_t>(upstream.cols()));
  const auto cache = forward_cached(net, codes);
  const auto& layers = net.layers();
  GradientBuffer g = GradientBuffer::zeros_like(net);
  g.count = static_cast<std::size_t>(codes.cols());

  Eigen::MatrixXd delta = upstream;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Eigen::MatrixXd pre = activation_backward(layers[i].activation, cache.activations[i], delta);
    g.weight[i] = pre * cache.inputs[i].transpose();
    g.bias[i] = pre.rowwise().sum();
    if (i > 0) delta = layers[i].weight.transpose() * pre;
  }
  return g;
}

GradientBuffer backward(const DecoderNetwork& net, const Code& z, const Eigen::VectorXd& upstream) {
  validate_code(z, net.input_dim());
  require_dim("backward upstream", net.output_dim(), static_cast<std::size_t>(upstream.size()));
  return backward_batch(net, code_to_vector(z), upstream);
}

AdamState AdamState::for_network(const DecoderNetwork& net, const AdamConfig& cfg) {
  AdamState s;
  s.config = cfg;
  for (const auto& l : net.layers()) {
    s.m_weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    s.v_weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    s.m_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    s.v_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return s;
}

bool AdamState::congruent_with(const DecoderNetwork& net) const {
  const auto& layers = net.layers();
  if (m_weight.size() != layers.size() || v_weight.size() != layers.size() ||
      m_bias.size() != layers.size() || v_bias.size() != layers.size())
    return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (m_weight[l].rows() != layers[l].weight.rows() ||
        m_weight[l].cols() != layers[l].weight.cols() ||
        v_weight[l].rows() != layers[l].weight.rows() ||
        v_weight[l].cols() != layers[l].weight.cols() ||
        m_bias[l].size() != layers[l].bias.size() || v_bias[l].size() != layers[l].bias.size())
      return false;
  }
  return true;
}

MatrixAdamState MatrixAdamState::for_shape(Eigen::Index rows, Eigen::Index cols,
                                           const AdamConfig& cfg) {
  MatrixAdamState s;
  s.config = cfg;
  s.m = Eigen::MatrixXd::Zero(rows, cols);
  s.v = Eigen::MatrixXd::Zero(rows, cols);
  return s;
}

void adam_step(DecoderNetwork& net, const GradientBuffer& grads, AdamState& state) {
  if (!grads.congruent_with(net)) throw Error("gradient buffer not congruent with network");
  if (!state.congruent_with(net)) throw Error("adam state not congruent with network");
  if (!grads.all_finite()) throw NumericError("non-finite gradient passed to adam_step");

  state.t += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_kernel(layers[l].weight, grads.weight[l], state.m_weight[l], state.v_weight[l], c, bc1, bc2);
    adam_kernel(layers[l].bias, grads.bias[l], state.m_bias[l], state.v_bias[l], c, bc1, bc2);
  }
}

void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, MatrixAdamState& state) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || state.m.rows() != param.rows() ||
      state.m.cols() != param.cols())
    throw DimensionError("matrix adam shape", static_cast<std::size_t>(param.size()),
                         static_cast<std::size_t>(grad.size()));
  if (!grad.allFinite()) throw NumericError("non-finite gradient passed to adam_step");
  state.t += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  adam_kernel(param, grad, state.m, state.v, c, bc1, bc2);
}

void write_network(std::ostream& os, const DecoderNetwork& net, const AdamState& adam) {
  using namespace binio;
  put_magic(os, "BBPC");
  put_u32(os, kNetworkFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    put_u32(os, static_cast<std::uint32_t>(l.in_dim()));
    put_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    put_u32(os, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : net.layers()) {
    put_array(os, l.weight);
    put_array(os, l.bias);
  }
  put_u64(os, adam.t);
  put_f64(os, adam.config.rho);
  put_f64(os, adam.config.beta1);
  put_f64(os, adam.config.beta2);
  put_f64(os, adam.config.eps);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    put_array(os, adam.m_weight[l]);
    put_array(os, adam.m_bias[l]);
    put_array(os, adam.v_weight[l]);
    put_array(os, adam.v_bias[l]);
  }
}

void read_network(std::istream& is, DecoderNetwork& net, AdamState& adam) {
  using namespace binio;
  get_magic(is, "BBPC");
  const auto version = get_u32(is);
  if (version != kNetworkFormatVersion)
    throw FormatError("unsupported network format version " + std::to_string(version));
  const auto n_layers = get_u32(is);
  if (n_layers == 0 || n_layers > 1024) throw FormatError("implausible layer count");
  std::vector<DenseLayer> layers(n_layers);
  for (auto& l : layers) {
    const auto in = get_u32(is);
    const auto out = get_u32(is);
    const auto act = get_u32(is);
    if (act > static_cast<std::uint32_t>(Activation::Softmax))
      throw FormatError("unknown activation tag");
    l.weight.resize(out, in);
    l.bias.resize(out);
    l.activation = static_cast<Activation>(act);
  }
  for (auto& l : layers) {
    get_array(is, l.weight);
    get_array(is, l.bias);
  }
  DecoderNetwork loaded(std::move(layers));
  AdamConfig cfg;
  const auto t = get_u64(is);
  cfg.rho = get_f64(is);
  cfg.beta1 = get_f64(is);
  cfg.beta2 = get_f64(is);
  cfg.eps = get_f64(is);
  AdamState state = AdamState::for_network(loaded, cfg);
  state.t = t;
  for (std::size_t l = 0; l < loaded.layers().size(); ++l) {
    get_array(is, state.m_weight[l]);
    get_array(is, state.m_bias[l]);
    get_array(is, state.v_weight[l]);
    get_array(is, state.v_bias[l]);
  }
  net = std::move(loaded);
  adam = std::move(state);
}

}  // namespace bpe
