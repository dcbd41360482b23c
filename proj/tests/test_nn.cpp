#include <sstream>

#include "bpe/error.hpp"
#include "bpe/nn.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpe;

namespace {

DecoderNetwork identity_net(std::size_t K) {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  l.activation = Activation::Identity;
  return DecoderNetwork({l});
}

void randomize_biases(DecoderNetwork& net, std::mt19937_64& rng) {
  for (auto& l : net.mutable_layers()) l.bias = oracle::random_vector(l.bias.size(), rng, -0.5, 0.5);
}

}  // namespace

TEST_CASE("identity network maps e_1 to e_1") {
  const auto net = identity_net(3);
  const Eigen::VectorXd f = forward(net, Code{1, 0, 0});
  CHECK(f == Eigen::Vector3d(1, 0, 0));
}

TEST_CASE("sigmoid output stays inside (0,1)") {
  const auto net = make_decoder(6, {8}, 5, Activation::Sigmoid, 3);
  const Eigen::VectorXd f = forward(net, Code(6, 0));
  CHECK((f.array() > 0.0).all());
  CHECK((f.array() < 1.0).all());
}

TEST_CASE("softmax output sums to one") {
  std::mt19937_64 rng(4);
  const auto net = make_decoder(6, {8}, 5, Activation::Softmax, 9);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd f = forward(net, oracle::random_code(6, rng));
    CHECK(std::abs(f.sum() - 1.0) <= 1e-12);
    CHECK((f.array() >= 0.0).all());
  }
}

TEST_CASE("forward rejects a code of the wrong width") {
  const auto net = make_decoder(4, {}, 3, Activation::Sigmoid, 1);
  CHECK_THROWS_AS(forward(net, Code(5, 0)), DimensionError);
  try {
    forward(net, Code(5, 0));
  } catch (const DimensionError& e) {
    CHECK(e.expected() == 4);
    CHECK(e.actual() == 5);
  }
}

TEST_CASE("linear layer gradient is c z^T") {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Random(3, 4);
  l.bias = Eigen::VectorXd::Zero(3);
  const DecoderNetwork net({l});
  const Code z{1, 0, 1, 1};
  const Eigen::Vector3d c(0.5, -2.0, 3.0);
  const auto g = backward(net, z, c);
  CHECK(g.weight[0] == c * code_to_vector(z).transpose());
  CHECK(g.bias[0] == Eigen::VectorXd(c));
}

TEST_CASE("zero upstream gives a zero gradient") {
  const auto net = make_decoder(5, {7}, 4, Activation::Sigmoid, 2);
  const auto g = backward(net, Code{1, 1, 0, 0, 1}, Eigen::VectorXd::Zero(4));
  CHECK(g.is_zero());
  CHECK(g.congruent_with(net));
}

TEST_CASE("backward matches central finite differences on random small nets") {
  std::mt19937_64 rng(11);
  const Activation finals[] = {Activation::Sigmoid, Activation::Softmax, Activation::Identity};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t K = 3 + trial % 3, D = 2 + trial % 3;
    auto net = make_decoder(K, {4}, D, finals[trial % 3], 100 + trial);
    randomize_biases(net, rng);
    REQUIRE(net.parameter_count() <= 64);
    Code z = oracle::random_code(K, rng);
    z[0] = 1;
    const Eigen::VectorXd up = oracle::random_vector(static_cast<Eigen::Index>(D), rng);
    const auto g = backward(net, z, up);
    const auto r = oracle::fd_check_network(
        net, g, [&](const DecoderNetwork& n) { return forward(n, z).dot(up); });
    CHECK(r.failures == 0);
  }
}

TEST_CASE("batch backward equals the sum of per-datum calls") {
  std::mt19937_64 rng(5);
  const auto net = make_decoder(6, {5, 4}, 3, Activation::Sigmoid, 8);
  std::vector<Code> codes;
  Eigen::MatrixXd up(3, 7);
  GradientBuffer sum = GradientBuffer::zeros_like(net);
  for (int i = 0; i < 7; ++i) {
    codes.push_back(oracle::random_code(6, rng));
    up.col(i) = oracle::random_vector(3, rng);
    sum += backward(net, codes.back(), up.col(i));
  }
  const auto batch = backward_batch(net, codes_to_matrix(codes, 6), up);
  for (std::size_t l = 0; l < batch.weight.size(); ++l) {
    CHECK((batch.weight[l] - sum.weight[l]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch.bias[l] - sum.bias[l]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  auto net = make_decoder(4, {3}, 2, Activation::Sigmoid, 1);
  const auto before = net;
  auto state = AdamState::for_network(net, {});
  adam_step(net, GradientBuffer::zeros_like(net), state);
  CHECK(state.t == 1);
  for (std::size_t l = 0; l < net.layers().size(); ++l)
    CHECK(net.layers()[l].weight == before.layers()[l].weight);
}

TEST_CASE("constant gradient drives the step size toward rho") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd g(2, 2);
  g << 0.3, -7.0, 1e-3, 50.0;
  auto s = MatrixAdamState::for_shape(2, 2, {});
  Eigen::MatrixXd prev = p;
  for (int i = 0; i < 2000; ++i) {
    prev = p;
    adam_step(p, g, s);
  }
  const Eigen::MatrixXd delta = p - prev;
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(std::abs(std::abs(delta(i)) - 1e-3) < 1e-6);
    CHECK((delta(i) > 0) == (g(i) > 0));
  }
}

TEST_CASE("adam moments follow the scalar reference") {
  std::mt19937_64 rng(2);
  AdamConfig cfg{0.01, 0.8, 0.95, 1e-6};
  auto net = make_decoder(3, {2}, 2, Activation::Sigmoid, 6);
  auto state = AdamState::for_network(net, cfg);
  const double w0 = net.layers()[0].weight(1, 2);
  oracle::ScalarAdam ref;
  double expect = w0;
  for (int i = 0; i < 25; ++i) {
    auto g = GradientBuffer::zeros_like(net);
    const double gi = oracle::random_vector(1, rng, -2, 2)[0];
    g.weight[0](1, 2) = gi;
    adam_step(net, g, state);
    expect = ref.step(expect, gi, cfg.rho, cfg.beta1, cfg.beta2, cfg.eps);
    CHECK(state.m_weight[0](1, 2) == doctest::Approx(ref.m).epsilon(1e-14));
    CHECK(state.v_weight[0](1, 2) == doctest::Approx(ref.v).epsilon(1e-14));
    CHECK(net.layers()[0].weight(1, 2) == doctest::Approx(expect).epsilon(1e-13));
  }
  CHECK(state.t == 25);
}

TEST_CASE("non-finite gradient is rejected without a partial update") {
  auto net = make_decoder(3, {2}, 2, Activation::Sigmoid, 6);
  auto state = AdamState::for_network(net, {});
  auto g = GradientBuffer::zeros_like(net);
  g.weight[0].setConstant(1.0);
  g.bias[1][0] = std::numeric_limits<double>::quiet_NaN();
  const auto before = net;
  CHECK_THROWS_AS(adam_step(net, g, state), NumericError);
  CHECK(state.t == 0);
  CHECK(net.layers()[0].weight == before.layers()[0].weight);
}

TEST_CASE("same seed gives identical networks and trajectories") {
  auto a = make_decoder(5, {6}, 4, Activation::Sigmoid, 77);
  auto b = make_decoder(5, {6}, 4, Activation::Sigmoid, 77);
  const auto c = make_decoder(5, {6}, 4, Activation::Sigmoid, 78);
  CHECK(a.layers()[0].weight == b.layers()[0].weight);
  CHECK(a.layers()[0].weight != c.layers()[0].weight);
  auto sa = AdamState::for_network(a, {});
  auto sb = AdamState::for_network(b, {});
  const Code z{1, 0, 1, 0, 1};
  for (int i = 0; i < 5; ++i) {
    adam_step(a, backward(a, z, Eigen::VectorXd::Ones(4)), sa);
    adam_step(b, backward(b, z, Eigen::VectorXd::Ones(4)), sb);
  }
  CHECK(a.layers()[1].weight == b.layers()[1].weight);
}

TEST_CASE("glorot init stays within its bound") {
  const auto net = make_decoder(10, {20}, 6, Activation::Sigmoid, 4);
  CHECK(net.layers()[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 30.0));
  CHECK(net.layers()[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 26.0));
  CHECK(net.layers()[0].activation == Activation::ReLU);
  CHECK(net.final_activation() == Activation::Sigmoid);
}

TEST_CASE("network checkpoint round-trips bit-exactly") {
  auto net = make_decoder(4, {5}, 3, Activation::Softmax, 12);
  auto state = AdamState::for_network(net, {0.02, 0.7, 0.9, 1e-7});
  adam_step(net, backward(net, Code{1, 1, 0, 1}, Eigen::Vector3d(1, -1, 2)), state);
  std::stringstream ss;
  write_network(ss, net, state);
  CHECK(ss.str().substr(0, 4) == "BBPC");
  DecoderNetwork net2;
  AdamState state2;
  read_network(ss, net2, state2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(net2.layers()[l].weight == net.layers()[l].weight);
    CHECK(net2.layers()[l].bias == net.layers()[l].bias);
    CHECK(state2.m_weight[l] == state.m_weight[l]);
    CHECK(state2.v_bias[l] == state.v_bias[l]);
  }
  CHECK(state2.t == 1);
  CHECK(state2.config.beta1 == 0.7);
  CHECK(net2.final_activation() == Activation::Softmax);
}

TEST_CASE("truncated or foreign checkpoint is refused") {
  auto net = make_decoder(4, {5}, 3, Activation::Sigmoid, 12);
  auto state = AdamState::for_network(net, {});
  std::stringstream ss;
  write_network(ss, net, state);
  const std::string bytes = ss.str();
  DecoderNetwork n2;
  AdamState s2;
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_network(cut, n2, s2), FormatError);
  std::stringstream wrong("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(read_network(wrong, n2, s2), FormatError);
}
