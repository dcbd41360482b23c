#include <algorithm>
#include <sstream>

#include "bpe/error.hpp"
#include "bpe/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpe;

namespace {

Code one_hot(std::size_t K, std::size_t k) {
  Code z(K, 0);
  z[k] = 1;
  return z;
}

/// Single softmax layer whose output ignores the code and sits on `topic`.
DecoderNetwork peaked_topic_net(std::size_t K, std::size_t T, std::size_t topic) {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(K));
  l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
  l.bias[static_cast<Eigen::Index>(topic)] = 60.0;
  l.activation = Activation::Softmax;
  return DecoderNetwork({l});
}

}  // namespace

TEST_CASE("hoyer reference values") {
  CHECK(hoyer(one_hot(16, 3)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hoyer(Code(16, 1)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  Code two(16, 0);
  two[2] = two[9] = 1;
  CHECK(hoyer(two) == doctest::Approx((4.0 - std::sqrt(2.0)) / 3.0).epsilon(1e-15));
  CHECK(hoyer(two) == doctest::Approx(0.8619).epsilon(1e-4));
  CHECK(hoyer(Code(16, 0)) == 1.0);
  CHECK_THROWS_AS(hoyer(Code{1}), Error);
}

TEST_CASE("hoyer is bounded and depends only on the active count") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> width(2, 64);
  for (int i = 0; i < 500; ++i) {
    const std::size_t K = width(rng);
    Code z = oracle::random_code(K, rng, 0.3);
    const double h = hoyer(z);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    std::shuffle(z.begin(), z.end(), rng);
    CHECK(hoyer(z) == h);
  }
}

TEST_CASE("sparsity averages hoyer") {
  CHECK(sparsity({one_hot(16, 0), one_hot(16, 5)}) == 1.0);
  CHECK(sparsity({Code(16, 1), Code(16, 1)}) == doctest::Approx(0.0).scale(1.0));
  CHECK(sparsity({one_hot(16, 0), Code(16, 1)}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(sparsity({}), Error);
}

TEST_CASE("mse") {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Identity(3, 3);
  l.bias = Eigen::VectorXd::Zero(3);
  const DecoderNetwork net({l});
  const std::vector<Code> codes{{1, 0, 0}, {0, 1, 1}};
  Eigen::MatrixXd x(2, 3);
  x << 2, 0, 0, 0, 3, 3;
  const Eigen::Vector2d scales(2.0, 3.0);
  CHECK(mse(x, codes, net, scales) == 0.0);
  // Zero decoder output: mean squared norm of the data.
  const std::vector<Code> empty{{0, 0, 0}, {0, 0, 0}};
  CHECK(mse(x, empty, net, Eigen::Vector2d::Ones()) == doctest::Approx((4.0 + 18.0) / 2.0));
  // Doubling residuals quadruples the error.
  Eigen::MatrixXd shifted = x;
  shifted(0, 1) += 0.5;
  shifted(1, 0) -= 1.5;
  Eigen::MatrixXd doubled = x;
  doubled(0, 1) += 1.0;
  doubled(1, 0) -= 3.0;
  CHECK(mse(doubled, codes, net, scales) ==
        doctest::Approx(4.0 * mse(shifted, codes, net, scales)));
}

TEST_CASE("bernoulli nll") {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Zero(784, 4);
  l.bias = Eigen::VectorXd::Zero(784);
  l.activation = Activation::Sigmoid;
  const DecoderNetwork half({l});
  std::mt19937_64 rng(2);
  Eigen::MatrixXd x(3, 784);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = oracle::random_vector(1, rng)[0] > 0;
  const std::vector<Code> codes(3, Code{0, 1, 0, 1});
  CHECK(nll(x, codes, half) == doctest::Approx(784 * std::log(2.0)).epsilon(1e-12));
  CHECK(nll(x, codes, half) == doctest::Approx(543.4273).epsilon(1e-6));
}

TEST_CASE("bernoulli nll equals the mean of likelihood-module values") {
  std::mt19937_64 rng(9);
  const auto net = make_decoder(6, {5}, 10, Activation::Sigmoid, 3);
  std::vector<Code> codes;
  Eigen::MatrixXd x(12, 10);
  double sum = 0.0;
  for (int n = 0; n < 12; ++n) {
    codes.push_back(oracle::random_code(6, rng));
    for (int d = 0; d < 10; ++d) x(n, d) = oracle::random_vector(1, rng)[0] > 0;
    sum += bern_loglik(x.row(n).transpose(), forward(net, codes.back()));
  }
  const double v = nll(x, codes, net);
  CHECK(v == doctest::Approx(-sum / 12).epsilon(1e-14));
  CHECK(v >= 0.0);
}

TEST_CASE("poisson nll uses the normalized pmf") {
  const auto net = make_decoder(3, {}, 2, Activation::Softmax, 4);
  const Eigen::MatrixXd beta = column_softmax(random_beta_logits(4, 2, 1.0, 5));
  Eigen::MatrixXd x(2, 4);
  x << 1, 0, 3, 2, 0, 0, 1, 0;
  const std::vector<Code> codes{{1, 0, 0}, {0, 1, 1}};
  const Eigen::Vector2d scales(5.0, 1.5);
  double ref = 0.0;
  for (int n = 0; n < 2; ++n) {
    const Eigen::VectorXd rate = scales[n] * beta * forward(net, codes[n]);
    for (int w = 0; w < 4; ++w) ref += oracle::log_poisson_pmf(x(n, w), rate[w]);
  }
  CHECK(poisson_nll(x, codes, net, beta, scales) == doctest::Approx(-ref / 2).epsilon(1e-13));
}

TEST_CASE("topic report") {
  const std::vector<std::string> vocab{"w0", "w1", "w2", "w3", "w4"};
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(5, 3, 0.1);
  beta.col(1) << 0.01, 0.01, 0.01, 0.96, 0.01;
  beta.col(0) /= beta.col(0).sum();
  beta.col(2) /= beta.col(2).sum();

  SUBCASE("one-hot topic distribution gives one topic") {
    const auto net = peaked_topic_net(4, 3, 1);
    const auto groups = topic_report({Code{1, 0, 0, 0}}, beta, net, vocab);
    REQUIRE(groups.size() == 1);
    REQUIRE(groups[0].topics.size() == 1);
    CHECK(groups[0].topics[0].topic == 1);
    CHECK(groups[0].topics[0].words.front() == "w3");
  }
  SUBCASE("identical codes merge in order of first appearance") {
    const auto net = make_decoder(4, {3}, 3, Activation::Softmax, 1);
    const std::vector<Code> codes{{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}};
    const auto groups = topic_report(codes, beta, net, vocab, {2, 3, 0.0});
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].code == codes[0]);
    CHECK(groups[0].count == 3);
    CHECK(groups[1].count == 1);
    CHECK(groups[0].topics.size() == 3);
    CHECK(groups[0].topics[0].words.size() == 2);
    CHECK(groups[0].topics[0].probability >= groups[0].topics[1].probability);
    std::ostringstream csv, txt;
    write_topic_report_csv(csv, groups);
    write_topic_report_text(txt, groups);
    CHECK(csv.str().rfind("group,code,count,topic,topic_prob,rank,word,word_prob\n", 0) == 0);
    CHECK(txt.str().find("code=0100 count=3") != std::string::npos);
  }
}

TEST_CASE("eval report emission") {
  EvalReport r;
  r.metric = "mse";
  r.value = 1.25;
  r.sparsity = 0.75;
  r.N = 10;
  r.mean_active_bits = 2.0;
  r.activation = Eigen::Vector2d(0.5, 0.25);
  r.fingerprint = "abc";
  std::ostringstream csv, txt;
  r.write_csv(csv);
  r.write_text(txt);
  CHECK(csv.str().find("mse,1.25\n") != std::string::npos);
  CHECK(csv.str().find("act_1,0.25\n") != std::string::npos);
  CHECK(txt.str().find("sparsity: 0.75") != std::string::npos);
}
