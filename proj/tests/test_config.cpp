#include "bpe/config.hpp"
#include "bpe/error.hpp"
#include "doctest.h"

using namespace bpe;

TEST_CASE("key=value parsing with comments and blanks") {
  const auto m = parse_config_text("# header\nmodel.K = 12\n\n adam.rho=0.01 # trailing\n");
  CHECK(m.size() == 2);
  CHECK(m.at("model.K") == "12");
  CHECK(m.at("adam.rho") == "0.01");
  CHECK_THROWS_AS(parse_config_text("model.K\n"), Error);
  CHECK_THROWS_AS(parse_config_text("=3\n"), Error);
}

TEST_CASE("schema resolves typed values and defaults") {
  auto m = parse_config_text("model.likelihood=poisson\nmodel.K=10\nmodel.hidden=16,8\nmodel.T=5\n");
  const auto cfg = run_config_from_map(m);
  CHECK(cfg.train.model.likelihood == LikelihoodKind::Poisson);
  CHECK(cfg.train.model.K == 10);
  CHECK(cfg.train.model.hidden == std::vector<std::size_t>{16, 8});
  CHECK(cfg.train.prior.K == 10);
  CHECK(cfg.train.prior.gamma_mass == 2.0);
  CHECK(cfg.train.model.gauss.sigma2 == 0.1);
  CHECK_FALSE(cfg.has_train_seed);
}

TEST_CASE("unknown keys and malformed values name the key") {
  ConfigMap m{{"model.KK", "3"}};
  CHECK_THROWS_WITH_AS(run_config_from_map(m), doctest::Contains("model.KK"), Error);
  m = {{"model.K", "three"}};
  CHECK_THROWS_WITH_AS(run_config_from_map(m), doctest::Contains("model.K"), Error);
  m = {{"train.timing", "maybe"}};
  CHECK_THROWS_AS(run_config_from_map(m), Error);
  m = {{"data.format", "xml"}};
  CHECK_THROWS_AS(run_config_from_map(m), Error);
  m = {{"gauss.sigma2", "-1"}};
  CHECK_THROWS_AS(run_config_from_map(m), Error);
}

TEST_CASE("overrides replace file values") {
  auto m = parse_config_text("model.K=8\n");
  apply_override(m, "model.K=16");
  apply_override(m, "train.seed=5");
  const auto cfg = run_config_from_map(m);
  CHECK(cfg.train.model.K == 16);
  CHECK(cfg.train.seed == 5);
  CHECK(cfg.has_train_seed);
  CHECK_THROWS_AS(apply_override(m, "noequals"), Error);
}

TEST_CASE("resolved config round-trips through text") {
  auto m = parse_config_text("model.K=9\nprior.gamma=1.5\nadam.rho=0.003\ntrain.seed=77\nsynth.seed=3\n");
  const auto a = run_config_from_map(m);
  const auto text = to_config_text(a);
  const auto b = run_config_from_map(parse_config_text(text));
  CHECK(to_config_text(b) == text);
  CHECK(b.train.prior.gamma_mass == 1.5);
  CHECK(b.train.adam.rho == 0.003);
  CHECK(b.synth.has_seed);
  CHECK(to_config_map(b).size() == config_keys().size());
}

TEST_CASE("synthetic spec follows the run config") {
  auto m = parse_config_text("model.K=8\nsynth.N=100\nsynth.D=12\nsynth.seed=4\n");
  const auto s = synthetic_spec_from(run_config_from_map(m));
  CHECK(s.K == 8);
  CHECK(s.N == 100);
  CHECK(s.D == 12);
  CHECK(s.seed == 4);
  CHECK(s.gamma_mass == doctest::Approx(1.6));
}
