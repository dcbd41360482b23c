#include <filesystem>
#include <fstream>
#include <sstream>

#include "bpe/datasets.hpp"
#include "bpe/error.hpp"
#include "bpe/likelihood.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bpe_test_" + std::to_string(std::random_device{}()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Four 2x2 images, bytes chosen by hand.
const std::vector<unsigned char> kImageBytes = {
    0x00, 0x00, 0x08, 0x03, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2,
    0,    255,  128,  1,    //
    10,   20,   30,   40,   //
    255,  255,  255,  255,  //
    0,    0,    0,    7,
};
const std::vector<unsigned char> kLabelBytes = {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 4, 3, 1, 4, 1};

}  // namespace

TEST_CASE("IDX fixture decodes to known bytes over 255") {
  TempDir tmp;
  write_bytes(tmp.file("img"), kImageBytes);
  write_bytes(tmp.file("lbl"), kLabelBytes);
  const auto ds = read_idx(tmp.file("img"), tmp.file("lbl"));
  REQUIRE(ds.N() == 4);
  REQUIRE(ds.D() == 4);
  for (int n = 0; n < 4; ++n)
    for (int d = 0; d < 4; ++d) CHECK(ds.values(n, d) == kImageBytes[16 + 4 * n + d] / 255.0);
  CHECK(ds.labels == std::vector<int>{3, 1, 4, 1});
}

TEST_CASE("IDX error paths") {
  TempDir tmp;
  write_bytes(tmp.file("img"), kImageBytes);
  auto short_labels = kLabelBytes;
  short_labels[7] = 3;
  short_labels.pop_back();
  write_bytes(tmp.file("lbl3"), short_labels);
  CHECK_THROWS_AS(read_idx(tmp.file("img"), tmp.file("lbl3")), FormatError);

  write_bytes(tmp.file("empty"), {});
  CHECK_THROWS_AS(read_idx(tmp.file("empty")), FormatError);

  auto bad_magic = kImageBytes;
  bad_magic[3] = 0x01;
  write_bytes(tmp.file("bad"), bad_magic);
  CHECK_THROWS_AS(read_idx(tmp.file("bad")), FormatError);

  auto truncated = kImageBytes;
  truncated.resize(truncated.size() - 3);
  write_bytes(tmp.file("trunc"), truncated);
  CHECK_THROWS_AS(read_idx(tmp.file("trunc")), FormatError);

  CHECK_THROWS_AS(read_idx(tmp.file("missing")), Error);
}

TEST_CASE("IDX writer round-trips") {
  TempDir tmp;
  Eigen::MatrixXd v(3, 6);
  for (int i = 0; i < 18; ++i) v(i / 6, i % 6) = (i * 13 % 256) / 255.0;
  write_idx_images(tmp.file("img"), v, 2, 3);
  write_idx_labels(tmp.file("lbl"), {7, 8, 9});
  const auto ds = read_idx(tmp.file("img"), tmp.file("lbl"));
  CHECK(ds.values == v);
  CHECK(ds.labels == std::vector<int>{7, 8, 9});
}

TEST_CASE("binarize") {
  DenseDataset ds;
  ds.values = Eigen::MatrixXd::Constant(3, 4, 0.6);
  CHECK(binarize(ds).values == Eigen::MatrixXd::Ones(3, 4));
  ds.values(1, 2) = 0.999;
  ds.values(2, 1) = 1.0;
  const auto hi = binarize(ds, 1.0);
  CHECK(hi.values.sum() == 1.0);
  CHECK(hi.values(2, 1) == 1.0);
  const auto once = binarize(ds);
  CHECK(binarize(once).values == once.values);
  CHECK(once.provenance.transforms.size() == 1);
}

TEST_CASE("scale corruption") {
  DenseDataset ds;
  ds.values = Eigen::MatrixXd::Random(20, 5);
  CHECK(scale_corrupt(ds, 0.0, 3).values == ds.values);
  const auto a = scale_corrupt(ds, 0.5, 3);
  const auto b = scale_corrupt(ds, 0.5, 3);
  CHECK(a.values == b.values);
  CHECK(a.values != scale_corrupt(ds, 0.5, 4).values);
  CHECK(a.provenance.transforms.back().find("seed=3") != std::string::npos);
  CHECK_THROWS_AS(scale_corrupt(ds, 1.0, 3), Error);
}

TEST_CASE("scale factors average to one") {
  const double smax = 0.8;
  const auto m = sample_scale_factors(100000, smax, 11);
  const double sigma = smax / std::sqrt(3.0) / std::sqrt(100000.0);
  CHECK(std::abs(m.mean() - 1.0) < 3.0 * sigma);
  CHECK(m.minCoeff() >= 1.0 - smax);
  CHECK(m.maxCoeff() <= 1.0 + smax);
}

TEST_CASE("bag-of-words fixture") {
  TempDir tmp;
  write_text(tmp.file("vocab"), "apple\nbanana\ncherry\n");
  write_text(tmp.file("counts"), "# two documents\n0 0 2\n0 2 1\n5 1 4\n5 0 1\n0 0 1\n");
  const auto ds = read_bow(tmp.file("counts"), tmp.file("vocab"));
  Eigen::MatrixXi expect(2, 3);
  expect << 3, 0, 1, 1, 4, 0;
  CHECK(ds.counts == expect);
  CHECK(ds.doc_ids == std::vector<long>{0, 5});
  CHECK(ds.vocabulary == std::vector<std::string>{"apple", "banana", "cherry"});
  CHECK((ds.counts.rowwise().sum().array() > 0).all());

  write_bow(tmp.file("c2"), tmp.file("v2"), ds);
  const auto back = read_bow(tmp.file("c2"), tmp.file("v2"));
  CHECK(back.counts == ds.counts);
  CHECK(back.doc_ids == ds.doc_ids);
}

TEST_CASE("bag-of-words error paths") {
  TempDir tmp;
  write_text(tmp.file("vocab"), "a\nb\n");
  write_text(tmp.file("unknown"), "0 2 1\n");
  CHECK_THROWS_AS(read_bow(tmp.file("unknown"), tmp.file("vocab")), FormatError);
  write_text(tmp.file("zero"), "0 1 0\n");
  CHECK_THROWS_AS(read_bow(tmp.file("zero"), tmp.file("vocab")), FormatError);
  write_text(tmp.file("junk"), "0 1\n");
  CHECK_THROWS_AS(read_bow(tmp.file("junk"), tmp.file("vocab")), FormatError);
}

TEST_CASE("dense CSV round-trips with provenance") {
  TempDir tmp;
  Eigen::MatrixXd v(3, 2);
  v << 0.1, -2.5, 1e-17, 3.0, 1.0 / 3.0, 7.0;
  Provenance p{"unit", {"step one"}};
  write_dense_csv(tmp.file("x.csv"), v, p);
  std::ifstream in(tmp.file("x.csv"));
  std::string first;
  std::getline(in, first);
  CHECK(first == "# provenance.source: unit");
  const auto ds = read_dense_csv(tmp.file("x.csv"));
  CHECK(ds.values == v);
  write_text(tmp.file("ragged.csv"), "1,2\n3\n");
  CHECK_THROWS_AS(read_dense_csv(tmp.file("ragged.csv")), FormatError);
  write_text(tmp.file("nan.csv"), "1,abc\n");
  CHECK_THROWS_AS(read_dense_csv(tmp.file("nan.csv")), FormatError);
}

TEST_CASE("codes CSV round-trips") {
  TempDir tmp;
  const std::vector<Code> codes{{1, 0, 1}, {0, 0, 0}, {1, 1, 1}};
  write_codes_csv(tmp.file("z.csv"), codes);
  CHECK(read_codes_csv(tmp.file("z.csv")) == codes);
  std::ostringstream os;
  write_codes_csv(os, codes);
  CHECK(os.str() == "1,0,1\n0,0,0\n1,1,1\n");
}

TEST_CASE("synthetic activation rate tracks gamma over K") {
  SyntheticSpec s;
  s.kind = LikelihoodKind::Bernoulli;
  s.K = 50;
  s.gamma_mass = 1.0;
  s.alpha = 1.0;
  s.N = 200;
  s.D = 4;
  // Average over many independent draws of pi so the rate estimates E[pi_k] = gamma/K.
  double active = 0.0, total = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    s.seed = seed;
    const auto d = generate_synthetic(s);
    for (const auto& z : d.codes) active += static_cast<double>(active_count(z));
    total += static_cast<double>(s.N * s.K);
  }
  const double p = s.gamma_mass / static_cast<double>(s.K);
  // Between-draw variance of pi dominates: Var[pi] = p(1-p)/(alpha+1) per dimension.
  const double draws = 40.0 * static_cast<double>(s.K);
  const double sd = std::sqrt(p * (1 - p) / (s.alpha + 1.0) / draws + p * (1 - p) / total);
  CHECK(std::abs(active / total - p) < 3.0 * sd);
}

TEST_CASE("synthetic guards and reproducibility") {
  SyntheticSpec s;
  s.gauss.c = 0.0;
  CHECK_THROWS_AS(generate_synthetic(s), Error);
  s = SyntheticSpec{};
  s.gamma_mass = static_cast<double>(s.K);
  CHECK_THROWS_AS(generate_synthetic(s), Error);
  s = SyntheticSpec{};
  s.N = 50;
  s.seed = 9;
  const auto a = generate_synthetic(s);
  const auto b = generate_synthetic(s);
  CHECK(a.X == b.X);
  CHECK(a.codes == b.codes);
  s.seed = 10;
  CHECK(generate_synthetic(s).X != a.X);
}

TEST_CASE("synthetic Poisson counts are integral and nonnegative") {
  SyntheticSpec s;
  s.kind = LikelihoodKind::Poisson;
  s.D = 30;
  s.T = 4;
  s.N = 100;
  s.gamma_a = 20.0;
  s.gamma_b = 1.0;
  s.seed = 2;
  const auto d = generate_synthetic(s);
  CHECK((d.X.array() >= 0).all());
  CHECK((d.X.array() == d.X.array().floor()).all());
  CHECK(d.beta_logits.rows() == 30);
}

TEST_CASE("true codes usually beat wrong codes under the marginal likelihood") {
  SyntheticSpec s;
  s.N = 400;
  s.seed = 5;
  const auto d = generate_synthetic(s);
  std::mt19937_64 rng(1);
  int wins = 0, trials = 0;
  for (std::size_t n = 0; n < s.N; ++n) {
    const Eigen::VectorXd x = d.X.row(static_cast<Eigen::Index>(n)).transpose();
    const double truth = gauss_marginal_loglik(x, forward(d.decoder, d.codes[n]), s.gauss);
    Code wrong;
    do wrong = oracle::random_code(s.K, rng, 0.25);
    while (wrong == d.codes[n]);
    ++trials;
    wins += truth >= gauss_marginal_loglik(x, forward(d.decoder, wrong), s.gauss);
  }
  MESSAGE("true-code win rate " << static_cast<double>(wins) / trials);
  CHECK(static_cast<double>(wins) / trials >= 0.95);
}
