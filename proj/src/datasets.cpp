#include "bpe/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "bpe/error.hpp"

namespace bpe {
namespace {

std::uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError(path + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? (std::ios::binary | std::ios::trunc) : std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

std::vector<unsigned char> read_payload(std::istream& is, std::size_t n, const std::string& path) {
  std::vector<unsigned char> bytes(n);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw FormatError(path + ": truncated IDX payload (expected " + std::to_string(n) + " bytes)");
  return bytes;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Provenance Provenance::then(std::string step) const {
  Provenance p = *this;
  p.transforms.push_back(std::move(step));
  return p;
}

void Provenance::write_header(std::ostream& os) const {
  os << "# provenance.source: " << source << '\n';
  for (const auto& t : transforms) os << "# provenance.transform: " << t << '\n';
}

// --- IDX -------------------------------------------------------------------

DenseDataset read_idx(const std::string& images_path, const std::string& labels_path) {
  auto in = open_in(images_path, true);
  in.peek();
  if (in.eof()) throw FormatError(images_path + ": empty file");
  const auto magic = read_be32(in, images_path);
  if (magic != kIdxImageMagic)
    throw FormatError(images_path + ": bad IDX image magic 0x" + [&] {
      std::ostringstream os;
      os << std::hex << std::setw(8) << std::setfill('0') << magic;
      return os.str();
    }());
  const auto n = read_be32(in, images_path);
  const auto rows = read_be32(in, images_path);
  const auto cols = read_be32(in, images_path);
  if (rows == 0 || cols == 0) throw FormatError(images_path + ": zero image dimension");
  const std::size_t D = std::size_t{rows} * cols;
  const auto bytes = read_payload(in, std::size_t{n} * D, images_path);

  DenseDataset ds;
  ds.values.resize(n, static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < D; ++d)
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          static_cast<double>(bytes[i * D + d]) / 255.0;
  ds.provenance.source = "idx:" + images_path + " (" + std::to_string(rows) + "x" +
                         std::to_string(cols) + ")";

  if (!labels_path.empty()) {
    auto lin = open_in(labels_path, true);
    lin.peek();
    if (lin.eof()) throw FormatError(labels_path + ": empty file");
    if (read_be32(lin, labels_path) != kIdxLabelMagic)
      throw FormatError(labels_path + ": bad IDX label magic");
    const auto nl = read_be32(lin, labels_path);
    if (nl != n)
      throw FormatError("label count " + std::to_string(nl) + " does not match image count " +
                        std::to_string(n));
    const auto lab = read_payload(lin, nl, labels_path);
    ds.labels.assign(lab.begin(), lab.end());
    ds.provenance.source += " labels:" + labels_path;
  }
  return ds;
}

void write_idx_images(const std::string& path, const Eigen::MatrixXd& values, std::size_t rows,
                      std::size_t cols) {
  require_dim("idx image width", rows * cols, static_cast<std::size_t>(values.cols()));
  auto out = open_out(path, true);
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(values.rows()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index d = 0; d < values.cols(); ++d) {
      const double v = std::clamp(values(i, d), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  auto out = open_out(path, true);
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(static_cast<unsigned char>(l)));
}

// --- Transforms --------------------------------------------------------------

DenseDataset binarize(const DenseDataset& ds, double threshold) {
  DenseDataset out = ds;
  out.values = (ds.values.array() >= threshold).cast<double>().matrix();
  out.provenance = ds.provenance.then("binarize(threshold=" + fmt_double(threshold) + ")");
  return out;
}

Eigen::VectorXd sample_scale_factors(std::size_t N, double scale_max, std::uint64_t seed) {
  if (!(scale_max >= 0.0 && scale_max < 1.0))
    throw Error("scale_max must lie in [0, 1), got " + fmt_double(scale_max));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale_max, scale_max);
  Eigen::VectorXd m(static_cast<Eigen::Index>(N));
  for (Eigen::Index n = 0; n < m.size(); ++n) m[n] = scale_max == 0.0 ? 1.0 : 1.0 + u(rng);
  return m;
}

DenseDataset scale_corrupt(const DenseDataset& ds, double scale_max, std::uint64_t seed) {
  const auto m = sample_scale_factors(ds.N(), scale_max, seed);
  DenseDataset out = ds;
  out.values = m.asDiagonal() * ds.values;
  out.provenance = ds.provenance.then("scale_corrupt(scale_max=" + fmt_double(scale_max) +
                                      ",seed=" + std::to_string(seed) + ")");
  return out;
}

// --- Text formats ------------------------------------------------------------

CountDataset read_bow(const std::string& counts_path, const std::string& vocab_path) {
  CountDataset ds;
  {
    auto vin = open_in(vocab_path);
    std::string line;
    while (std::getline(vin, line)) {
      line = trim(line);
      if (!line.empty()) ds.vocabulary.push_back(line);
    }
  }
  if (ds.vocabulary.empty()) throw FormatError(vocab_path + ": empty vocabulary");
  const long W = static_cast<long>(ds.vocabulary.size());

  std::map<long, std::map<long, long>> docs;
  auto in = open_in(counts_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long doc = 0, tok = 0, count = 0;
    std::string extra;
    if (!(ss >> doc >> tok >> count) || (ss >> extra))
      throw FormatError(counts_path + ":" + std::to_string(lineno) +
                        ": expected 'doc_id token_id count'");
    if (doc < 0) throw FormatError(counts_path + ":" + std::to_string(lineno) + ": negative doc id");
    if (tok < 0 || tok >= W)
      throw FormatError(counts_path + ":" + std::to_string(lineno) + ": unknown token id " +
                        std::to_string(tok));
    if (count <= 0)
      throw FormatError(counts_path + ":" + std::to_string(lineno) + ": count must be positive");
    docs[doc][tok] += count;
  }

  ds.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(docs.size()), W);
  Eigen::Index row = 0;
  for (const auto& [doc, toks] : docs) {
    ds.doc_ids.push_back(doc);
    for (const auto& [tok, count] : toks) ds.counts(row, tok) = static_cast<int>(count);
    ++row;
  }
  ds.provenance.source = "bow:" + counts_path + " vocab:" + vocab_path;
  return ds;
}

void write_bow(const std::string& counts_path, const std::string& vocab_path,
               const CountDataset& ds) {
  auto out = open_out(counts_path);
  ds.provenance.write_header(out);
  for (Eigen::Index n = 0; n < ds.counts.rows(); ++n) {
    const long id = ds.doc_ids.empty() ? static_cast<long>(n) : ds.doc_ids[static_cast<std::size_t>(n)];
    for (Eigen::Index w = 0; w < ds.counts.cols(); ++w)
      if (ds.counts(n, w) > 0) out << id << ' ' << w << ' ' << ds.counts(n, w) << '\n';
  }
  auto vout = open_out(vocab_path);
  for (const auto& v : ds.vocabulary) vout << v << '\n';
}

DenseDataset read_dense_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  DenseDataset ds;
  ds.provenance.source = "csv:" + path;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(rows.front().size()) + " columns, got " +
                        std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": no data rows");
  ds.values.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t d = 0; d < rows[i].size(); ++d) {
      if (!std::isfinite(rows[i][d]))
        throw FormatError(path + ": non-finite value in row " + std::to_string(i));
      ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
    }
  return ds;
}

void write_dense_csv(const std::string& path, const Eigen::MatrixXd& values,
                     const Provenance& provenance) {
  auto out = open_out(path);
  provenance.write_header(out);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index d = 0; d < values.cols(); ++d) {
      if (d) out << ',';
      out << values(i, d);
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

void write_codes_csv(std::ostream& os, const std::vector<Code>& codes) {
  for (const auto& z : codes) {
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (k) os << ',';
      os << (z[k] ? '1' : '0');
    }
    os << '\n';
  }
}

void write_codes_csv(const std::string& path, const std::vector<Code>& codes) {
  auto out = open_out(path);
  write_codes_csv(out, codes);
  if (!out) throw Error("failed writing '" + path + "'");
}

std::vector<Code> read_codes_csv(const std::string& path) {
  const auto ds = read_dense_csv(path);
  std::vector<Code> codes(ds.N(), Code(ds.D(), 0));
  for (std::size_t n = 0; n < ds.N(); ++n)
    for (std::size_t k = 0; k < ds.D(); ++k) {
      const double v = ds.values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
      if (v != 0.0 && v != 1.0) throw FormatError(path + ": code entries must be 0 or 1");
      codes[n][k] = v == 1.0;
    }
  return codes;
}

// --- Synthetic ---------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (K == 0 || D == 0 || N == 0) throw Error("synthetic: K, D and N must be positive");
  if (!(gamma_mass > 0.0) || !(gamma_mass < static_cast<double>(K)))
    throw Error("synthetic: degenerate spec, gamma must lie in (0, K)");
  if (!(alpha > 0.0)) throw Error("synthetic: alpha must be positive");
  if (kind == LikelihoodKind::Gaussian) gauss.validate();
  if (kind == LikelihoodKind::Poisson) {
    if (T == 0) throw Error("synthetic: T must be positive");
    if (!(gamma_a > 0.0) || !(gamma_b > 0.0)) throw Error("synthetic: gamma prior must be positive");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto K = static_cast<Eigen::Index>(spec.K);
  const auto N = static_cast<Eigen::Index>(spec.N);
  const auto D = static_cast<Eigen::Index>(spec.D);

  SyntheticData out;
  const std::size_t out_dim = spec.kind == LikelihoodKind::Poisson ? spec.T : spec.D;
  out.decoder = make_decoder(spec.K, spec.hidden, out_dim, final_activation_for(spec.kind), rng());
  for (auto& layer : out.decoder.mutable_layers()) layer.weight *= spec.weight_scale;

  Eigen::MatrixXd beta;
  if (spec.kind == LikelihoodKind::Poisson) {
    out.beta_logits = random_beta_logits(spec.D, spec.T, spec.beta_logit_scale, rng());
    beta = column_softmax(out.beta_logits);
  }

  const double pa = spec.alpha * spec.gamma_mass / static_cast<double>(spec.K);
  const double pb = spec.alpha * (1.0 - spec.gamma_mass / static_cast<double>(spec.K));
  std::gamma_distribution<double> ga(pa, 1.0), gb(pb, 1.0);
  out.pi.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double u = ga(rng), v = gb(rng);
    out.pi[k] = (u + v) > 0.0 ? u / (u + v) : 0.0;
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.codes.assign(spec.N, Code(spec.K, 0));
  out.lambda = Eigen::VectorXd::Ones(N);
  out.X.resize(N, D);
  for (Eigen::Index n = 0; n < N; ++n) {
    auto& z = out.codes[static_cast<std::size_t>(n)];
    for (Eigen::Index k = 0; k < K; ++k) z[static_cast<std::size_t>(k)] = unif(rng) < out.pi[k];
    const Eigen::VectorXd f = forward(out.decoder, z);
    switch (spec.kind) {
      case LikelihoodKind::Gaussian: {
        out.lambda[n] = std::sqrt(spec.gauss.c) * normal(rng);
        const double sd = std::sqrt(spec.gauss.sigma2);
        for (Eigen::Index d = 0; d < D; ++d) out.X(n, d) = out.lambda[n] * f[d] + sd * normal(rng);
        break;
      }
      case LikelihoodKind::Poisson: {
        std::gamma_distribution<double> gl(spec.gamma_a, 1.0 / spec.gamma_b);
        out.lambda[n] = gl(rng);
        const Eigen::VectorXd phi = beta * f;
        for (Eigen::Index w = 0; w < D; ++w) {
          const double rate = out.lambda[n] * phi[w];
          if (rate > 0.0) {
            std::poisson_distribution<long> pois(rate);
            out.X(n, w) = static_cast<double>(pois(rng));
          } else {
            out.X(n, w) = 0.0;
          }
        }
        break;
      }
      case LikelihoodKind::Bernoulli:
        for (Eigen::Index d = 0; d < D; ++d) out.X(n, d) = unif(rng) < f[d] ? 1.0 : 0.0;
        break;
    }
  }
  std::ostringstream src;
  src << "synthetic(" << likelihood_name(spec.kind) << ",K=" << spec.K << ",D=" << spec.D
      << ",N=" << spec.N << ",alpha=" << fmt_double(spec.alpha)
      << ",gamma=" << fmt_double(spec.gamma_mass) << ",seed=" << spec.seed << ")";
  out.provenance.source = src.str();
  return out;
}

}  // namespace bpe
