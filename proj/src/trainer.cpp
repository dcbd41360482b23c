#include "bpe/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "bpe/binary_io.hpp"
#include "bpe/error.hpp"
#include "bpe/parallel.hpp"

namespace bpe {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

Eigen::VectorXd row(const Eigen::MatrixXd& data, std::size_t n) {
  return data.row(static_cast<Eigen::Index>(n)).transpose();
}

std::unique_ptr<BoundEvaluator> make_evaluator(const TrainState& state, const Eigen::VectorXd& x,
                                               const PriorTerms* prior,
                                               const GammaScalePosterior* gamma) {
  switch (kind_of(state.likelihood)) {
    case LikelihoodKind::Gaussian:
      return std::make_unique<GaussianEvaluator>(
          x, state.net, std::get<GaussianLikelihoodConfig>(state.likelihood), prior);
    case LikelihoodKind::Poisson:
      return std::make_unique<PoissonEvaluator>(
          x, state.net, std::get<PoissonLikelihoodConfig>(state.likelihood), *gamma, prior);
    case LikelihoodKind::Bernoulli:
      return std::make_unique<BernoulliEvaluator>(x, state.net, prior);
  }
  throw Error("unreachable likelihood kind");
}

void check_data_width(const TrainState& state, const Eigen::MatrixXd& data) {
  std::size_t expected = state.net.output_dim();
  if (const auto* p = std::get_if<PoissonLikelihoodConfig>(&state.likelihood))
    expected = p->vocab_size();
  require_dim("data width", expected, static_cast<std::size_t>(data.cols()));
}

TrainConfig resolve_dims(const TrainConfig& config, const Eigen::MatrixXd& data) {
  TrainConfig cfg = config;
  const auto D = static_cast<std::size_t>(data.cols());
  if (cfg.model.data_dim == 0) cfg.model.data_dim = D;
  require_dim("data width", cfg.model.data_dim, D);
  return cfg;
}

}  // namespace

void TrainConfig::validate(std::size_t N) const {
  if (N == 0) throw Error("training set is empty");
  if (batch_size == 0) throw Error("batch_size must be positive");
  if (batch_size > N)
    throw Error("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                std::to_string(N));
  if (model.K == 0) throw Error("model.K must be positive");
  require_dim("prior K", model.K, prior.K);
  prior.validate();
  if (model.likelihood == LikelihoodKind::Gaussian) model.gauss.validate();
  if (model.likelihood == LikelihoodKind::Poisson) {
    if (model.topics == 0) throw Error("model.T must be positive");
    if (!(model.gamma_a > 0.0) || !(model.gamma_b > 0.0))
      throw Error("poisson gamma prior must be positive");
  }
  if (!(adam.rho >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0))
    throw Error("invalid ADAM hyperparameters");
}

TrainState init_state(const TrainConfig& config, std::size_t N) {
  config.validate(N);
  const auto& m = config.model;
  if (m.data_dim == 0) throw Error("model data width is unset");
  TrainState s;
  s.net = make_decoder(m.K, m.hidden, m.output_dim(), final_activation_for(m.likelihood), config.seed);
  s.adam = AdamState::for_network(s.net, config.adam);
  s.pi = BetaPosterior::from_prior(config.prior);
  switch (m.likelihood) {
    case LikelihoodKind::Gaussian:
      s.likelihood = m.gauss;
      break;
    case LikelihoodKind::Poisson: {
      auto logits = random_beta_logits(m.data_dim, m.topics, m.beta_init_scale,
                                       config.seed ^ 0x9e3779b97f4a7c15ull);
      s.likelihood = PoissonLikelihoodConfig(m.gamma_a, m.gamma_b, std::move(logits));
      s.beta_adam = MatrixAdamState::for_shape(static_cast<Eigen::Index>(m.data_dim),
                                               static_cast<Eigen::Index>(m.topics), config.adam);
      s.gamma_table.assign(N, std::nullopt);
      break;
    }
    case LikelihoodKind::Bernoulli:
      s.likelihood = BernoulliLikelihood{};
      break;
  }
  s.codes.assign(N, Code(m.K, 0));
  return s;
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Lambda: return "lambda";
    case Phase::Pi: return "pi";
    case Phase::Codes: return "z";
    case Phase::Theta: return "theta";
  }
  return "?";
}

StepMetrics train_step(TrainState& state, const TrainConfig& config, const Eigen::MatrixXd& data,
                       const std::vector<std::size_t>& batch) {
  const std::size_t N = static_cast<std::size_t>(data.rows());
  if (batch.empty()) throw Error("train_step: empty batch");
  if (state.codes.size() != N) throw DimensionError("code table", state.codes.size(), N);
  for (auto n : batch)
    if (n >= N) throw Error("train_step: batch index out of range");
  check_data_width(state, data);

  const std::size_t B = batch.size();
  const auto kind = kind_of(state.likelihood);
  StepMetrics out;
  out.step = state.step;
  out.epoch = state.epoch;
  auto timed = [&](Phase p, auto&& body) {
    const auto start = Clock::now();
    body();
    out.phase_ms[static_cast<std::size_t>(p)] = config.log_timing ? elapsed_ms(start) : 0.0;
    out.phase_log.push_back(p);
  };

  // Scale posteriors q(lambda_n).
  std::vector<GaussianScalePosterior> gauss_post(B);
  timed(Phase::Lambda, [&] {
    if (kind == LikelihoodKind::Gaussian) {
      const auto& cfg = std::get<GaussianLikelihoodConfig>(state.likelihood);
      parallel_for(B, config.workers, [&](std::size_t i) {
        const auto n = batch[i];
        gauss_post[i] = gauss_lambda_posterior(row(data, n), forward(state.net, state.codes[n]), cfg);
      });
    } else if (kind == LikelihoodKind::Poisson) {
      const auto& cfg = std::get<PoissonLikelihoodConfig>(state.likelihood);
      for (auto n : batch) {
        if (state.gamma_table[n]) continue;
        state.gamma_table[n] = poiss_lambda_posterior(row(data, n), cfg.a(), cfg.b());
        ++state.gamma_computations;
      }
    }
  });

  // q(pi) natural-gradient step from the previous batch's codes (empty codes on the first step).
  timed(Phase::Pi, [&] {
    if (state.last_batch_codes.empty()) state.last_batch_codes.assign(B, Code(state.net.input_dim(), 0));
    out.eta = eta_at(state.pi.step_count, config.prior.eta);
    state.pi = natural_grad_update(state.pi, state.last_batch_codes, N, out.eta, config.prior);
  });

  // Greedy pursuit for every datum in the batch.
  std::vector<Code> previous(B);
  timed(Phase::Codes, [&] {
    const PriorTerms prior(state.pi);
    const auto results = batch_encode(
        B,
        [&](std::size_t i) {
          const auto n = batch[i];
          const GammaScalePosterior* g =
              kind == LikelihoodKind::Poisson ? &*state.gamma_table[n] : nullptr;
          return make_evaluator(state, row(data, n), &prior, g);
        },
        config.workers, config.model.max_active);

    double bound = 0.0, bits = 0.0, evals = 0.0;
    std::vector<Code> new_codes;
    new_codes.reserve(B);
    for (std::size_t i = 0; i < B; ++i) {
      const double s = results[i].final_score();
      if (!std::isfinite(s))
        throw NumericError("z phase: non-finite bound for datum " + std::to_string(batch[i]));
      bound += s;
      bits += static_cast<double>(results[i].active_set.size());
      evals += static_cast<double>(results[i].evaluations);
      previous[i] = std::move(state.codes[batch[i]]);
      state.codes[batch[i]] = results[i].code;
      new_codes.push_back(results[i].code);
    }
    out.mean_bound = bound / static_cast<double>(B);
    out.mean_active_bits = bits / static_cast<double>(B);
    out.evals_per_datum = evals / static_cast<double>(B);
    out.sparsity = state.net.input_dim() >= 2 ? sparsity(new_codes) : 1.0;
    state.last_batch_codes = std::move(new_codes);
  });

  // ADAM ascent on the batch-mean theta bound.
  timed(Phase::Theta, [&] {
    std::vector<Code> codes;
    codes.reserve(B);
    for (auto n : batch) codes.push_back(state.codes[n]);
    const Eigen::MatrixXd Z = codes_to_matrix(codes, state.net.input_dim());
    const Eigen::MatrixXd F = forward_batch(state.net, Z);
    Eigen::MatrixXd upstream(F.rows(), F.cols());
    Eigen::MatrixXd word_grad;  // Poisson: dL/dphi per datum, W x B; dbeta sums to G F^T

    switch (kind) {
      case LikelihoodKind::Gaussian: {
        const auto& cfg = std::get<GaussianLikelihoodConfig>(state.likelihood);
        for (std::size_t i = 0; i < B; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          const Eigen::VectorXd x = row(data, batch[i]);
          // The posterior must describe the code the bound is evaluated at.
          const auto post = previous[i] == codes[i]
                                ? gauss_post[i]
                                : gauss_lambda_posterior(x, F.col(col), cfg);
          upstream.col(col) = gauss_theta_upstream(x, F.col(col), cfg, post);
        }
        break;
      }
      case LikelihoodKind::Poisson: {
        const auto& cfg = std::get<PoissonLikelihoodConfig>(state.likelihood);
        word_grad.resize(static_cast<Eigen::Index>(cfg.vocab_size()), static_cast<Eigen::Index>(B));
        for (std::size_t i = 0; i < B; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          const auto up = poiss_upstream(row(data, batch[i]), F.col(col), cfg,
                                         *state.gamma_table[batch[i]]);
          upstream.col(col) = up.df;
          word_grad.col(col) = up.dphi;
        }
        break;
      }
      case LikelihoodKind::Bernoulli:
        for (std::size_t i = 0; i < B; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          upstream.col(col) = bern_upstream(row(data, batch[i]), F.col(col));
        }
        break;
    }

    const double inv_b = 1.0 / static_cast<double>(B);
    GradientBuffer grad = backward_batch(state.net, Z, upstream);
    grad *= inv_b;
    if (!grad.all_finite()) throw NumericError("theta phase: non-finite decoder gradient");
    adam_step(state.net, grad, state.adam);

    if (kind == LikelihoodKind::Poisson) {
      auto& cfg = std::get<PoissonLikelihoodConfig>(state.likelihood);
      const Eigen::MatrixXd dbeta = word_grad * F.transpose() * inv_b;
      const Eigen::MatrixXd g = beta_logit_gradient(cfg.beta(), dbeta);
      if (!g.allFinite()) throw NumericError("theta phase: non-finite topic gradient");
      Eigen::MatrixXd logits = cfg.beta_logits();
      adam_step(logits, g, state.beta_adam);
      cfg.set_beta_logits(std::move(logits));
    }
  });

  ++state.step;
  return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t N, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw Error("batch_size must be positive");
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < N; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(N, start + batch_size)));
  return batches;
}

void write_metrics_row(std::ostream& os, const StepMetrics& m) {
  os << m.step << ',' << m.epoch;
  for (double ms : m.phase_ms) os << ',' << fmt(ms);
  os << ',' << fmt(m.mean_bound) << ',' << fmt(m.mean_active_bits) << ','
     << fmt(m.evals_per_datum) << ',';
  if (m.heldout_metric) os << fmt(*m.heldout_metric);
  os << ',' << fmt(m.sparsity) << '\n';
}

TrainResult train(const TrainConfig& config_in, const Eigen::MatrixXd& data,
                  const Eigen::MatrixXd* heldout, std::optional<TrainState> resume) {
  const TrainConfig config = resolve_dims(config_in, data);
  const auto N = static_cast<std::size_t>(data.rows());
  config.validate(N);

  TrainResult result;
  result.state = resume ? std::move(*resume) : init_state(config, N);
  auto& state = result.state;
  check_data_width(state, data);
  if (state.codes.size() != N) throw DimensionError("resumed code table", state.codes.size(), N);

  std::ofstream metrics;
  if (!config.metrics_path.empty()) {
    metrics.open(config.metrics_path, std::ios::trunc);
    if (!metrics) throw Error("cannot write metrics '" + config.metrics_path + "'");
    std::istringstream lines(config.config_text);
    for (std::string line; std::getline(lines, line);) metrics << "# " << line << '\n';
    metrics << kMetricsHeader << '\n';
  }
  auto checkpoint = [&] {
    if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, state, config.config_text);
  };
  if (state.epoch >= config.epochs) checkpoint();

  while (state.epoch < config.epochs) {
    const auto batches = epoch_batches(N, config.batch_size, config.seed, state.epoch);
    const std::size_t first = result.steps.size();
    double bound_sum = 0.0;
    for (const auto& b : batches) {
      result.steps.push_back(train_step(state, config, data, b));
      bound_sum += result.steps.back().mean_bound * static_cast<double>(b.size());
    }
    ++state.epoch;
    result.epoch_mean_bound.push_back(bound_sum / static_cast<double>(N));

    if (heldout != nullptr && heldout->rows() > 0 && config.eval_every > 0 &&
        state.epoch % config.eval_every == 0)
      result.steps.back().heldout_metric = evaluate(state, config, *heldout).value;

    if (metrics.is_open()) {
      for (std::size_t i = first; i < result.steps.size(); ++i) write_metrics_row(metrics, result.steps[i]);
      metrics.flush();
      if (!metrics) throw Error("failed writing metrics '" + config.metrics_path + "'");
    }
    checkpoint();

    if (config.early_stop && result.epoch_mean_bound.size() > config.early_stop_window) {
      const auto& h = result.epoch_mean_bound;
      const double now = h.back();
      const double then = h[h.size() - 1 - config.early_stop_window];
      if (std::abs(now - then) <= config.early_stop_tol * std::abs(then)) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

EncodedSet encode_dataset(const TrainState& state, const TrainConfig& config,
                          const Eigen::MatrixXd& data, bool include_prior) {
  check_data_width(state, data);
  const auto N = static_cast<std::size_t>(data.rows());
  const auto kind = kind_of(state.likelihood);
  const PriorTerms prior(state.pi);

  std::vector<GammaScalePosterior> gamma(kind == LikelihoodKind::Poisson ? N : 0);
  if (kind == LikelihoodKind::Poisson) {
    const auto& cfg = std::get<PoissonLikelihoodConfig>(state.likelihood);
    for (std::size_t n = 0; n < N; ++n) gamma[n] = poiss_lambda_posterior(row(data, n), cfg.a(), cfg.b());
  }

  EncodedSet out;
  out.results = batch_encode(
      N,
      [&](std::size_t n) {
        return make_evaluator(state, row(data, n), include_prior ? &prior : nullptr,
                              gamma.empty() ? nullptr : &gamma[n]);
      },
      config.workers, config.model.max_active);
  out.codes.reserve(N);
  for (const auto& r : out.results) out.codes.push_back(r.code);

  out.scale_means = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(N));
  if (kind == LikelihoodKind::Gaussian) {
    const auto& cfg = std::get<GaussianLikelihoodConfig>(state.likelihood);
    for (std::size_t n = 0; n < N; ++n)
      out.scale_means[static_cast<Eigen::Index>(n)] =
          gauss_lambda_posterior(row(data, n), forward(state.net, out.codes[n]), cfg).mean;
  } else if (kind == LikelihoodKind::Poisson) {
    for (std::size_t n = 0; n < N; ++n) out.scale_means[static_cast<Eigen::Index>(n)] = gamma[n].mean();
  }
  return out;
}

EvalReport evaluate(const TrainState& state, const TrainConfig& config,
                    const Eigen::MatrixXd& heldout) {
  if (heldout.rows() == 0) throw Error("evaluate: held-out set is empty");
  const auto enc = encode_dataset(state, config, heldout, config.eval_include_prior);
  EvalReport r;
  r.N = static_cast<std::size_t>(heldout.rows());
  switch (kind_of(state.likelihood)) {
    case LikelihoodKind::Gaussian:
      r.metric = "mse";
      r.value = mse(heldout, enc.codes, state.net, enc.scale_means);
      break;
    case LikelihoodKind::Poisson:
      r.metric = "nll";
      r.value = poisson_nll(heldout, enc.codes, state.net,
                            std::get<PoissonLikelihoodConfig>(state.likelihood).beta(),
                            enc.scale_means);
      break;
    case LikelihoodKind::Bernoulli:
      r.metric = "nll";
      r.value = nll(heldout, enc.codes, state.net);
      break;
  }
  r.sparsity = state.net.input_dim() >= 2 ? sparsity(enc.codes) : 1.0;
  double bits = 0.0;
  for (const auto& z : enc.codes) bits += static_cast<double>(active_count(z));
  r.mean_active_bits = bits / static_cast<double>(r.N);
  r.activation = activation_probabilities(enc.codes, state.net.input_dim());
  r.fingerprint = fingerprint(config.config_text);
  return r;
}

// --- Checkpoints -------------------------------------------------------------


void write_checkpoint(std::ostream& os, const TrainState& state, const std::string& config_text) {
  using namespace binio;
  std::vector<std::pair<const char*, std::string>> sections;
  auto section = [&](const char* tag, auto&& body) {
    std::ostringstream ss(std::ios::binary);
    body(ss);
    sections.emplace_back(tag, ss.str());
  };

  section("CONF", [&](std::ostream& s) { put_string(s, config_text); });
  section("LIKE", [&](std::ostream& s) {
    put_u32(s, static_cast<std::uint32_t>(kind_of(state.likelihood)));
    const auto* g = std::get_if<GaussianLikelihoodConfig>(&state.likelihood);
    put_f64(s, g ? g->sigma2 : 0.0);
    put_f64(s, g ? g->c : 0.0);
  });
  section("NETW", [&](std::ostream& s) { write_network(s, state.net, state.adam); });
  section("BETA", [&](std::ostream& s) { write_beta_posterior(s, state.pi); });
  if (const auto* p = std::get_if<PoissonLikelihoodConfig>(&state.likelihood)) {
    section("TOPC", [&](std::ostream& s) {
      put_u64(s, p->vocab_size());
      put_u64(s, p->topic_count());
      put_f64(s, p->a());
      put_f64(s, p->b());
      put_array(s, p->beta_logits());
      const auto& ad = state.beta_adam;
      put_u64(s, ad.t);
      put_f64(s, ad.config.rho);
      put_f64(s, ad.config.beta1);
      put_f64(s, ad.config.beta2);
      put_f64(s, ad.config.eps);
      put_array(s, ad.m);
      put_array(s, ad.v);
    });
  }
  section("CODE", [&](std::ostream& s) {
    put_u64(s, state.codes.size());
    put_u64(s, state.net.input_dim());
    for (const auto& z : state.codes) s.write(reinterpret_cast<const char*>(z.data()),
                                              static_cast<std::streamsize>(z.size()));
  });
  section("LAST", [&](std::ostream& s) {
    put_u64(s, state.last_batch_codes.size());
    for (const auto& z : state.last_batch_codes)
      s.write(reinterpret_cast<const char*>(z.data()), static_cast<std::streamsize>(z.size()));
  });
  section("GAMM", [&](std::ostream& s) {
    put_u64(s, state.gamma_table.size());
    for (const auto& g : state.gamma_table) {
      s.put(g ? 1 : 0);
      put_f64(s, g ? g->shape : 0.0);
      put_f64(s, g ? g->rate : 0.0);
    }
  });
  section("STAT", [&](std::ostream& s) {
    put_u64(s, state.epoch);
    put_u64(s, state.step);
    put_u64(s, state.gamma_computations);
  });

  put_magic(os, "BBPT");
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [tag, payload] : sections) {
    os.write(tag, 4);
    put_u64(os, payload.size());
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
}

void save_checkpoint(const std::string& path, const TrainState& state, const std::string& config_text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + tmp + "'");
    write_checkpoint(out, state, config_text);
    out.flush();
    if (!out) throw Error("failed writing checkpoint '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move checkpoint into place at '" + path + "'");
}

LoadedCheckpoint read_checkpoint(std::istream& is) {
  using namespace binio;
  get_magic(is, "BBPT");
  const auto version = get_u32(is);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_u32(is);
  std::map<std::string, std::string> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    char tag[4];
    is.read(tag, 4);
    expect(is, "section tag");
    const auto len = get_u64(is);
    if (len > (1ull << 34)) throw FormatError("implausible section length");
    std::string payload(len, '\0');
    is.read(payload.data(), static_cast<std::streamsize>(len));
    expect(is, "section payload");
    sections[std::string(tag, 4)] = std::move(payload);
  }
  auto open = [&](const char* tag) {
    auto it = sections.find(tag);
    if (it == sections.end()) throw FormatError(std::string("checkpoint lacks section ") + tag);
    return std::istringstream(it->second, std::ios::binary);
  };

  LoadedCheckpoint out;
  auto& s = out.state;
  {
    auto in = open("CONF");
    out.config_text = get_string(in);
  }
  {
    auto in = open("NETW");
    read_network(in, s.net, s.adam);
  }
  {
    auto in = open("BETA");
    s.pi = read_beta_posterior(in);
    require_dim("checkpoint beta posterior", s.net.input_dim(), s.pi.K());
  }
  LikelihoodKind kind;
  {
    auto in = open("LIKE");
    const auto tag = get_u32(in);
    if (tag > 2) throw FormatError("unknown likelihood tag in checkpoint");
    kind = static_cast<LikelihoodKind>(tag);
    const double sigma2 = get_f64(in), c = get_f64(in);
    if (kind == LikelihoodKind::Gaussian) s.likelihood = GaussianLikelihoodConfig{sigma2, c};
    if (kind == LikelihoodKind::Bernoulli) s.likelihood = BernoulliLikelihood{};
  }
  if (kind == LikelihoodKind::Poisson) {
    auto in = open("TOPC");
    const auto W = static_cast<Eigen::Index>(get_u64(in));
    const auto T = static_cast<Eigen::Index>(get_u64(in));
    const double a = get_f64(in), b = get_f64(in);
    Eigen::MatrixXd logits(W, T);
    get_array(in, logits);
    s.likelihood = PoissonLikelihoodConfig(a, b, std::move(logits));
    AdamConfig cfg;
    const auto t = get_u64(in);
    cfg.rho = get_f64(in);
    cfg.beta1 = get_f64(in);
    cfg.beta2 = get_f64(in);
    cfg.eps = get_f64(in);
    s.beta_adam = MatrixAdamState::for_shape(W, T, cfg);
    s.beta_adam.t = t;
    get_array(in, s.beta_adam.m);
    get_array(in, s.beta_adam.v);
  }
  {
    auto in = open("CODE");
    const auto n = get_u64(in);
    const auto K = get_u64(in);
    require_dim("checkpoint code width", s.net.input_dim(), K);
    s.codes.assign(n, Code(K, 0));
    for (auto& z : s.codes) {
      in.read(reinterpret_cast<char*>(z.data()), static_cast<std::streamsize>(K));
      expect(in, "codes");
      validate_code(z, K);
    }
  }
  {
    auto in = open("LAST");
    const auto n = get_u64(in);
    const auto K = s.net.input_dim();
    s.last_batch_codes.assign(n, Code(K, 0));
    for (auto& z : s.last_batch_codes) {
      in.read(reinterpret_cast<char*>(z.data()), static_cast<std::streamsize>(K));
      expect(in, "previous batch codes");
      validate_code(z, K);
    }
  }
  {
    auto in = open("GAMM");
    const auto n = get_u64(in);
    s.gamma_table.resize(n);
    for (auto& g : s.gamma_table) {
      const int present = in.get();
      expect(in, "gamma table");
      const double shape = get_f64(in), rate = get_f64(in);
      if (present) g = GammaScalePosterior{shape, rate};
    }
  }
  {
    auto in = open("STAT");
    s.epoch = get_u64(in);
    s.step = get_u64(in);
    s.gamma_computations = get_u64(in);
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

std::string fingerprint(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace bpe
