#include "bpe/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "bpe/error.hpp"

namespace bpe {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error("config " + key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error("config " + key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config " + key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  return out;
}

std::string fmt_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define BPE_DOUBLE(field)                                                                    \
  Entry {                                                                                    \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                                      \
  }
#define BPE_SIZE(field)                                                                    \
  Entry {                                                                                  \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_size(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                         \
  }
#define BPE_BOOL(field)                                                                    \
  Entry {                                                                                  \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }, \
        [](const RunConfig& c) { return fmt_bool(c.field); }                               \
  }
#define BPE_STRING(field)                                                                  \
  Entry {                                                                                  \
    [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; },           \
        [](const RunConfig& c) { return c.field; }                                         \
  }

const std::map<std::string, Entry>& schema() {
  static const std::map<std::string, Entry> table = {
      {"model.likelihood",
       Entry{[](RunConfig& c, const std::string&, const std::string& v) {
               c.train.model.likelihood = parse_likelihood(v);
             },
             [](const RunConfig& c) { return std::string(likelihood_name(c.train.model.likelihood)); }}},
      {"model.K", BPE_SIZE(train.model.K)},
      {"model.hidden",
       Entry{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.train.model.hidden = parse_sizes(k, v);
             },
             [](const RunConfig& c) { return fmt_sizes(c.train.model.hidden); }}},
      {"model.D", BPE_SIZE(train.model.data_dim)},
      {"model.T", BPE_SIZE(train.model.topics)},
      {"model.max_active", BPE_SIZE(train.model.max_active)},
      {"gauss.sigma2", BPE_DOUBLE(train.model.gauss.sigma2)},
      {"gauss.c", BPE_DOUBLE(train.model.gauss.c)},
      {"poisson.a", BPE_DOUBLE(train.model.gamma_a)},
      {"poisson.b", BPE_DOUBLE(train.model.gamma_b)},
      {"poisson.beta_init_scale", BPE_DOUBLE(train.model.beta_init_scale)},
      {"prior.alpha", BPE_DOUBLE(train.prior.alpha)},
      {"prior.gamma", BPE_DOUBLE(train.prior.gamma_mass)},
      {"prior.t0", BPE_DOUBLE(train.prior.eta.t0)},
      {"prior.kappa", BPE_DOUBLE(train.prior.eta.kappa)},
      {"adam.rho", BPE_DOUBLE(train.adam.rho)},
      {"adam.beta1", BPE_DOUBLE(train.adam.beta1)},
      {"adam.beta2", BPE_DOUBLE(train.adam.beta2)},
      {"adam.eps", BPE_DOUBLE(train.adam.eps)},
      {"train.batch_size", BPE_SIZE(train.batch_size)},
      {"train.epochs", BPE_SIZE(train.epochs)},
      {"train.seed",
       Entry{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.train.seed = parse_u64(k, v);
               c.has_train_seed = true;
             },
             [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"train.workers", BPE_SIZE(train.workers)},
      {"train.eval_every", BPE_SIZE(train.eval_every)},
      {"train.early_stop", BPE_BOOL(train.early_stop)},
      {"train.early_stop_tol", BPE_DOUBLE(train.early_stop_tol)},
      {"train.early_stop_window", BPE_SIZE(train.early_stop_window)},
      {"train.eval_prior", BPE_BOOL(train.eval_include_prior)},
      {"train.timing", BPE_BOOL(train.log_timing)},
      {"train.checkpoint", BPE_STRING(train.checkpoint_path)},
      {"train.metrics", BPE_STRING(train.metrics_path)},
      {"data.path", BPE_STRING(data.path)},
      {"data.format", BPE_STRING(data.format)},
      {"data.labels", BPE_STRING(data.labels)},
      {"data.vocab", BPE_STRING(data.vocab)},
      {"data.heldout", BPE_STRING(data.heldout)},
      {"data.heldout_fraction", BPE_DOUBLE(data.heldout_fraction)},
      {"data.binarize", BPE_BOOL(data.binarize)},
      {"data.threshold", BPE_DOUBLE(data.threshold)},
      {"data.scale_max", BPE_DOUBLE(data.scale_max)},
      {"data.scale_seed",
       Entry{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.data.scale_seed = parse_u64(k, v);
             },
             [](const RunConfig& c) { return std::to_string(c.data.scale_seed); }}},
      {"synth.N", BPE_SIZE(synth.N)},
      {"synth.D", BPE_SIZE(synth.D)},
      {"synth.weight_scale", BPE_DOUBLE(synth.weight_scale)},
      {"synth.beta_logit_scale", BPE_DOUBLE(synth.beta_logit_scale)},
      {"synth.seed",
       Entry{[](RunConfig& c, const std::string& k, const std::string& v) {
               c.synth.seed = parse_u64(k, v);
               c.synth.has_seed = true;
             },
             [](const RunConfig& c) { return std::to_string(c.synth.seed); }}},
  };
  return table;
}

#undef BPE_DOUBLE
#undef BPE_SIZE
#undef BPE_BOOL
#undef BPE_STRING

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(ConfigMap& map, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("override '" + assignment + "' is not key=value");
  const auto key = trim(assignment.substr(0, eq));
  if (key.empty()) throw Error("override '" + assignment + "' has an empty key");
  map[key] = trim(assignment.substr(eq + 1));
}

RunConfig run_config_from_map(const ConfigMap& map) {
  const auto& table = schema();
  for (const auto& [key, value] : map)
    if (!table.contains(key)) throw Error("unknown config key '" + key + "'");

  RunConfig cfg;
  for (const auto& [key, value] : map)
    if (key != "prior.gamma") table.at(key).set(cfg, key, value);

  cfg.train.prior.K = cfg.train.model.K;
  if (auto it = map.find("prior.gamma"); it != map.end())
    table.at("prior.gamma").set(cfg, it->first, it->second);
  else
    cfg.train.prior.gamma_mass = static_cast<double>(cfg.train.model.K) / 5.0;

  if (cfg.data.format != "auto" && cfg.data.format != "idx" && cfg.data.format != "csv" &&
      cfg.data.format != "bow")
    throw Error("config data.format: expected auto, idx, csv or bow, got '" + cfg.data.format + "'");
  if (!(cfg.data.heldout_fraction >= 0.0 && cfg.data.heldout_fraction < 1.0))
    throw Error("config data.heldout_fraction must lie in [0, 1)");
  cfg.train.model.gauss.validate();
  cfg.train.prior.validate();
  return cfg;
}

ConfigMap to_config_map(const RunConfig& cfg) {
  ConfigMap map;
  for (const auto& [key, entry] : schema()) {
    if (key == "train.seed" && !cfg.has_train_seed) continue;
    if (key == "synth.seed" && !cfg.synth.has_seed) continue;
    map[key] = entry.get(cfg);
  }
  return map;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_config_map(cfg)) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, e] : schema()) keys.push_back(k);
  return keys;
}

SyntheticSpec synthetic_spec_from(const RunConfig& cfg) {
  SyntheticSpec s;
  const auto& m = cfg.train.model;
  s.kind = m.likelihood;
  s.K = m.K;
  s.D = cfg.synth.D;
  s.T = m.topics;
  s.hidden = m.hidden;
  s.weight_scale = cfg.synth.weight_scale;
  s.alpha = cfg.train.prior.alpha;
  s.gamma_mass = cfg.train.prior.gamma_mass;
  s.gauss = m.gauss;
  s.gamma_a = m.gamma_a;
  s.gamma_b = m.gamma_b;
  s.beta_logit_scale = cfg.synth.beta_logit_scale;
  s.N = cfg.synth.N;
  s.seed = cfg.synth.seed;
  return s;
}

}  // namespace bpe
