// bpe: train, encode, evaluate and inspect Beta-Bernoulli sparse-coding models.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bpe/config.hpp"
#include "bpe/datasets.hpp"
#include "bpe/error.hpp"
#include "bpe/metrics.hpp"
#include "bpe/trainer.hpp"

namespace fs = std::filesystem;
using namespace bpe;

namespace {

struct SharedFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool csv = false;
  std::string out;
  std::vector<std::string> sets;
};

void add_shared(CLI::App* app, SharedFlags& f, const std::string& seed_help) {
  app->add_option("--config", f.config, "key=value configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, seed_help);
  app->add_option("--workers", f.workers, "batch-encoding threads (1 is the reference mode)");
  app->add_flag("--csv", f.csv, "machine-readable CSV output");
  app->add_option("--out", f.out, "output path");
  app->add_option("--set", f.sets, "override a configuration key (key=value), repeatable");
}

ConfigMap base_map(const SharedFlags& f, ConfigMap map = {}) {
  if (!f.config.empty())
    for (const auto& [k, v] : read_config_file(f.config)) map[k] = v;
  for (const auto& s : f.sets) apply_override(map, s);
  if (f.workers) map["train.workers"] = std::to_string(*f.workers);
  return map;
}

std::string extension(const std::string& path) { return fs::path(path).extension().string(); }

std::string resolve_format(const DataConfig& d, const std::string& path) {
  if (d.format != "auto") return d.format;
  const auto ext = extension(path);
  if (ext == ".csv") return "csv";
  if (!d.vocab.empty() || ext == ".bow") return "bow";
  return "idx";
}

struct Loaded {
  Eigen::MatrixXd values;
  std::vector<std::string> vocabulary;
};

Loaded load_one(const DataConfig& d, const std::string& path, const std::string& labels) {
  Loaded out;
  const auto format = resolve_format(d, path);
  DenseDataset ds;
  if (format == "bow") {
    if (d.vocab.empty()) throw Error("data.vocab is required for bag-of-words data");
    const auto bow = read_bow(path, d.vocab);
    out.vocabulary = bow.vocabulary;
    out.values = bow.as_real();
    return out;
  }
  ds = format == "csv" ? read_dense_csv(path) : read_idx(path, labels);
  if (d.scale_max > 0.0) ds = scale_corrupt(ds, d.scale_max, d.scale_seed);
  if (d.binarize) ds = binarize(ds, d.threshold);
  out.values = std::move(ds.values);
  return out;
}

struct DataSplit {
  Eigen::MatrixXd train;
  Eigen::MatrixXd heldout;
  std::vector<std::string> vocabulary;
};

DataSplit load_data(const DataConfig& d) {
  if (d.path.empty()) throw Error("no data: pass --data or set data.path");
  auto main = load_one(d, d.path, d.labels);
  DataSplit s;
  s.vocabulary = std::move(main.vocabulary);
  if (!d.heldout.empty()) {
    s.train = std::move(main.values);
    s.heldout = load_one(d, d.heldout, {}).values;
  } else if (d.heldout_fraction > 0.0) {
    const auto N = main.values.rows();
    const auto H = static_cast<Eigen::Index>(static_cast<double>(N) * d.heldout_fraction);
    if (H <= 0 || H >= N) throw Error("data.heldout_fraction leaves an empty split");
    s.train = main.values.topRows(N - H);
    s.heldout = main.values.bottomRows(H);
  } else {
    s.train = std::move(main.values);
  }
  return s;
}

LoadedCheckpoint open_checkpoint(const std::string& path, const SharedFlags& f, RunConfig& run) {
  auto ck = load_checkpoint(path);
  run = run_config_from_map(base_map(f, parse_config_text(ck.config_text)));
  return ck;
}

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw Error("cannot open " + path + " for writing");
  return file;
}

void finish(std::ofstream& file, const std::string& path) {
  if (!file.is_open()) {
    std::cout.flush();
    if (!std::cout) throw Error("failed writing to stdout");
    return;
  }
  file.close();
  if (!file) throw Error("failed writing " + path);
}

// --- Subcommands ---------------------------------------------------------------

int cmd_train(const SharedFlags& f, const std::string& data, const std::string& heldout,
              const std::string& metrics) {
  auto map = base_map(f);
  if (f.seed) map["train.seed"] = std::to_string(*f.seed);
  if (!data.empty()) map["data.path"] = data;
  if (!heldout.empty()) map["data.heldout"] = heldout;
  if (!f.out.empty()) map["train.checkpoint"] = f.out;
  if (!metrics.empty()) map["train.metrics"] = metrics;
  auto run = run_config_from_map(map);
  if (!run.has_train_seed) throw Error("a seed is required: pass --seed or set train.seed");
  if (run.train.checkpoint_path.empty()) throw Error("no checkpoint path: pass --out or set train.checkpoint");

  const auto split = load_data(run.data);
  run.train.config_text = to_config_text(run);
  const auto result = train(run.train, split.train, split.heldout.rows() ? &split.heldout : nullptr);

  auto report = evaluate(result.state, run.train, split.heldout.rows() ? split.heldout : split.train);
  report.fingerprint = fingerprint(run.train.config_text);
  if (f.csv) {
    report.write_csv(std::cout);
  } else {
    std::cout << "epochs=" << result.state.epoch << " steps=" << result.state.step << " "
              << report.metric << "=" << report.value << " sparsity=" << report.sparsity
              << " mean_active_bits=" << report.mean_active_bits
              << " fingerprint=" << report.fingerprint << "\n";
  }
  std::cout.flush();
  return std::cout ? 0 : 1;
}

int cmd_encode(const SharedFlags& f, const std::string& checkpoint, const std::string& data) {
  RunConfig run;
  auto ck = open_checkpoint(checkpoint, f, run);
  if (f.seed) run.data.scale_seed = *f.seed;
  if (!data.empty()) run.data.path = data;
  run.data.heldout.clear();
  run.data.heldout_fraction = 0.0;
  const auto split = load_data(run.data);
  const auto enc = encode_dataset(ck.state, run.train, split.train, run.train.eval_include_prior);
  std::ofstream file;
  write_codes_csv(output(f.out, file), enc.codes);
  finish(file, f.out);
  return 0;
}

int cmd_eval(const SharedFlags& f, const std::string& checkpoint, const std::string& data) {
  RunConfig run;
  auto ck = open_checkpoint(checkpoint, f, run);
  if (f.seed) run.data.scale_seed = *f.seed;
  if (!data.empty()) {
    run.data.path = data;
    run.data.heldout.clear();
    run.data.heldout_fraction = 0.0;
  }
  const auto split = load_data(run.data);
  auto report = evaluate(ck.state, run.train, split.heldout.rows() ? split.heldout : split.train);
  report.fingerprint = fingerprint(ck.config_text);
  std::ofstream file;
  auto& os = output(f.out, file);
  if (f.csv)
    report.write_csv(os);
  else
    report.write_text(os);
  finish(file, f.out);
  return 0;
}

int cmd_synth(const SharedFlags& f) {
  auto map = base_map(f);
  if (f.seed) map["synth.seed"] = std::to_string(*f.seed);
  const auto run = run_config_from_map(map);
  if (!run.synth.has_seed) throw Error("a seed is required: pass --seed or set synth.seed");
  if (f.out.empty()) throw Error("no output directory: pass --out");
  const auto spec = synthetic_spec_from(run);
  const auto d = generate_synthetic(spec);

  const fs::path dir(f.out);
  fs::create_directories(dir);
  if (spec.kind == LikelihoodKind::Poisson) {
    CountDataset bow;
    bow.counts = d.X.cast<int>();
    for (std::size_t w = 0; w < spec.D; ++w) bow.vocabulary.push_back("w" + std::to_string(w));
    for (Eigen::Index n = 0; n < bow.counts.rows(); ++n) bow.doc_ids.push_back(static_cast<long>(n));
    bow.provenance = d.provenance;
    write_bow((dir / "data.bow").string(), (dir / "vocab.txt").string(), bow);
  } else {
    write_dense_csv((dir / "data.csv").string(), d.X, d.provenance);
  }
  write_codes_csv((dir / "codes.csv").string(), d.codes);
  Provenance scales{d.provenance.source, {"per-datum scale"}};
  write_dense_csv((dir / "lambda.csv").string(), d.lambda, scales);
  std::ofstream conf(dir / "synth.conf");
  conf << to_config_text(run);
  conf.close();
  if (!conf) throw Error("failed writing " + (dir / "synth.conf").string());
  if (!f.csv) std::cout << "wrote " << d.X.rows() << " samples to " << dir.string() << "\n";
  return 0;
}

int cmd_topics(const SharedFlags& f, const std::string& checkpoint, const std::string& data,
               const std::string& vocab, const std::string& codes_path,
               const TopicReportOptions& options) {
  RunConfig run;
  auto ck = open_checkpoint(checkpoint, f, run);
  const auto* pois = std::get_if<PoissonLikelihoodConfig>(&ck.state.likelihood);
  if (pois == nullptr) throw Error("topics needs a Poisson checkpoint");
  if (!vocab.empty()) run.data.vocab = vocab;
  if (run.data.vocab.empty()) throw Error("no vocabulary: pass --vocab or set data.vocab");

  std::vector<Code> codes;
  std::vector<std::string> words;
  if (!codes_path.empty()) {
    codes = read_codes_csv(codes_path);
    std::ifstream in(run.data.vocab);
    if (!in) throw Error("cannot open " + run.data.vocab);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) words.push_back(line);
  } else {
    if (!data.empty()) run.data.path = data;
    run.data.format = "bow";
    run.data.heldout.clear();
    run.data.heldout_fraction = 0.0;
    const auto split = load_data(run.data);
    codes = encode_dataset(ck.state, run.train, split.train, run.train.eval_include_prior).codes;
    words = split.vocabulary;
  }
  const auto groups = topic_report(codes, pois->beta(), ck.state.net, words, options);
  std::ofstream file;
  auto& os = output(f.out, file);
  if (f.csv)
    write_topic_report_csv(os, groups);
  else
    write_topic_report_text(os, groups);
  finish(file, f.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beta-Bernoulli process sparse coding"};
  app.require_subcommand(1);

  SharedFlags flags;
  std::string data, heldout, metrics, checkpoint, vocab, codes;
  TopicReportOptions topic_opts;

  auto* train_cmd = app.add_subcommand("train", "fit a model and write a checkpoint");
  add_shared(train_cmd, flags, "training seed (required here or as train.seed)");
  train_cmd->add_option("--data", data, "training data file");
  train_cmd->add_option("--heldout", heldout, "held-out data file");
  train_cmd->add_option("--metrics", metrics, "per-step metrics CSV");

  auto* encode_cmd = app.add_subcommand("encode", "write one code row per datum");
  add_shared(encode_cmd, flags, "seed for the scale corruption transform");
  encode_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  encode_cmd->add_option("--data", data, "data file (defaults to data.path of the checkpoint)");

  auto* eval_cmd = app.add_subcommand("eval", "held-out MSE or NLL and code sparsity");
  add_shared(eval_cmd, flags, "seed for the scale corruption transform");
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--data", data, "evaluation data file");

  auto* synth_cmd = app.add_subcommand("synth", "sample data and true codes from the model");
  add_shared(synth_cmd, flags, "sampling seed (required here or as synth.seed)");

  auto* topics_cmd = app.add_subcommand("topics", "report topics per distinct code");
  add_shared(topics_cmd, flags, "unused; accepted for uniformity");
  topics_cmd->add_option("--checkpoint", checkpoint, "trained Poisson checkpoint")->required();
  topics_cmd->add_option("--data", data, "bag-of-words counts to encode");
  topics_cmd->add_option("--vocab", vocab, "vocabulary file, one token per line");
  topics_cmd->add_option("--codes", codes, "codes CSV to report instead of encoding --data");
  topics_cmd->add_option("--top-words", topic_opts.top_words, "words listed per topic");
  topics_cmd->add_option("--max-topics", topic_opts.max_topics, "topics listed per code");
  topics_cmd->add_option("--min-prob", topic_opts.min_topic_probability, "smallest topic probability listed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*train_cmd) return cmd_train(flags, data, heldout, metrics);
    if (*encode_cmd) return cmd_encode(flags, checkpoint, data);
    if (*eval_cmd) return cmd_eval(flags, checkpoint, data);
    if (*synth_cmd) return cmd_synth(flags);
    if (*topics_cmd) return cmd_topics(flags, checkpoint, data, vocab, codes, topic_opts);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 1;
}
