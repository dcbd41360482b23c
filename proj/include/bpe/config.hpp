#pragma once

#include <map>
#include <string>
#include <vector>

#include "bpe/datasets.hpp"
#include "bpe/trainer.hpp"

namespace bpe {

/// Flat "section.key=value" pairs, ordered by key.
using ConfigMap = std::map<std::string, std::string>;

/// Parses key=value lines; '#' starts a comment, blank lines are ignored.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);

/// Parses "key=value" into the map, replacing any existing value.
void apply_override(ConfigMap& map, const std::string& assignment);

struct DataConfig {
  std::string path;
  std::string format = "auto";  // auto, idx, csv, bow
  std::string labels;
  std::string vocab;
  std::string heldout;          // separate held-out file (same format)
  double heldout_fraction = 0.0;  // else split off the tail of the training file
  bool binarize = false;
  double threshold = 0.5;
  double scale_max = 0.0;
  std::uint64_t scale_seed = 0;
};

struct SynthConfig {
  std::size_t N = 1000;
  std::size_t D = 16;
  double weight_scale = 6.0;
  double beta_logit_scale = 3.0;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

/// Fully resolved configuration for any subcommand.
struct RunConfig {
  TrainConfig train;
  DataConfig data;
  SynthConfig synth;
  bool has_train_seed = false;
};

/// Validates every key against the closed schema; unknown keys and malformed
/// values throw bpe::Error naming the key.
RunConfig run_config_from_map(const ConfigMap& map);

/// Every schema key with its resolved value; round-trips through run_config_from_map.
ConfigMap to_config_map(const RunConfig& cfg);
std::string to_config_text(const RunConfig& cfg);

/// Keys the schema accepts, sorted.
std::vector<std::string> config_keys();

SyntheticSpec synthetic_spec_from(const RunConfig& cfg);

}  // namespace bpe
