#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "devo/ensemble.hpp"
#include "devo/evolution.hpp"
#include "devo/features.hpp"
#include "devo/ingest.hpp"
#include "devo/lstm.hpp"
#include "devo/mlp.hpp"

namespace devo {

inline constexpr int kConfigVersion = 1;

enum class SourceKind { Synthetic, RawCsv, FeatureCsv, MindBigData };

struct SelectionSettings {
  bool enabled = true;
  std::size_t bins = 10;
  double penalty = kDefaultCardinalityPenalty;
  double init_density = 0.1;
  EvoConfig evo;
};

struct TopologySettings {
  EvoConfig evo;
  std::size_t folds = 10;  // inner CV used as fitness
  std::size_t epochs = 500;
  int init_max_neurons = kMaxNeurons;
};

/// Default synthetic task: three classes separated by dominant frequency.
std::vector<SynthClass> default_synth_classes();

/// Every knob of a pipeline run. Seeds of sub-configs are overwritten from
/// `seed` by the experiment driver.
struct ExperimentConfig {
  SourceKind source = SourceKind::Synthetic;
  std::filesystem::path source_path;
  std::string device = "MU";
  std::size_t per_class_limit = 15;

  std::vector<SynthClass> synth_classes = default_synth_classes();
  double synth_duration = 180.0;
  std::size_t synth_channels = 4;
  double synth_rate = 256.0;

  double resample_rate = 200.0;
  double window_len = 1.0;
  double window_stride = 0.5;
  FeatureConfig features = FeatureConfig::all();

  SelectionSettings selection;
  bool oner_enabled = true;
  std::size_t oner_candidates = 20;

  bool mlp_enabled = true;
  TopologySettings topology;
  TrainConfig mlp;
  std::vector<int> mlp_genome;  // fixed hidden layers; empty runs the topology search

  bool lstm_enabled = true;
  std::vector<std::size_t> lstm_sweep = kDefaultUnitSweep;
  std::size_t lstm_units = 0;  // 0 picks the best sweep entry
  LstmTrainConfig lstm;

  bool boost_enabled = true;
  BoostConfig boost;
  std::size_t boost_mlp_epochs = 0;  // 0 reuses mlp.epochs

  bool strict_cv = true;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. The file must declare
/// `version = 1`. Relative source paths resolve against DEVO_DATA_DIR when
/// set, otherwise against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Applies one key; throws ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Canonical key/value listing; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& config);

std::filesystem::path resolve_data_path(const std::filesystem::path& p, const std::filesystem::path& base_dir);

}  // namespace devo
