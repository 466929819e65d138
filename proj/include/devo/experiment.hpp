#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "devo/config.hpp"
#include "devo/cv.hpp"
#include "devo/dataset.hpp"
#include "devo/ensemble.hpp"
#include "devo/evolution.hpp"
#include "devo/lstm.hpp"

namespace devo {

/// Independent seeds for every stage, derived from the master seed.
struct StageSeeds {
  std::uint64_t synth, ingest, one_r, selection, topology, mlp, lstm, boost, row_folds, sequence_folds;
};
StageSeeds stage_seeds(std::uint64_t master);

/// Raw recordings of the configured synthetic task.
std::vector<RawRecording> synthesize(const ExperimentConfig& config);

struct SelectionReport {
  std::vector<std::string> feature_names;  // every candidate column
  std::vector<double> gains;               // bits, per candidate column
  AttributeMask mask;
  double fitness = 0.0;
  EvoTrace trace;

  std::vector<std::string> selected_names() const;
  std::string to_json() const;
};

/// Speciated search over attribute masks scored by subset_fitness on
/// per-column gains computed once up front.
SelectionReport evolve_selection(const FeatureDataset& data, const SelectionSettings& settings, std::uint64_t seed,
                                 unsigned threads = 1);

struct OneRRow {
  std::string feature;
  double info_gain = 0.0;
  double accuracy = 0.0;
};

/// OneR accuracy for the `candidates` highest-gain columns, best first.
std::vector<OneRRow> one_r_table(const FeatureDataset& data, std::size_t bins, std::size_t folds,
                                 std::size_t candidates, std::uint64_t seed, unsigned threads = 1);
std::string one_r_csv(std::span<const OneRRow> rows);

struct TopologySearch {
  TopologyGenome best;
  double fitness = 0.0;
  EvoTrace trace;
};

/// DEvo topology search: fitness is inner k-fold accuracy with
/// `settings.epochs` training epochs.
TopologySearch evolve_topology(const FeatureDataset& data, const TopologySettings& settings, const TrainConfig& mlp,
                               std::uint64_t seed, unsigned threads = 1);

/// SAMME ensemble of MLPs trained on weighted resamples of `rows`.
BoostedEnsemble<MlpModel> fit_boosted_mlp(const FeatureDataset& data, const TopologyGenome& genome,
                                          const TrainConfig& train_config, const BoostConfig& boost_config,
                                          std::span<const std::size_t> rows);
/// SAMME ensemble of LSTMs trained on weighted resamples of the listed sequences.
BoostedEnsemble<LstmModel> fit_boosted_lstm(const SequenceSet& set, std::size_t units, const LstmTrainConfig& train_config,
                                            const BoostConfig& boost_config, std::span<const std::size_t> sequences);

struct ModelResult {
  std::string name;
  std::string detail;  // genome, unit count, ensemble size
  Evaluation evaluation;
  std::vector<double> fold_accuracy;
  double train_seconds = 0.0;  // building the per-fold final models
};

struct LeakageRecord {
  std::string stage;
  int fold = -1;
  std::size_t rows_seen = 0;
  std::size_t test_rows_seen = 0;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ExperimentReport {
  bool strict_cv = true;
  std::uint64_t seed = 0;
  std::string config_text;
  std::string dataset;
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::vector<std::string> class_names;
  std::vector<std::size_t> class_counts;
  std::vector<std::string> warnings;

  std::optional<SelectionReport> selection;
  std::vector<OneRRow> one_r;
  std::optional<TopologySearch> topology;       // shared search (faithful mode)
  std::vector<TopologyGenome> fold_topologies;  // per outer fold (strict mode)
  std::vector<SweepRow> lstm_sweep;
  std::size_t lstm_units = 0;
  std::vector<ModelResult> models;
  std::vector<LeakageRecord> leakage;
  std::vector<StageTiming> timings;
  std::string failed_stage;

  const ModelResult* model(std::string_view name) const;
  bool leakage_free() const;
  /// Without timing fields the document is a pure function of the config.
  std::string to_json(bool include_timing = true) const;
  std::string accuracy_csv() const;
};

/// Called whenever a stage of fold `fold` reads training rows; `test_rows`
/// are that fold's held-out rows (empty for whole-dataset stages, fold -1).
using RowsReadHook = std::function<void(std::string_view stage, int fold, std::span<const std::size_t> rows,
                                        std::span<const std::size_t> test_rows)>;

struct ExperimentHooks {
  RowsReadHook rows_read;
};

/// Ingest and feature extraction for the configured source.
FeatureDataset load_dataset(const ExperimentConfig& config, std::vector<std::string>* warnings = nullptr);

/// Full pipeline. With `out_dir` set the report and its tables are written
/// there; on failure a partial report naming the failed stage is flushed
/// before the error is rethrown.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir = {},
                                const ExperimentHooks& hooks = {});

/// report.json plus flat CSV tables, each written to a temporary file and
/// renamed into place.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);
void write_atomic(const std::filesystem::path& path, const std::string& content);
/// Human-readable digest of a report.json document.
std::string report_summary(const std::string& report_json);

}  // namespace devo
