#include "devo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "devo/ensemble.hpp"
#include "devo/error.hpp"
#include "devo/features.hpp"
#include "devo/parallel.hpp"
#include "devo/rng.hpp"
#include "devo/selection.hpp"
#include "text.hpp"

namespace devo {
namespace {

using json = nlohmann::json;

// Sub-seed tags under the master seed.
constexpr std::uint64_t kSynthTag = 0x5e7;
constexpr std::uint64_t kIngestTag = 0x19e57;
constexpr std::uint64_t kOneRTag = 0x0e1;
constexpr std::uint64_t kSelectTag = 0x5e1ec7;
constexpr std::uint64_t kTopologyTag = 0x7090;
constexpr std::uint64_t kMlpTag = 0x31b;
constexpr std::uint64_t kLstmTag = 0x157;
constexpr std::uint64_t kBoostTag = 0xb005;
constexpr std::uint64_t kRowFoldTag = 0xf01d;
constexpr std::uint64_t kSeqFoldTag = 0x5f01d;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class Auditor {
 public:
  explicit Auditor(const ExperimentHooks& hooks) : hooks_(hooks) {}

  void seen(std::string_view stage, int fold, std::span<const std::size_t> rows, std::span<const std::size_t> test) {
    std::vector<std::size_t> held(test.begin(), test.end());
    std::sort(held.begin(), held.end());
    std::size_t overlap = 0;
    for (std::size_t r : rows) overlap += std::binary_search(held.begin(), held.end(), r) ? 1 : 0;
    std::lock_guard lock(mu_);
    if (fold >= 0) records_.push_back({std::string(stage), fold, rows.size(), overlap});
    if (hooks_.rows_read) hooks_.rows_read(stage, fold, rows, test);
  }

  std::vector<LeakageRecord> records() {
    std::lock_guard lock(mu_);
    auto out = records_;
    std::sort(out.begin(), out.end(), [](const LeakageRecord& a, const LeakageRecord& b) {
      return a.fold != b.fold ? a.fold < b.fold : a.stage < b.stage;
    });
    return out;
  }

 private:
  const ExperimentHooks& hooks_;
  std::mutex mu_;
  std::vector<LeakageRecord> records_;
};

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

json evaluation_json(const Evaluation& ev) {
  return {{"accuracy", ev.accuracy}, {"total", ev.total}, {"confusion", ev.confusion}};
}

std::string source_label(const ExperimentConfig& c) {
  switch (c.source) {
    case SourceKind::Synthetic: return "synthetic";
    case SourceKind::RawCsv: return "raw:" + c.source_path.filename().string();
    case SourceKind::FeatureCsv: return "features:" + c.source_path.filename().string();
    case SourceKind::MindBigData: return "mindbigdata:" + c.device;
  }
  return "unknown";
}

struct FoldSplit {
  std::vector<std::vector<std::size_t>> train, test;
};

FoldSplit split_items(std::span<const std::size_t> items, std::span<const int> labels, std::size_t folds,
                      std::uint64_t seed) {
  const auto assignment = stratified_folds(labels, folds, seed);
  FoldSplit s;
  s.train.resize(folds);
  s.test.resize(folds);
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t f = 0; f < folds; ++f)
      (assignment[i] == static_cast<int>(f) ? s.test[f] : s.train[f]).push_back(items[i]);
  return s;
}

ModelResult pool(std::string name, std::string detail, const std::vector<Evaluation>& per_fold,
                 const std::vector<double>& seconds) {
  ModelResult m;
  m.name = std::move(name);
  m.detail = std::move(detail);
  for (const auto& ev : per_fold) {
    accumulate(m.evaluation, ev);
    m.fold_accuracy.push_back(ev.accuracy);
  }
  m.train_seconds = std::accumulate(seconds.begin(), seconds.end(), 0.0);
  return m;
}

std::vector<std::size_t> rows_of(const SequenceSet& set, std::span<const std::size_t> seqs) {
  std::vector<std::size_t> rows;
  for (std::size_t s : seqs) rows.insert(rows.end(), set.source_rows[s].begin(), set.source_rows[s].end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

StageSeeds stage_seeds(std::uint64_t master) {
  return {derive_seed(master, {kSynthTag}),    derive_seed(master, {kIngestTag}),   derive_seed(master, {kOneRTag}),
          derive_seed(master, {kSelectTag}),   derive_seed(master, {kTopologyTag}), derive_seed(master, {kMlpTag}),
          derive_seed(master, {kLstmTag}),     derive_seed(master, {kBoostTag}),    derive_seed(master, {kRowFoldTag}),
          derive_seed(master, {kSeqFoldTag})};
}

std::vector<RawRecording> synthesize(const ExperimentConfig& config) {
  return synth_recording(config.synth_classes, config.synth_duration, config.synth_channels,
                         stage_seeds(config.seed).synth, config.synth_rate);
}

BoostedEnsemble<MlpModel> fit_boosted_mlp(const FeatureDataset& data, const TopologyGenome& genome,
                                          const TrainConfig& train_config, const BoostConfig& boost_config,
                                          std::span<const std::size_t> rows) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) labels.push_back(data.labels[r]);
  return boost(
      [&](std::span<const std::size_t> sample, std::uint64_t seed) {
        std::vector<std::size_t> picked;
        picked.reserve(sample.size());
        for (std::size_t i : sample) picked.push_back(rows[i]);
        TrainConfig c = train_config;
        c.seed = seed;
        return train(genome, data, c, picked);
      },
      [&](const MlpModel& m, std::size_t i) { return predict(m, data.row(rows[i])); }, labels, data.class_names,
      boost_config);
}

BoostedEnsemble<LstmModel> fit_boosted_lstm(const SequenceSet& set, std::size_t units, const LstmTrainConfig& train_config,
                                            const BoostConfig& boost_config, std::span<const std::size_t> sequences) {
  std::vector<int> labels;
  labels.reserve(sequences.size());
  for (std::size_t s : sequences) labels.push_back(set.labels[s]);
  return boost(
      [&](std::span<const std::size_t> sample, std::uint64_t seed) {
        std::vector<std::size_t> picked;
        picked.reserve(sample.size());
        for (std::size_t i : sample) picked.push_back(sequences[i]);
        LstmTrainConfig c = train_config;
        c.seed = seed;
        return bptt_train(set, units, c, picked);
      },
      [&](const LstmModel& m, std::size_t i) { return predict(m, set.sequences[sequences[i]]); }, labels,
      set.class_names, boost_config);
}

std::vector<std::string> SelectionReport::selected_names() const {
  std::vector<std::string> out;
  for (std::size_t c : mask.selected()) out.push_back(feature_names[c]);
  return out;
}

std::string SelectionReport::to_json() const {
  json doc;
  doc["selected"] = selected_names();
  doc["selected_count"] = mask.count();
  doc["candidate_count"] = feature_names.size();
  doc["fitness"] = fitness;
  json gain = json::object();
  for (std::size_t c = 0; c < feature_names.size(); ++c) gain[feature_names[c]] = gains[c];
  doc["info_gain"] = gain;
  doc["trace"] = json::parse(trace.to_json());
  return doc.dump(2);
}

SelectionReport evolve_selection(const FeatureDataset& data, const SelectionSettings& settings, std::uint64_t seed,
                                 unsigned threads) {
  require(data.cols() >= 1, ErrorKind::EmptySelection, "no candidate attributes to select from");
  SelectionReport report;
  report.feature_names = data.feature_names;
  report.gains = info_gain_all(data, settings.bins, threads);
  MaskOps ops{data.cols(), settings.init_density};
  EvoConfig evo = settings.evo;
  evo.seed = seed;
  evo.threads = threads;
  const FitnessFn<AttributeMask> fitness = [&](const AttributeMask& m, std::uint64_t) {
    return subset_fitness(report.gains, m, settings.penalty);
  };
  auto result = evolve(evo, ops, fitness);
  report.mask = result.best.genome;
  report.fitness = result.best.fitness.value_or(kUnfit);
  report.trace = std::move(result.trace);
  return report;
}

std::vector<OneRRow> one_r_table(const FeatureDataset& data, std::size_t bins, std::size_t folds,
                                 std::size_t candidates, std::uint64_t seed, unsigned threads) {
  const auto gains = info_gain_all(data, bins, threads);
  auto cols = iota_rows(data.cols());
  std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });
  cols.resize(std::min(candidates, cols.size()));
  std::vector<OneRRow> rows(cols.size());
  parallel_for(cols.size(), threads, [&](std::size_t i) {
    rows[i] = {data.feature_names[cols[i]], gains[cols[i]], one_r(data, cols[i], bins, folds, seed)};
  });
  std::stable_sort(rows.begin(), rows.end(), [](const OneRRow& a, const OneRRow& b) { return a.accuracy > b.accuracy; });
  return rows;
}

std::string one_r_csv(std::span<const OneRRow> rows) {
  std::string out = "feature,info_gain,accuracy\n";
  for (const auto& r : rows)
    out += r.feature + "," + text::format_double(r.info_gain) + "," + text::format_double(r.accuracy) + "\n";
  return out;
}

TopologySearch evolve_topology(const FeatureDataset& data, const TopologySettings& settings, const TrainConfig& mlp,
                               std::uint64_t seed, unsigned threads) {
  TopologyOps ops{settings.init_max_neurons};
  EvoConfig evo = settings.evo;
  evo.seed = seed;
  evo.threads = threads;
  TrainConfig inner = mlp;
  inner.epochs = settings.epochs;
  inner.seed = seed;  // one fold split and init stream for every genome
  const FitnessFn<TopologyGenome> fitness = [&](const TopologyGenome& g, std::uint64_t) {
    return cv_accuracy(g, data, settings.folds, inner, 1);
  };
  auto result = evolve(evo, ops, fitness);
  return {result.best.genome, result.best.fitness.value_or(kUnfit), std::move(result.trace)};
}

const ModelResult* ExperimentReport::model(std::string_view name) const {
  for (const auto& m : models)
    if (m.name == name) return &m;
  return nullptr;
}

bool ExperimentReport::leakage_free() const {
  return std::all_of(leakage.begin(), leakage.end(), [](const LeakageRecord& r) { return r.test_rows_seen == 0; });
}

std::string ExperimentReport::to_json(bool include_timing) const {
  json doc;
  doc["format"] = "devo-report";
  doc["version"] = 1;
  doc["mode"] = strict_cv ? "strict" : "faithful";
  doc["seed"] = seed;
  doc["config"] = config_text;
  doc["dataset"] = {{"name", dataset},       {"rows", rows},
                    {"columns", columns},    {"class_names", class_names},
                    {"class_counts", class_counts}};
  doc["warnings"] = warnings;
  if (!failed_stage.empty()) doc["failed_stage"] = failed_stage;
  if (selection) doc["selection"] = json::parse(selection->to_json());
  if (!one_r.empty()) {
    json rows_json = json::array();
    for (const auto& r : one_r) rows_json.push_back({{"feature", r.feature}, {"info_gain", r.info_gain}, {"accuracy", r.accuracy}});
    doc["one_r"] = rows_json;
  }
  const TopologyOps ops;
  if (topology)
    doc["topology"] = {{"best", ops.describe(topology->best)},
                       {"fitness", topology->fitness},
                       {"trace", json::parse(topology->trace.to_json())}};
  if (!fold_topologies.empty()) {
    json per_fold = json::array();
    for (const auto& g : fold_topologies) per_fold.push_back(ops.describe(g));
    doc["fold_topologies"] = per_fold;
  }
  if (!lstm_sweep.empty()) {
    json sweep = json::array();
    for (const auto& r : lstm_sweep) {
      json row = {{"units", r.units}, {"accuracy", r.accuracy}};
      if (include_timing) row["seconds"] = r.seconds;
      sweep.push_back(row);
    }
    doc["lstm_sweep"] = sweep;
    doc["lstm_units"] = lstm_units;
  }
  json model_docs = json::array();
  for (const auto& m : models) {
    json entry = {{"name", m.name},
                  {"detail", m.detail},
                  {"fold_accuracy", m.fold_accuracy},
                  {"evaluation", evaluation_json(m.evaluation)}};
    if (include_timing) entry["train_seconds"] = m.train_seconds;
    model_docs.push_back(entry);
  }
  doc["models"] = model_docs;
  json leaks = json::array();
  for (const auto& l : leakage)
    leaks.push_back({{"stage", l.stage}, {"fold", l.fold}, {"rows_seen", l.rows_seen}, {"test_rows_seen", l.test_rows_seen}});
  doc["leakage_audit"] = {{"leakage_free", leakage_free()}, {"records", leaks}};
  if (include_timing) {
    json t = json::array();
    for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    doc["timings"] = t;
  }
  return doc.dump(2);
}

std::string ExperimentReport::accuracy_csv() const {
  std::string header = "dataset", row = dataset;
  for (const auto& m : models) {
    header += "," + m.name;
    row += "," + text::format_double(m.evaluation.accuracy);
  }
  return header + "\n" + row + "\n";
}

FeatureDataset load_dataset(const ExperimentConfig& config, std::vector<std::string>* warnings) {
  if (config.source == SourceKind::FeatureCsv) return load_feature_csv(config.source_path);

  std::vector<RawRecording> recordings;
  switch (config.source) {
    case SourceKind::Synthetic:
      recordings = synthesize(config);
      break;
    case SourceKind::RawCsv:
      if (std::filesystem::is_directory(config.source_path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(config.source_path))
          if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        require(!files.empty(), ErrorKind::IoError, "no .csv files in " + config.source_path.string());
        for (const auto& f : files) {
          auto part = load_raw_csv(f);
          recordings.insert(recordings.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
      } else {
        recordings = load_raw_csv(config.source_path);
      }
      break;
    case SourceKind::MindBigData: {
      auto loaded = load_mindbigdata(config.source_path, config.device, config.per_class_limit,
                                     derive_seed(config.seed, {kIngestTag}));
      if (warnings) warnings->insert(warnings->end(), loaded.skipped.begin(), loaded.skipped.end());
      recordings = std::move(loaded.recordings);
      break;
    }
    case SourceKind::FeatureCsv:
      break;
  }
  require(!recordings.empty(), ErrorKind::DatasetError, "the configured source produced no recordings");

  FeatureConfig features = config.features;
  features.threads = config.threads;
  std::vector<FeatureDataset> parts;
  parts.reserve(recordings.size());
  for (const auto& rec : recordings) {
    auto sig = std::make_shared<const UniformSignal>(resample(rec, config.resample_rate));
    parts.push_back(extract(make_windows(sig, config.window_len, config.window_stride), features));
  }
  return concat(parts);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                const ExperimentHooks& hooks) {
  config.validate();
  ExperimentReport report;
  report.strict_cv = config.strict_cv;
  report.seed = config.seed;
  report.config_text = dump_config(config);
  report.dataset = source_label(config);
  Auditor auditor(hooks);
  std::string stage = "ingest";
  const std::size_t folds = config.folds;
  const unsigned threads = config.threads;

  try {
    Stopwatch ingest_clock;
    const FeatureDataset data = load_dataset(config, &report.warnings);
    data.validate();
    require(data.class_count() >= 2, ErrorKind::DatasetError, "dataset needs at least two classes");
    report.rows = data.rows();
    report.columns = data.cols();
    report.class_names = data.class_names;
    report.class_counts.assign(data.class_count(), 0);
    for (int l : data.labels) ++report.class_counts[static_cast<std::size_t>(l)];
    report.timings.push_back({"ingest", ingest_clock.seconds()});
    const auto all_rows = iota_rows(data.rows());

    if (config.oner_enabled) {
      stage = "oner";
      Stopwatch clock;
      report.one_r = one_r_table(data, config.selection.bins, folds, config.oner_candidates,
                                 derive_seed(config.seed, {kOneRTag}), threads);
      report.timings.push_back({"oner", clock.seconds()});
    }

    // Whole-dataset selection: the reported artifact, and in faithful mode
    // the mask every fold uses.
    if (config.selection.enabled) {
      stage = "selection";
      Stopwatch clock;
      auditor.seen("selection", -1, all_rows, {});
      report.selection = evolve_selection(data, config.selection, derive_seed(config.seed, {kSelectTag}), threads);
      report.timings.push_back({"selection", clock.seconds()});
    }

    auto fold_mask = [&](std::string_view prefix, std::size_t f, std::span<const std::size_t> train_rows,
                         std::span<const std::size_t> test_rows) -> std::optional<AttributeMask> {
      if (!config.selection.enabled) return std::nullopt;
      const std::string name = std::string(prefix) + "selection";
      if (!config.strict_cv) {
        auditor.seen(name, static_cast<int>(f), all_rows, test_rows);
        return report.selection->mask;
      }
      auditor.seen(name, static_cast<int>(f), train_rows, test_rows);
      const auto sub = data.subset(train_rows);
      return evolve_selection(sub, config.selection, derive_seed(config.seed, {kSelectTag, f + 1}), 1).mask;
    };
    auto view = [&](const std::optional<AttributeMask>& mask) { return mask ? project(data, *mask) : data; };

    if (config.mlp_enabled) {
      stage = "mlp";
      Stopwatch clock;
      const auto order = canonical_order(data);
      std::vector<int> labels(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) labels[i] = data.labels[order[i]];
      const auto split = split_items(order, labels, folds, derive_seed(config.seed, {kRowFoldTag}));

      const bool fixed_genome = !config.mlp_genome.empty();
      if (fixed_genome) {
        report.topology = TopologySearch{TopologyGenome{config.mlp_genome}, 0.0, {}};
      } else if (!config.strict_cv) {
        stage = "topology";
        const auto x = view(config.selection.enabled ? std::optional(report.selection->mask) : std::nullopt);
        auditor.seen("topology", -1, all_rows, {});
        report.topology = evolve_topology(x, config.topology, config.mlp, derive_seed(config.seed, {kTopologyTag}), threads);
        report.timings.push_back({"topology", clock.seconds()});
        stage = "mlp";
      }

      std::vector<Evaluation> plain(folds), boosted(folds);
      std::vector<double> plain_secs(folds, 0.0), boost_secs(folds, 0.0);
      std::vector<TopologyGenome> genomes(folds);
      std::vector<std::size_t> members(folds, 0);
      parallel_for(folds, threads, [&](std::size_t f) {
        const auto& train_rows = split.train[f];
        const auto& test_rows = split.test[f];
        const auto x = view(fold_mask("", f, train_rows, test_rows));
        if (fixed_genome) {
          genomes[f] = report.topology->best;
        } else if (config.strict_cv) {
          auditor.seen("topology", static_cast<int>(f), train_rows, test_rows);
          genomes[f] = evolve_topology(x.subset(train_rows), config.topology, config.mlp,
                                       derive_seed(config.seed, {kTopologyTag, f + 1}), 1)
                           .best;
        } else {
          auditor.seen("topology", static_cast<int>(f), all_rows, test_rows);
          genomes[f] = report.topology->best;
        }

        auditor.seen("mlp.train", static_cast<int>(f), train_rows, test_rows);
        TrainConfig tc = config.mlp;
        tc.seed = derive_seed(config.seed, {kMlpTag, f});
        Stopwatch train_clock;
        const auto model = train(genomes[f], x, tc, train_rows);
        plain_secs[f] = train_clock.seconds();
        std::vector<int> truth, pred;
        for (std::size_t r : test_rows) {
          truth.push_back(x.labels[r]);
          pred.push_back(predict(model, x.row(r)));
        }
        plain[f] = evaluate(truth, pred, x.class_count());

        if (!config.boost_enabled) return;
        auditor.seen("mlp.boost", static_cast<int>(f), train_rows, test_rows);
        TrainConfig bc = tc;
        if (config.boost_mlp_epochs > 0) bc.epochs = config.boost_mlp_epochs;
        BoostConfig boost_config = config.boost;
        boost_config.seed = derive_seed(config.seed, {kBoostTag, f});
        Stopwatch boost_clock;
        const auto ensemble = fit_boosted_mlp(x, genomes[f], bc, boost_config, train_rows);
        boost_secs[f] = boost_clock.seconds();
        members[f] = ensemble.members.size();
        pred.clear();
        for (std::size_t r : test_rows) pred.push_back(predict(ensemble, [&](const MlpModel& m) { return predict(m, x.row(r)); }));
        boosted[f] = evaluate(truth, pred, x.class_count());
      });

      const TopologyOps ops;
      if (config.strict_cv && !fixed_genome) report.fold_topologies = genomes;
      const std::string detail =
          config.strict_cv && !fixed_genome ? "per-fold topology" : ops.describe(report.topology->best);
      report.models.push_back(pool("devo_mlp", detail, plain, plain_secs));
      if (config.boost_enabled) {
        const auto total = std::accumulate(members.begin(), members.end(), std::size_t{0});
        report.models.push_back(pool("boosted_devo_mlp", std::to_string(total) + " members over " + std::to_string(folds) + " folds",
                                     boosted, boost_secs));
      }
      report.timings.push_back({"mlp", clock.seconds()});
    }

    if (config.lstm_enabled) {
      stage = "lstm";
      Stopwatch clock;
      const auto layout = make_sequences(data, config.lstm.sequence_len);
      const auto split = split_items(iota_rows(layout.size()), layout.labels, folds, derive_seed(config.seed, {kSeqFoldTag}));
      std::vector<std::vector<std::size_t>> train_rows(folds), test_rows(folds);
      std::vector<SequenceSet> sets(folds);
      parallel_for(folds, threads, [&](std::size_t f) {
        train_rows[f] = rows_of(layout, split.train[f]);
        test_rows[f] = rows_of(layout, split.test[f]);
        sets[f] = make_sequences(view(fold_mask("lstm.", f, train_rows[f], test_rows[f])), config.lstm.sequence_len);
      });

      auto run_units = [&](std::size_t units, bool boosted, std::vector<Evaluation>& evals, std::vector<double>& secs) {
        evals.assign(folds, {});
        secs.assign(folds, 0.0);
        parallel_for(folds, threads, [&](std::size_t f) {
          const auto& set = sets[f];
          const auto& train_seq = split.train[f];
          auditor.seen(boosted ? "lstm.boost" : "lstm.train", static_cast<int>(f), train_rows[f], test_rows[f]);
          LstmTrainConfig lc = config.lstm;
          lc.seed = derive_seed(config.seed, {kLstmTag, units, f});
          std::vector<int> truth, pred;
          for (std::size_t s : split.test[f]) truth.push_back(set.labels[s]);
          Stopwatch train_clock;
          if (!boosted) {
            const auto model = bptt_train(set, units, lc, train_seq);
            secs[f] = train_clock.seconds();
            for (std::size_t s : split.test[f]) pred.push_back(predict(model, set.sequences[s]));
          } else {
            BoostConfig boost_config = config.boost;
            boost_config.seed = derive_seed(config.seed, {kBoostTag, kLstmTag, f});
            const auto ensemble = fit_boosted_lstm(set, units, lc, boost_config, train_seq);
            secs[f] = train_clock.seconds();
            for (std::size_t s : split.test[f])
              pred.push_back(predict(ensemble, [&](const LstmModel& m) { return predict(m, set.sequences[s]); }));
          }
          evals[f] = evaluate(truth, pred, set.class_names.size());
        });
      };

      std::vector<Evaluation> evals;
      std::vector<double> secs;
      std::optional<ModelResult> chosen;
      for (std::size_t units : config.lstm_sweep) {
        run_units(units, false, evals, secs);
        auto result = pool("lstm", std::to_string(units) + " units", evals, secs);
        report.lstm_sweep.push_back({units, result.evaluation.accuracy, result.train_seconds});
        const bool wanted = config.lstm_units ? units == config.lstm_units
                                              : (!chosen || result.evaluation.accuracy > chosen->evaluation.accuracy);
        if (wanted) {
          chosen = std::move(result);
          report.lstm_units = units;
        }
      }
      if (!chosen) {
        run_units(config.lstm_units, false, evals, secs);
        chosen = pool("lstm", std::to_string(config.lstm_units) + " units", evals, secs);
        report.lstm_units = config.lstm_units;
      }
      report.models.push_back(*chosen);
      report.timings.push_back({"lstm", clock.seconds()});

      if (config.boost_enabled) {
        stage = "lstm.boost";
        Stopwatch boost_clock;
        run_units(report.lstm_units, true, evals, secs);
        report.models.push_back(pool("boosted_lstm", std::to_string(report.lstm_units) + " units", evals, secs));
        report.timings.push_back({"lstm.boost", boost_clock.seconds()});
      }
    }
  } catch (const Error& e) {
    report.failed_stage = stage;
    report.leakage = auditor.records();
    if (!out_dir.empty()) {
      try {
        write_report(report, out_dir);
      } catch (const Error&) {
        // the original failure is the one worth reporting
      }
    }
    throw Error(e.kind(), stage + ": " + e.detail());
  }

  report.leakage = auditor.records();
  if (!out_dir.empty()) write_report(report, out_dir);
  return report;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(static_cast<bool>(out), ErrorKind::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::IoError, "cannot move " + tmp.string() + " into place: " + ec.message());
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_atomic(dir / "config.txt", report.config_text);
  if (!report.one_r.empty()) write_atomic(dir / "oner.csv", one_r_csv(report.one_r));
  if (!report.lstm_sweep.empty()) write_atomic(dir / "lstm_sweep.csv", sweep_csv(report.lstm_sweep));
  if (!report.models.empty()) write_atomic(dir / "accuracy.csv", report.accuracy_csv());
  if (report.selection) write_atomic(dir / "selection.json", report.selection->to_json());
  write_atomic(dir / "report.json", report.to_json(true));
}

std::string report_summary(const std::string& report_json) {
  json doc;
  try {
    doc = json::parse(report_json);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("report JSON: ") + e.what());
  }
  require(doc.value("format", "") == "devo-report", ErrorKind::SchemaError, "not a DEvo report");
  std::ostringstream out;
  const auto& ds = doc.at("dataset");
  out << "dataset  " << ds.value("name", "") << "  rows " << ds.value("rows", 0) << "  columns "
      << ds.value("columns", 0) << "  mode " << doc.value("mode", "") << "\n";
  if (doc.contains("failed_stage")) out << "FAILED at stage " << doc["failed_stage"].get<std::string>() << "\n";
  if (doc.contains("selection"))
    out << "selected " << doc["selection"].value("selected_count", 0) << " of "
        << doc["selection"].value("candidate_count", 0) << " attributes\n";
  if (doc.contains("one_r") && !doc["one_r"].empty())
    out << "best OneR  " << doc["one_r"][0].value("feature", "") << "  " << doc["one_r"][0].value("accuracy", 0.0)
        << "%\n";
  if (doc.contains("lstm_sweep"))
    for (const auto& r : doc["lstm_sweep"])
      out << "lstm sweep  " << r.value("units", 0) << " units  " << r.value("accuracy", 0.0) << "%\n";
  for (const auto& m : doc.at("models")) {
    out << m.value("name", "") << "  " << m.at("evaluation").value("accuracy", 0.0) << "%  (" << m.value("detail", "")
        << ")";
    if (m.contains("train_seconds")) out << "  train " << m["train_seconds"].get<double>() << " s";
    out << "\n";
  }
  out << "leakage free  " << (doc.at("leakage_audit").value("leakage_free", false) ? "yes" : "no") << "\n";
  if (doc.contains("timings"))
    for (const auto& t : doc["timings"])
      out << "stage " << t.value("stage", "") << "  " << t.value("seconds", 0.0) << " s\n";
  return out.str();
}

}  // namespace devo
