#include "devo/devo.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <nlohmann/json.hpp>
#include <sstream>

#include "devo/config.hpp"
#include "devo/ensemble.hpp"
#include "devo/error.hpp"
#include "devo/experiment.hpp"
#include "devo/lstm.hpp"
#include "devo/mlp.hpp"
#include "devo/selection.hpp"

struct devo_config {
  devo::ExperimentConfig value;
};

struct devo_dataset {
  devo::FeatureDataset value;
};

struct devo_report {
  std::string json;
};

namespace {

thread_local std::string last_error;

devo_status status_of(devo::ErrorKind kind) {
  switch (devo::category(kind)) {
    case devo::ErrorCategory::Config: return DEVO_ERR_CONFIG;
    case devo::ErrorCategory::Data: return DEVO_ERR_DATA;
    case devo::ErrorCategory::Training: return DEVO_ERR_TRAINING;
  }
  return DEVO_ERR_INTERNAL;
}

template <typename F>
devo_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return DEVO_OK;
  } catch (const devo::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
  } catch (...) {
    last_error = "internal error";
  }
  return DEVO_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  devo::require(p != nullptr, devo::ErrorKind::ConfigError, std::string(what) + " must not be null");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::filesystem::path prepare_dir(const char* out_dir) {
  need(out_dir, "output directory");
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  devo::require(!ec, devo::ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::string cv_json(const std::string& detail, const devo::Evaluation& pooled, const std::vector<double>& folds) {
  nlohmann::json doc = {{"detail", detail},
                        {"accuracy", pooled.accuracy},
                        {"fold_accuracy", folds},
                        {"total", pooled.total},
                        {"confusion", pooled.confusion}};
  return doc.dump(2);
}

devo::TopologyGenome resolve_genome(const devo::ExperimentConfig& c, const devo::FeatureDataset& data,
                                    const std::filesystem::path& dir) {
  if (!c.mlp_genome.empty()) return {c.mlp_genome};
  auto search = devo::evolve_topology(data, c.topology, c.mlp, devo::stage_seeds(c.seed).topology, c.threads);
  devo::write_atomic(dir / "topology_trace.json", search.trace.to_json());
  return search.best;
}

std::size_t resolve_units(const devo::ExperimentConfig& c) {
  return c.lstm_units ? c.lstm_units : c.lstm_sweep.front();
}

}  // namespace

extern "C" {

const char* devo_version(void) { return "1.0.0"; }

const char* devo_last_error(void) { return last_error.c_str(); }

void devo_string_free(char* text) { std::free(text); }

devo_status devo_config_new(devo_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new devo_config{};
  });
}

devo_status devo_config_load(const char* path, devo_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new devo_config{devo::load_config(path)};
  });
}

devo_status devo_config_set(devo_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    devo::apply_setting(config->value, key, value);
  });
}

devo_status devo_config_validate(const devo_config* config) {
  return guarded([&] {
    need(config, "config");
    config->value.validate();
  });
}

devo_status devo_config_dump(const devo_config* config, char** text) {
  return guarded([&] {
    need(config, "config");
    need(text, "text");
    *text = duplicate(devo::dump_config(config->value));
  });
}

void devo_config_free(devo_config* config) { delete config; }

devo_status devo_dataset_load(const char* feature_csv, devo_dataset** out) {
  return guarded([&] {
    need(feature_csv, "path");
    need(out, "out");
    *out = new devo_dataset{devo::load_feature_csv(feature_csv)};
  });
}

devo_status devo_dataset_extract(const devo_config* config, devo_dataset** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    config->value.validate();
    *out = new devo_dataset{devo::load_dataset(config->value)};
  });
}

devo_status devo_dataset_save(const devo_dataset* data, const char* path) {
  return guarded([&] {
    need(data, "dataset");
    need(path, "path");
    devo::write_feature_csv(data->value, path);
  });
}

devo_status devo_dataset_apply_mask(const devo_dataset* data, const char* mask_path, devo_dataset** out) {
  return guarded([&] {
    need(data, "dataset");
    need(mask_path, "mask path");
    need(out, "out");
    const auto mask = devo::read_mask(data->value, mask_path);
    *out = new devo_dataset{devo::project(data->value, mask)};
  });
}

size_t devo_dataset_rows(const devo_dataset* data) { return data ? data->value.rows() : 0; }
size_t devo_dataset_cols(const devo_dataset* data) { return data ? data->value.cols() : 0; }
size_t devo_dataset_classes(const devo_dataset* data) { return data ? data->value.class_count() : 0; }
void devo_dataset_free(devo_dataset* data) { delete data; }

devo_status devo_synth(const devo_config* config, const char* out_dir, size_t* files_written) {
  return guarded([&] {
    need(config, "config");
    config->value.validate();
    const auto dir = prepare_dir(out_dir);
    const auto recordings = devo::synthesize(config->value);
    for (const auto& rec : recordings) devo::write_raw_csv(rec, dir / (rec.label.value_or("unlabeled") + ".csv"));
    if (files_written) *files_written = recordings.size();
  });
}

devo_status devo_select(const devo_config* config, const devo_dataset* data, const char* out_dir,
                        devo_dataset** selected) {
  return guarded([&] {
    need(config, "config");
    need(data, "dataset");
    const auto& c = config->value;
    c.validate();
    const auto dir = prepare_dir(out_dir);
    const auto report = devo::evolve_selection(data->value, c.selection, devo::stage_seeds(c.seed).selection, c.threads);
    auto projected = devo::project(data->value, report.mask);
    devo::write_atomic(dir / "selection.json", report.to_json());
    devo::write_mask(data->value, report.mask, dir / "mask.txt");
    devo::write_feature_csv(projected, dir / "selected.csv");
    if (selected) *selected = new devo_dataset{std::move(projected)};
  });
}

devo_status devo_evolve_mlp(const devo_config* config, const devo_dataset* data, const char* out_dir,
                            double* accuracy) {
  return guarded([&] {
    need(config, "config");
    need(data, "dataset");
    const auto& c = config->value;
    c.validate();
    const auto dir = prepare_dir(out_dir);
    const auto genome = resolve_genome(c, data->value, dir);
    devo::TrainConfig tc = c.mlp;
    tc.seed = devo::stage_seeds(c.seed).mlp;
    const auto cv = devo::cross_validate(genome, data->value, c.folds, tc, c.threads);
    const auto model = devo::train(genome, data->value, tc);
    devo::write_atomic(dir / "mlp_model.json", devo::to_json(model));
    devo::write_atomic(dir / "mlp_cv.json", cv_json(devo::TopologyOps{}.describe(genome), cv.pooled, cv.fold_accuracy));
    if (accuracy) *accuracy = cv.pooled.accuracy;
  });
}

devo_status devo_train_lstm(const devo_config* config, const devo_dataset* data, const char* out_dir,
                            double* accuracy) {
  return guarded([&] {
    need(config, "config");
    need(data, "dataset");
    const auto& c = config->value;
    c.validate();
    const auto dir = prepare_dir(out_dir);
    const std::size_t units = resolve_units(c);
    devo::LstmTrainConfig lc = c.lstm;
    lc.seed = devo::stage_seeds(c.seed).lstm;
    const auto set = devo::make_sequences(data->value, lc.sequence_len);
    const auto cv = devo::lstm_cross_validate(set, units, c.folds, lc, c.threads);
    const auto model = devo::bptt_train(set, units, lc);
    devo::write_atomic(dir / "lstm_model.json", devo::to_json(model));
    devo::write_atomic(dir / "lstm_cv.json", cv_json(std::to_string(units) + " units", cv.pooled, cv.fold_accuracy));
    if (accuracy) *accuracy = cv.pooled.accuracy;
  });
}

devo_status devo_sweep_lstm(const devo_config* config, const devo_dataset* data, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(data, "dataset");
    const auto& c = config->value;
    c.validate();
    const auto dir = prepare_dir(out_dir);
    devo::LstmTrainConfig lc = c.lstm;
    lc.seed = devo::stage_seeds(c.seed).lstm;
    const auto rows = devo::unit_sweep(data->value, c.lstm_sweep, lc, c.folds, c.threads);
    devo::write_atomic(dir / "lstm_sweep.csv", devo::sweep_csv(rows));
  });
}

devo_status devo_boost(const devo_config* config, const devo_dataset* data, devo_base base, const char* out_dir,
                       double* accuracy) {
  return guarded([&] {
    need(config, "config");
    need(data, "dataset");
    const auto& c = config->value;
    c.validate();
    const auto dir = prepare_dir(out_dir);
    const auto& x = data->value;
    const auto seeds = devo::stage_seeds(c.seed);
    devo::BoostConfig bc = c.boost;
    devo::Evaluation pooled;
    std::vector<double> fold_accuracy;
    devo::EnsembleDocument doc;
    doc.class_names = x.class_names;
    doc.estimators = bc.estimators;

    if (base == DEVO_BASE_MLP) {
      const auto genome = resolve_genome(c, x, dir);
      devo::TrainConfig tc = c.mlp;
      tc.seed = seeds.mlp;
      if (c.boost_mlp_epochs > 0) tc.epochs = c.boost_mlp_epochs;
      const auto order = devo::canonical_order(x);
      std::vector<int> labels;
      for (std::size_t r : order) labels.push_back(x.labels[r]);
      const auto fold = devo::stratified_folds(labels, c.folds, seeds.row_folds);
      for (std::size_t f = 0; f < c.folds; ++f) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < order.size(); ++i)
          (fold[i] == static_cast<int>(f) ? test_rows : train_rows).push_back(order[i]);
        bc.seed = devo::derive_seed(seeds.boost, {f});
        const auto ensemble = devo::fit_boosted_mlp(x, genome, tc, bc, train_rows);
        std::vector<int> truth, pred;
        for (std::size_t r : test_rows) {
          truth.push_back(x.labels[r]);
          pred.push_back(devo::predict(ensemble, [&](const devo::MlpModel& m) { return devo::predict(m, x.row(r)); }));
        }
        const auto ev = devo::evaluate(truth, pred, x.class_count());
        devo::accumulate(pooled, ev);
        fold_accuracy.push_back(ev.accuracy);
      }
      bc.seed = seeds.boost;
      std::vector<std::size_t> all(x.rows());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto final_ensemble = devo::fit_boosted_mlp(x, genome, tc, bc, all);
      doc.member_kind = "mlp";
      for (const auto& m : final_ensemble.members) doc.members.push_back(devo::to_json(m));
      doc.alphas = final_ensemble.alphas;
    } else {
      const std::size_t units = resolve_units(c);
      devo::LstmTrainConfig lc = c.lstm;
      lc.seed = seeds.lstm;
      const auto set = devo::make_sequences(x, lc.sequence_len);
      const auto fold = devo::stratified_folds(set.labels, c.folds, seeds.sequence_folds);
      for (std::size_t f = 0; f < c.folds; ++f) {
        std::vector<std::size_t> train_seq, test_seq;
        for (std::size_t i = 0; i < set.size(); ++i) (fold[i] == static_cast<int>(f) ? test_seq : train_seq).push_back(i);
        bc.seed = devo::derive_seed(seeds.boost, {f});
        const auto ensemble = devo::fit_boosted_lstm(set, units, lc, bc, train_seq);
        std::vector<int> truth, pred;
        for (std::size_t s : test_seq) {
          truth.push_back(set.labels[s]);
          pred.push_back(
              devo::predict(ensemble, [&](const devo::LstmModel& m) { return devo::predict(m, set.sequences[s]); }));
        }
        const auto ev = devo::evaluate(truth, pred, set.class_names.size());
        devo::accumulate(pooled, ev);
        fold_accuracy.push_back(ev.accuracy);
      }
      bc.seed = seeds.boost;
      std::vector<std::size_t> all(set.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto final_ensemble = devo::fit_boosted_lstm(set, units, lc, bc, all);
      doc.member_kind = "lstm";
      for (const auto& m : final_ensemble.members) doc.members.push_back(devo::to_json(m));
      doc.alphas = final_ensemble.alphas;
    }
    devo::write_atomic(dir / "ensemble.json", devo::ensemble_to_json(doc));
    devo::write_atomic(dir / "boost_cv.json", cv_json("samme " + doc.member_kind, pooled, fold_accuracy));
    if (accuracy) *accuracy = pooled.accuracy;
  });
}

devo_status devo_run(const devo_config* config, const char* out_dir, devo_report** out) {
  return guarded([&] {
    need(config, "config");
    const std::filesystem::path dir = out_dir ? std::filesystem::path(out_dir) : std::filesystem::path();
    const auto report = devo::run_experiment(config->value, dir);
    if (out) *out = new devo_report{report.to_json(true)};
  });
}

devo_status devo_report_load(const char* path, devo_report** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path);
    devo::require(static_cast<bool>(in), devo::ErrorKind::IoError, std::string("cannot open ") + path);
    std::stringstream buf;
    buf << in.rdbuf();
    devo::report_summary(buf.str());  // validates the document
    *out = new devo_report{buf.str()};
  });
}

const char* devo_report_json(const devo_report* report) { return report ? report->json.c_str() : ""; }

devo_status devo_report_summary(const devo_report* report, char** text) {
  return guarded([&] {
    need(report, "report");
    need(text, "text");
    *text = duplicate(devo::report_summary(report->json));
  });
}

static double model_field(const devo_report* report, const char* model, bool seconds) {
  if (!report || !model) return -1.0;
  try {
    const auto doc = nlohmann::json::parse(report->json);
    for (const auto& m : doc.at("models"))
      if (m.value("name", "") == model)
        return seconds ? m.value("train_seconds", -1.0) : m.at("evaluation").value("accuracy", -1.0);
  } catch (const std::exception&) {
  }
  return -1.0;
}

double devo_report_accuracy(const devo_report* report, const char* model) { return model_field(report, model, false); }

double devo_report_train_seconds(const devo_report* report, const char* model) {
  return model_field(report, model, true);
}

void devo_report_free(devo_report* report) { delete report; }

}  // extern "C"
