// Command-line front end. Links only the C interface.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "devo/devo.h"

namespace {

struct Common {
  std::string config;
  std::optional<unsigned long long> seed;
  std::string out = "devo_out";
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
  std::string input;
  std::string mask;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment config file (key = value, version = 1)");
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--set", c.overrides, "Override one config key, as key=value");
}

void add_input(CLI::App* sub, Common& c) {
  sub->add_option("--input", c.input, "Feature CSV; the configured source is extracted when omitted");
  sub->add_option("--mask", c.mask, "Column-name mask applied to the input");
}

int report_error(devo_status s) {
  std::fprintf(stderr, "devo: %s\n", devo_last_error());
  return static_cast<int>(s);
}

// Owns a C handle for the duration of one command.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() {
    if (p) Free(p);
  }
};

using ConfigHandle = Handle<devo_config, devo_config_free>;
using DatasetHandle = Handle<devo_dataset, devo_dataset_free>;
using ReportHandle = Handle<devo_report, devo_report_free>;

devo_status build_config(const Common& c, ConfigHandle& cfg) {
  devo_status s = c.config.empty() ? devo_config_new(&cfg.p) : devo_config_load(c.config.c_str(), &cfg.p);
  if (s != DEVO_OK) return s;
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    const std::string key = kv.substr(0, eq);
    const std::string value = eq == std::string::npos ? "" : kv.substr(eq + 1);
    if ((s = devo_config_set(cfg.p, key.c_str(), value.c_str())) != DEVO_OK) return s;
  }
  if (c.seed && (s = devo_config_set(cfg.p, "seed", std::to_string(*c.seed).c_str())) != DEVO_OK) return s;
  if (c.threads && (s = devo_config_set(cfg.p, "threads", std::to_string(*c.threads).c_str())) != DEVO_OK) return s;
  return devo_config_validate(cfg.p);
}

devo_status build_dataset(const Common& c, const ConfigHandle& cfg, DatasetHandle& data) {
  devo_status s = c.input.empty() ? devo_dataset_extract(cfg.p, &data.p) : devo_dataset_load(c.input.c_str(), &data.p);
  if (s != DEVO_OK || c.mask.empty()) return s;
  DatasetHandle masked;
  if ((s = devo_dataset_apply_mask(data.p, c.mask.c_str(), &masked.p)) != DEVO_OK) return s;
  std::swap(data.p, masked.p);
  return DEVO_OK;
}

void print_summary(const devo_report* report) {
  char* text = nullptr;
  if (devo_report_summary(report, &text) == DEVO_OK) {
    std::fputs(text, stdout);
    devo_string_free(text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DEvo: evolutionary feature selection and neural classifiers for windowed EEG"};
  app.require_subcommand(1);
  app.set_version_flag("--version", devo_version());

  Common c;
  std::string base = "mlp";
  std::string report_path;

  auto* synth = app.add_subcommand("synth", "Write synthetic raw recordings as CSV");
  auto* extract = app.add_subcommand("extract", "Resample, window and extract features to features.csv");
  auto* select = app.add_subcommand("select", "Evolve an attribute subset");
  auto* evolve = app.add_subcommand("evolve-mlp", "Evolve an MLP topology and cross-validate it");
  auto* lstm = app.add_subcommand("train-lstm", "Cross-validate and train an LSTM");
  auto* sweep = app.add_subcommand("sweep-lstm", "Cross-validated accuracy per LSTM unit count");
  auto* boost = app.add_subcommand("boost", "Cross-validate and train a SAMME ensemble");
  auto* bench = app.add_subcommand("bench", "Run the full experiment and write the report");
  auto* report = app.add_subcommand("report", "Summarise a report.json");

  for (auto* sub : {synth, extract, select, evolve, lstm, sweep, boost, bench}) add_common(sub, c);
  for (auto* sub : {select, evolve, lstm, sweep, boost}) add_input(sub, c);
  boost->add_option("--base", base, "Base learner")->check(CLI::IsMember({"mlp", "lstm"}));
  report->add_option("path", report_path, "report.json or the directory holding it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(DEVO_ERR_CONFIG);
  }

  if (report->parsed()) {
    std::filesystem::path p(report_path);
    if (std::filesystem::is_directory(p)) p /= "report.json";
    ReportHandle r;
    if (devo_status s = devo_report_load(p.string().c_str(), &r.p); s != DEVO_OK) return report_error(s);
    print_summary(r.p);
    return 0;
  }

  ConfigHandle cfg;
  if (devo_status s = build_config(c, cfg); s != DEVO_OK) return report_error(s);
  const char* out = c.out.c_str();

  if (synth->parsed()) {
    size_t files = 0;
    if (devo_status s = devo_synth(cfg.p, out, &files); s != DEVO_OK) return report_error(s);
    std::printf("wrote %zu recordings to %s\n", files, out);
    return 0;
  }

  if (bench->parsed()) {
    ReportHandle r;
    if (devo_status s = devo_run(cfg.p, out, &r.p); s != DEVO_OK) return report_error(s);
    print_summary(r.p);
    const double mlp = devo_report_train_seconds(r.p, "devo_mlp");
    const double rnn = devo_report_train_seconds(r.p, "lstm");
    if (mlp >= 0.0 && rnn >= 0.0)
      std::printf("final-model build time  mlp %.3f s  lstm %.3f s  (%s)\n", mlp, rnn,
                  rnn > mlp ? "lstm slower" : "mlp slower");
    return 0;
  }

  if (extract->parsed()) {
    DatasetHandle data;
    if (devo_status s = devo_dataset_extract(cfg.p, &data.p); s != DEVO_OK) return report_error(s);
    std::filesystem::create_directories(c.out);
    const auto path = (std::filesystem::path(c.out) / "features.csv").string();
    if (devo_status s = devo_dataset_save(data.p, path.c_str()); s != DEVO_OK) return report_error(s);
    std::printf("%zu rows x %zu features, %zu classes -> %s\n", devo_dataset_rows(data.p), devo_dataset_cols(data.p),
                devo_dataset_classes(data.p), path.c_str());
    return 0;
  }

  DatasetHandle data;
  if (devo_status s = build_dataset(c, cfg, data); s != DEVO_OK) return report_error(s);
  double accuracy = 0.0;
  devo_status s = DEVO_OK;
  if (select->parsed()) {
    DatasetHandle chosen;
    s = devo_select(cfg.p, data.p, out, &chosen.p);
    if (s == DEVO_OK) std::printf("selected %zu of %zu attributes\n", devo_dataset_cols(chosen.p), devo_dataset_cols(data.p));
  } else if (evolve->parsed()) {
    if ((s = devo_evolve_mlp(cfg.p, data.p, out, &accuracy)) == DEVO_OK) std::printf("devo_mlp accuracy %.4f%%\n", accuracy);
  } else if (lstm->parsed()) {
    if ((s = devo_train_lstm(cfg.p, data.p, out, &accuracy)) == DEVO_OK) std::printf("lstm accuracy %.4f%%\n", accuracy);
  } else if (sweep->parsed()) {
    if ((s = devo_sweep_lstm(cfg.p, data.p, out)) == DEVO_OK) std::printf("wrote %s/lstm_sweep.csv\n", out);
  } else if (boost->parsed()) {
    const devo_base b = base == "lstm" ? DEVO_BASE_LSTM : DEVO_BASE_MLP;
    if ((s = devo_boost(cfg.p, data.p, b, out, &accuracy)) == DEVO_OK)
      std::printf("boosted %s accuracy %.4f%%\n", base.c_str(), accuracy);
  }
  return s == DEVO_OK ? 0 : report_error(s);
}
