// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "devo/devo.h"

namespace {

struct Dir {
  std::filesystem::path path;
  Dir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("devo_capi_" + std::to_string(rd()));
  }
  ~Dir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

devo_config* tiny_config() {
  devo_config* cfg = nullptr;
  REQUIRE(devo_config_new(&cfg) == DEVO_OK);
  const char* settings[][2] = {{"synth.duration", "20"},       {"features.groups", "mean,std,fft"},
                               {"features.fft_bins", "8"},     {"selection.population", "4"},
                               {"selection.generations", "1"}, {"oner.candidates", "3"},
                               {"mlp.genome", "6"},            {"mlp.epochs", "10"},
                               {"lstm.sweep", "3"},            {"lstm.epochs", "2"},
                               {"lstm.sequence_len", "5"},     {"boost.estimators", "2"},
                               {"folds", "3"}};
  for (auto& kv : settings) REQUIRE(devo_config_set(cfg, kv[0], kv[1]) == DEVO_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::strlen(devo_version()) > 0);
  devo_config* cfg = nullptr;
  REQUIRE(devo_config_new(&cfg) == DEVO_OK);
  CHECK(devo_config_set(cfg, "no.such.key", "1") == DEVO_ERR_CONFIG);
  CHECK(std::string(devo_last_error()).find("no.such.key") != std::string::npos);
  CHECK(devo_config_set(cfg, "folds", "1") == DEVO_OK);
  CHECK(devo_config_validate(cfg) == DEVO_ERR_CONFIG);
  CHECK(devo_config_set(nullptr, "folds", "3") == DEVO_ERR_CONFIG);
  devo_config_free(cfg);

  devo_config* missing = nullptr;
  CHECK(devo_config_load("/nonexistent/devo.cfg", &missing) == DEVO_ERR_CONFIG);
  CHECK(missing == nullptr);
  devo_dataset* d = nullptr;
  CHECK(devo_dataset_load("/nonexistent/features.csv", &d) == DEVO_ERR_DATA);
}

TEST_CASE("config file round trip through dump") {
  Dir dir;
  std::filesystem::create_directories(dir.path);
  devo_config* cfg = tiny_config();
  char* text = nullptr;
  REQUIRE(devo_config_dump(cfg, &text) == DEVO_OK);
  {
    std::ofstream f(dir / "c.cfg");
    f << text;
  }
  devo_config* back = nullptr;
  REQUIRE(devo_config_load((dir / "c.cfg").c_str(), &back) == DEVO_OK);
  char* again = nullptr;
  REQUIRE(devo_config_dump(back, &again) == DEVO_OK);
  CHECK(std::string(text) == std::string(again));
  devo_string_free(text);
  devo_string_free(again);
  devo_config_free(back);
  devo_config_free(cfg);
}

TEST_CASE("stages run end to end through handles") {
  Dir dir;
  devo_config* cfg = tiny_config();
  size_t files = 0;
  REQUIRE(devo_synth(cfg, (dir / "raw").c_str(), &files) == DEVO_OK);
  CHECK(files == 3);

  devo_dataset* data = nullptr;
  REQUIRE(devo_dataset_extract(cfg, &data) == DEVO_OK);
  CHECK(devo_dataset_cols(data) == 4 * (1 + 1 + 8));
  CHECK(devo_dataset_classes(data) == 3);
  const size_t rows = devo_dataset_rows(data);
  CHECK(rows > 30);
  REQUIRE(devo_dataset_save(data, (dir / "f.csv").c_str()) == DEVO_OK);
  devo_dataset* loaded = nullptr;
  REQUIRE(devo_dataset_load((dir / "f.csv").c_str(), &loaded) == DEVO_OK);
  CHECK(devo_dataset_rows(loaded) == rows);

  devo_dataset* selected = nullptr;
  REQUIRE(devo_select(cfg, loaded, (dir / "sel").c_str(), &selected) == DEVO_OK);
  CHECK(devo_dataset_cols(selected) >= 1);
  CHECK(devo_dataset_cols(selected) <= devo_dataset_cols(loaded));
  devo_dataset* masked = nullptr;
  REQUIRE(devo_dataset_apply_mask(loaded, (dir / "sel/mask.txt").c_str(), &masked) == DEVO_OK);
  CHECK(devo_dataset_cols(masked) == devo_dataset_cols(selected));

  double acc = -1.0;
  REQUIRE(devo_evolve_mlp(cfg, loaded, (dir / "mlp").c_str(), &acc) == DEVO_OK);
  CHECK(acc >= 0.0);
  CHECK(acc <= 100.0);
  CHECK(std::filesystem::exists(dir.path / "mlp" / "mlp_model.json"));
  REQUIRE(devo_train_lstm(cfg, loaded, (dir / "lstm").c_str(), &acc) == DEVO_OK);
  CHECK(std::filesystem::exists(dir.path / "lstm" / "lstm_model.json"));
  REQUIRE(devo_sweep_lstm(cfg, loaded, (dir / "sweep").c_str()) == DEVO_OK);
  CHECK(std::filesystem::exists(dir.path / "sweep" / "lstm_sweep.csv"));
  REQUIRE(devo_boost(cfg, loaded, DEVO_BASE_MLP, (dir / "boost").c_str(), &acc) == DEVO_OK);
  CHECK(std::filesystem::exists(dir.path / "boost" / "ensemble.json"));

  devo_dataset_free(masked);
  devo_dataset_free(selected);
  devo_dataset_free(loaded);
  devo_dataset_free(data);
  devo_config_free(cfg);
}

TEST_CASE("run and reload a report") {
  Dir dir;
  devo_config* cfg = tiny_config();
  devo_report* report = nullptr;
  REQUIRE(devo_run(cfg, dir.path.string().c_str(), &report) == DEVO_OK);
  const double acc = devo_report_accuracy(report, "devo_mlp");
  CHECK(acc >= 0.0);
  CHECK(devo_report_accuracy(report, "nothing") < 0.0);
  CHECK(devo_report_train_seconds(report, "lstm") >= 0.0);
  CHECK(std::string(devo_report_json(report)).find("devo-report") != std::string::npos);

  devo_report* back = nullptr;
  REQUIRE(devo_report_load((dir / "report.json").c_str(), &back) == DEVO_OK);
  CHECK(devo_report_accuracy(back, "devo_mlp") == doctest::Approx(acc));
  char* summary = nullptr;
  REQUIRE(devo_report_summary(back, &summary) == DEVO_OK);
  CHECK(std::string(summary).find("devo_mlp") != std::string::npos);
  devo_string_free(summary);
  devo_report_free(back);
  devo_report_free(report);

  REQUIRE(devo_config_set(cfg, "lstm.sequence_len", "1000") == DEVO_OK);
  CHECK(devo_run(cfg, nullptr, &report) == DEVO_ERR_DATA);
  CHECK(std::string(devo_last_error()).find("lstm") != std::string::npos);
  devo_config_free(cfg);
}
