#include "devo/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "devo/error.hpp"
#include "text.hpp"

namespace devo {
namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  fail(ErrorKind::ConfigError, "config key '" + key + "': '" + value + "' is not " + expected);
}

double as_double(const std::string& key, const std::string& v) {
  const auto d = text::parse_double(v);
  if (!d) bad_value(key, v, "a number");
  return *d;
}

std::size_t as_count(const std::string& key, const std::string& v) {
  const auto n = text::parse_int(v);
  if (!n || *n < 0) bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(*n);
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
  const auto s = text::trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, v, "an unsigned 64-bit integer");
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) { return text::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::size_t v) { return std::to_string(v); }

std::string source_name(SourceKind s) {
  switch (s) {
    case SourceKind::Synthetic: return "synthetic";
    case SourceKind::RawCsv: return "raw";
    case SourceKind::FeatureCsv: return "features";
    case SourceKind::MindBigData: return "mindbigdata";
  }
  return "synthetic";
}

std::string join_counts(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::string synth_spec(const std::vector<SynthClass>& classes) {
  std::string out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& c = classes[i];
    out += (i ? "," : "") + c.label + ":" + fmt(c.frequency) + ":" + fmt(c.amplitude) + ":" + fmt(c.noise_std);
  }
  return out;
}

std::vector<SynthClass> parse_synth(const std::string& key, const std::string& v) {
  std::vector<SynthClass> out;
  for (auto item : text::split(v, ',')) {
    item = text::trim(item);
    const auto parts = text::split(item, ':');
    if (parts.size() != 4 || text::trim(parts[0]).empty()) bad_value(key, v, "a list of label:freq:amp:noise");
    SynthClass c;
    c.label = std::string(text::trim(parts[0]));
    c.frequency = as_double(key, std::string(parts[1]));
    c.amplitude = as_double(key, std::string(parts[2]));
    c.noise_std = as_double(key, std::string(parts[3]));
    out.push_back(std::move(c));
  }
  return out;
}

std::string groups_spec(const FeatureConfig& f) {
  std::string out;
  for (std::size_t g = 0; g < kFeatureGroupCount; ++g)
    if (f.enabled[g]) out += (out.empty() ? "" : ",") + std::string(to_string(static_cast<FeatureGroup>(g)));
  return out.empty() ? "none" : out;
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define DEVO_DOUBLE(NAME, FIELD)                                                                       \
  Key {                                                                                                \
    NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = as_double(NAME, v); },             \
        [](const ExperimentConfig& c) { return fmt(static_cast<double>(c.FIELD)); }                    \
  }
#define DEVO_COUNT(NAME, FIELD)                                                                        \
  Key {                                                                                                \
    NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = static_cast<std::remove_cvref_t<decltype(c.FIELD)>>(as_count(NAME, v)); },              \
        [](const ExperimentConfig& c) { return fmt(static_cast<std::size_t>(c.FIELD)); }               \
  }
#define DEVO_BOOL(NAME, FIELD)                                                                         \
  Key {                                                                                                \
    NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = as_bool(NAME, v); },               \
        [](const ExperimentConfig& c) { return fmt(static_cast<bool>(c.FIELD)); }                      \
  }
#define DEVO_EVO(PREFIX, FIELD)                                        \
  DEVO_COUNT(PREFIX ".population", FIELD.population),                  \
  DEVO_COUNT(PREFIX ".generations", FIELD.generations),                \
  DEVO_COUNT(PREFIX ".tournament_size", FIELD.tournament_size),        \
  DEVO_DOUBLE(PREFIX ".mutation_rate", FIELD.mutation_rate),           \
  DEVO_DOUBLE(PREFIX ".species_switch_rate", FIELD.species_switch_rate), \
  DEVO_COUNT(PREFIX ".elitism", FIELD.elitism)

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      Key{"source",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "synthetic") c.source = SourceKind::Synthetic;
            else if (v == "raw") c.source = SourceKind::RawCsv;
            else if (v == "features") c.source = SourceKind::FeatureCsv;
            else if (v == "mindbigdata") c.source = SourceKind::MindBigData;
            else bad_value("source", v, "one of synthetic, raw, features, mindbigdata");
          },
          [](const ExperimentConfig& c) { return source_name(c.source); }},
      Key{"source.path", [](ExperimentConfig& c, const std::string& v) { c.source_path = v; },
          [](const ExperimentConfig& c) { return c.source_path.string(); }},
      Key{"source.device", [](ExperimentConfig& c, const std::string& v) { c.device = v; },
          [](const ExperimentConfig& c) { return c.device; }},
      DEVO_COUNT("source.per_class_limit", per_class_limit),
      Key{"synth.classes", [](ExperimentConfig& c, const std::string& v) { c.synth_classes = parse_synth("synth.classes", v); },
          [](const ExperimentConfig& c) { return synth_spec(c.synth_classes); }},
      DEVO_DOUBLE("synth.duration", synth_duration),
      DEVO_COUNT("synth.channels", synth_channels),
      DEVO_DOUBLE("synth.rate", synth_rate),
      DEVO_DOUBLE("resample.rate", resample_rate),
      DEVO_DOUBLE("window.length", window_len),
      DEVO_DOUBLE("window.stride", window_stride),
      Key{"features.groups",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "all") {
              c.features.enabled = FeatureConfig::all().enabled;
              return;
            }
            c.features.enabled = FeatureConfig::none().enabled;
            if (v == "none") return;
            for (auto name : text::split(v, ',')) {
              const auto g = parse_feature_group(text::trim(name));
              if (!g) bad_value("features.groups", v, "a list of feature group names");
              c.features.set(*g, true);
            }
          },
          [](const ExperimentConfig& c) { return groups_spec(c.features); }},
      DEVO_COUNT("features.fft_bins", features.fft_bins_kept),
      DEVO_DOUBLE("features.epsilon", features.epsilon),
      DEVO_BOOL("selection.enabled", selection.enabled),
      DEVO_COUNT("selection.bins", selection.bins),
      DEVO_DOUBLE("selection.penalty", selection.penalty),
      DEVO_DOUBLE("selection.init_density", selection.init_density),
      DEVO_EVO("selection", selection.evo),
      DEVO_BOOL("oner.enabled", oner_enabled),
      DEVO_COUNT("oner.candidates", oner_candidates),
      DEVO_BOOL("mlp.enabled", mlp_enabled),
      DEVO_EVO("topology", topology.evo),
      DEVO_COUNT("topology.folds", topology.folds),
      DEVO_COUNT("topology.epochs", topology.epochs),
      DEVO_COUNT("topology.init_max_neurons", topology.init_max_neurons),
      Key{"mlp.genome",
          [](ExperimentConfig& c, const std::string& v) {
            c.mlp_genome.clear();
            if (v.empty() || v == "search") return;
            for (auto item : text::split(v, ','))
              c.mlp_genome.push_back(static_cast<int>(as_count("mlp.genome", std::string(item))));
          },
          [](const ExperimentConfig& c) {
            std::vector<std::size_t> xs(c.mlp_genome.begin(), c.mlp_genome.end());
            return xs.empty() ? std::string("search") : join_counts(xs);
          }},
      DEVO_COUNT("mlp.epochs", mlp.epochs),
      DEVO_DOUBLE("mlp.learning_rate", mlp.learning_rate),
      DEVO_DOUBLE("mlp.momentum", mlp.momentum),
      DEVO_DOUBLE("mlp.decay", mlp.decay),
      DEVO_BOOL("mlp.standardize", mlp.standardize),
      DEVO_BOOL("lstm.enabled", lstm_enabled),
      Key{"lstm.sweep",
          [](ExperimentConfig& c, const std::string& v) {
            c.lstm_sweep.clear();
            for (auto item : text::split(v, ',')) c.lstm_sweep.push_back(as_count("lstm.sweep", std::string(item)));
          },
          [](const ExperimentConfig& c) { return join_counts(c.lstm_sweep); }},
      DEVO_COUNT("lstm.units", lstm_units),
      DEVO_COUNT("lstm.epochs", lstm.epochs),
      DEVO_COUNT("lstm.batch_size", lstm.batch_size),
      DEVO_COUNT("lstm.sequence_len", lstm.sequence_len),
      DEVO_DOUBLE("lstm.learning_rate", lstm.learning_rate),
      DEVO_DOUBLE("lstm.beta1", lstm.beta1),
      DEVO_DOUBLE("lstm.beta2", lstm.beta2),
      DEVO_DOUBLE("lstm.epsilon", lstm.adam_epsilon),
      DEVO_DOUBLE("lstm.clip_norm", lstm.clip_norm),
      DEVO_BOOL("lstm.standardize", lstm.standardize),
      DEVO_BOOL("boost.enabled", boost_enabled),
      DEVO_COUNT("boost.estimators", boost.estimators),
      DEVO_COUNT("boost.mlp_epochs", boost_mlp_epochs),
      DEVO_BOOL("cv.strict", strict_cv),
      DEVO_COUNT("folds", folds),
      Key{"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = as_u64("seed", v); },
          [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      DEVO_COUNT("threads", threads),
  };
  return table;
}

#undef DEVO_DOUBLE
#undef DEVO_COUNT
#undef DEVO_BOOL
#undef DEVO_EVO

}  // namespace

std::vector<SynthClass> default_synth_classes() {
  return {{"low", 8.0, 20.0, 10.0}, {"mid", 16.0, 20.0, 10.0}, {"high", 28.0, 20.0, 10.0}};
}

void ExperimentConfig::validate() const {
  require(folds >= 2, ErrorKind::ConfigError, "folds must be at least 2");
  require(threads >= 1, ErrorKind::ConfigError, "threads must be at least 1");
  if (source == SourceKind::Synthetic) {
    require(synth_classes.size() >= 2, ErrorKind::ConfigError, "synthetic source needs at least two classes");
    require(synth_duration > 0.0 && synth_channels >= 1 && synth_rate > 0.0, ErrorKind::ConfigError,
            "synthetic duration, channel count and rate must be positive");
    for (const auto& c : synth_classes)
      require(c.frequency > 0.0 && c.noise_std >= 0.0, ErrorKind::ConfigError,
              "synthetic class '" + c.label + "' needs a positive frequency and non-negative noise");
  } else {
    require(!source_path.empty(), ErrorKind::ConfigError, "source.path is required for file sources");
  }
  if (source != SourceKind::FeatureCsv) {
    require(resample_rate > 0.0, ErrorKind::ConfigError, "resample.rate must be positive");
    require(window_len > 0.0 && window_stride > 0.0, ErrorKind::ConfigError, "window length and stride must be positive");
    features.validate();
  }
  require(selection.bins >= 2, ErrorKind::ConfigError, "selection.bins must be at least 2");
  require(selection.penalty >= 0.0, ErrorKind::ConfigError, "selection.penalty must be non-negative");
  require(selection.init_density > 0.0 && selection.init_density <= 1.0, ErrorKind::ConfigError,
          "selection.init_density must lie in (0,1]");
  selection.evo.validate();
  topology.evo.validate();
  require(topology.folds >= 2 && topology.epochs >= 1, ErrorKind::ConfigError,
          "topology.folds must be at least 2 and topology.epochs at least 1");
  require(topology.init_max_neurons >= 1 && topology.init_max_neurons <= kMaxNeurons, ErrorKind::ConfigError,
          "topology.init_max_neurons must lie in [1,100]");
  mlp.validate();
  if (!mlp_genome.empty())
    require(valid(TopologyGenome{mlp_genome}), ErrorKind::ConfigError, "mlp.genome must list 1..3 layers of 1..100 neurons");
  require(lstm.epochs >= 1, ErrorKind::ConfigError, "lstm.epochs must be at least 1");
  lstm.validate();
  require(!lstm_sweep.empty(), ErrorKind::ConfigError, "lstm.sweep must list at least one unit count");
  for (auto u : lstm_sweep) require(u >= 1, ErrorKind::ConfigError, "lstm.sweep entries must be positive");
  boost.validate();
}

std::filesystem::path resolve_data_path(const std::filesystem::path& p, const std::filesystem::path& base_dir) {
  if (p.empty() || p.is_absolute()) return p;
  if (const char* root = std::getenv("DEVO_DATA_DIR"); root && *root) return std::filesystem::path(root) / p;
  return base_dir.empty() ? p : base_dir / p;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& k : keys())
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text_in, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::istringstream in(text_in);
  std::string line;
  std::size_t line_no = 0;
  bool versioned = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    if (key == "version") {
      if (text::parse_int(value) != kConfigVersion)
        fail(ErrorKind::ConfigError, "unsupported config version '" + value + "'");
      versioned = true;
      continue;
    }
    try {
      apply_setting(config, key, value);
    } catch (const Error& e) {
      fail(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  require(versioned, ErrorKind::ConfigError, "config file must declare version = 1");
  config.source_path = resolve_data_path(config.source_path, base_dir);
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::ConfigError, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::string dump_config(const ExperimentConfig& config) {
  std::string out = "version = " + std::to_string(kConfigVersion) + "\n";
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace devo
