#include "devo/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "devo/error.hpp"
#include "devo/fft.hpp"
#include "devo/rng.hpp"
#include "text.hpp"

namespace devo {
namespace {

double mean_period(const RawChannel& ch) {
  return (ch.times.back() - ch.times.front()) / static_cast<double>(ch.times.size() - 1);
}

// Cubic Lagrange interpolation over the recording treated as periodic with
// period `period`, matching the periodicity the spectral step assumes.
class PeriodicCubic {
 public:
  PeriodicCubic(const RawChannel& ch, double period) : ch_(ch), period_(period) {}

  double operator()(double t) const {
    const auto& ts = ch_.times;
    const long n = static_cast<long>(ts.size());
    // index of the last node at or before t, possibly -1
    const long i = static_cast<long>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
    double x[4], y[4];
    for (int k = 0; k < 4; ++k) {
      const long j = i - 1 + k;
      const long wraps = j >= 0 ? j / n : -((-j + n - 1) / n);
      const long idx = j - wraps * n;
      x[k] = ts[static_cast<std::size_t>(idx)] + static_cast<double>(wraps) * period_;
      y[k] = ch_.values[static_cast<std::size_t>(idx)];
    }
    double out = 0.0;
    for (int a = 0; a < 4; ++a) {
      double w = 1.0;
      for (int b = 0; b < 4; ++b)
        if (b != a) w *= (t - x[b]) / (x[a] - x[b]);
      out += w * y[a];
    }
    return out;
  }

 private:
  const RawChannel& ch_;
  double period_;
};

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace

void validate(const RawRecording& rec) {
  require(!rec.channels.empty(), ErrorKind::InvalidRecording, "recording has no channels");
  require(rec.channel_names.size() == rec.channels.size(), ErrorKind::InvalidRecording,
          "channel label count does not match channel count");
  double max_period = 0.0;
  for (std::size_t c = 0; c < rec.channels.size(); ++c) {
    const auto& ch = rec.channels[c];
    require(ch.times.size() == ch.values.size(), ErrorKind::InvalidRecording,
            "channel " + rec.channel_names[c] + " has mismatched time/value counts");
    require(ch.times.size() >= 2, ErrorKind::InvalidRecording,
            "channel " + rec.channel_names[c] + " has fewer than 2 samples");
    for (std::size_t i = 0; i < ch.times.size(); ++i) {
      require(std::isfinite(ch.times[i]) && std::isfinite(ch.values[i]), ErrorKind::InvalidRecording,
              "channel " + rec.channel_names[c] + " has a non-finite sample");
      if (i > 0)
        require(ch.times[i] > ch.times[i - 1], ErrorKind::InvalidRecording,
                "channel " + rec.channel_names[c] + " timestamps are not strictly increasing at sample " +
                    std::to_string(i));
    }
    max_period = std::max(max_period, mean_period(ch));
  }
  const auto& ref = rec.channels.front();
  const double slack = max_period * (1.0 + 1e-9);
  for (std::size_t c = 1; c < rec.channels.size(); ++c) {
    const auto& ch = rec.channels[c];
    require(std::abs(ch.times.front() - ref.times.front()) <= slack &&
                std::abs(ch.times.back() - ref.times.back()) <= slack,
            ErrorKind::InvalidRecording, "channel " + rec.channel_names[c] + " covers a different time interval");
  }
}

UniformSignal resample(const RawRecording& rec, double rate) {
  require(rate > 0.0 && std::isfinite(rate), ErrorKind::ConfigError, "resample rate must be positive");
  validate(rec);

  double t_start = rec.channels.front().times.front();
  double t_end = rec.channels.front().times.back() + mean_period(rec.channels.front());
  double max_source_rate = 0.0;
  for (const auto& ch : rec.channels) {
    t_start = std::min(t_start, ch.times.front());
    t_end = std::max(t_end, ch.times.back() + mean_period(ch));
    max_source_rate = std::max(max_source_rate, 1.0 / mean_period(ch));
  }
  const double duration = t_end - t_start;
  const auto n_out = static_cast<std::size_t>(std::floor(duration * rate + 1e-9));
  require(n_out >= 1, ErrorKind::InvalidRecording, "recording is shorter than one output sample");

  // dense grid at least twice the source rate so interpolation does not alias
  const std::size_t factor = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(2.0 * max_source_rate / rate)));
  const std::size_t n_dense = n_out * factor;
  const double dt = duration / static_cast<double>(n_dense);

  UniformSignal out;
  out.channel_names = rec.channel_names;
  out.rate = rate;
  out.label = rec.label;
  out.values.reserve(rec.channels.size());

  std::vector<fft::Complex> dense(n_dense);
  std::vector<fft::Complex> band(n_out);
  for (const auto& ch : rec.channels) {
    const PeriodicCubic interp(ch, duration);
    for (std::size_t k = 0; k < n_dense; ++k) dense[k] = interp(t_start + static_cast<double>(k) * dt);
    const auto spectrum = fft::transform(dense);

    std::fill(band.begin(), band.end(), fft::Complex{});
    const std::size_t half = n_out / 2;
    // positive frequencies below the output Nyquist, then negative ones
    for (std::size_t k = 0; k < (n_out + 1) / 2; ++k) band[k] = spectrum[k];
    for (std::size_t k = 1; k < (n_out + 1) / 2; ++k) band[n_out - k] = spectrum[n_dense - k];
    if (n_out % 2 == 0 && n_out > 0) band[half] = spectrum[half] + spectrum[n_dense - half];

    const auto time = fft::transform(band, true);
    std::vector<double> values(n_out);
    const double scale = 1.0 / static_cast<double>(n_dense);
    for (std::size_t k = 0; k < n_out; ++k) values[k] = time[k].real() * scale;
    out.values.push_back(std::move(values));
  }
  return out;
}

WindowedSignal make_windows(std::shared_ptr<const UniformSignal> sig, double window_len, double stride) {
  require(sig != nullptr, ErrorKind::ConfigError, "make_windows needs a signal");
  require(window_len > 0.0, ErrorKind::ConfigError, "window length must be positive");
  require(stride > 0.0 && stride <= window_len, ErrorKind::ConfigError, "stride must be in (0, window length]");
  WindowedSignal w;
  w.window_len = window_len;
  w.stride = stride;
  w.window_samples = static_cast<std::size_t>(std::lround(window_len * sig->rate));
  w.stride_samples = static_cast<std::size_t>(std::lround(stride * sig->rate));
  require(w.window_samples >= 1 && w.stride_samples >= 1, ErrorKind::ConfigError,
          "window or stride is shorter than one sample");
  const std::size_t n = sig->length();
  require(n >= w.window_samples, ErrorKind::SignalTooShort,
          "signal of " + std::to_string(n) + " samples is shorter than one window of " +
              std::to_string(w.window_samples));
  const std::size_t count = (n - w.window_samples) / w.stride_samples + 1;
  w.windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) w.windows.push_back({i * w.stride_samples});
  w.source = std::move(sig);
  return w;
}

std::vector<std::string> mindbigdata_channels(const std::string& device) {
  if (device == "MU") return {"TP9", "FP1", "FP2", "TP10"};
  if (device == "MW") return {"FP1"};
  if (device == "EP") return {"AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4"};
  if (device == "IN") return {"AF3", "AF4", "T7", "T8", "PZ"};
  fail(ErrorKind::ConfigError, "unknown MindBigData device code " + device);
}

MindBigDataLoad load_mindbigdata(const std::filesystem::path& path, const std::string& device_filter,
                                 std::size_t per_class_limit, std::uint64_t seed) {
  const auto wanted = mindbigdata_channels(device_filter);
  auto in = open_input(path);

  struct Event {
    int code = -1;
    std::map<std::string, std::vector<double>> channels;
  };
  std::map<long long, Event> events;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, '\t');
    const auto where = " at line " + std::to_string(line_no);
    require(fields.size() == 7, ErrorKind::ParseError, "expected 7 tab-separated fields" + where);
    const auto event = text::parse_int(fields[1]);
    const auto code = text::parse_int(fields[4]);
    const auto size = text::parse_int(fields[5]);
    require(text::parse_int(fields[0]) && event && code && size && *size >= 0, ErrorKind::ParseError,
            "malformed id/event/code/size" + where);
    std::vector<double> data;
    for (auto cell : text::split(fields[6], ',')) {
      const auto v = text::parse_double(cell);
      require(v.has_value(), ErrorKind::ParseError, "non-numeric amplitude" + where);
      data.push_back(*v);
    }
    require(static_cast<long long>(data.size()) == *size, ErrorKind::ParseError,
            "size field disagrees with data length" + where);
    if (text::trim(fields[2]) != device_filter) continue;
    auto& ev = events[*event];
    ev.code = static_cast<int>(*code);
    ev.channels[std::string(text::trim(fields[3]))] = std::move(data);
  }

  MindBigDataLoad load;
  std::map<int, std::vector<long long>> by_class;
  for (const auto& [id, ev] : events) {
    if (ev.code < 0 || ev.code > 9) continue;  // -1 marks random-thought events
    bool complete = true;
    for (const auto& name : wanted) {
      const auto it = ev.channels.find(name);
      if (it == ev.channels.end() || it->second.size() < 2) {
        load.skipped.push_back("event " + std::to_string(id) + " missing channel " + name);
        complete = false;
        break;
      }
    }
    if (complete) by_class[ev.code].push_back(id);
  }

  for (auto& [code, ids] : by_class) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(code)}));
    std::shuffle(ids.begin(), ids.end(), rng.engine());
    ids.resize(std::min(ids.size(), per_class_limit));
    std::sort(ids.begin(), ids.end());
    for (long long id : ids) {
      const auto& ev = events.at(id);
      RawRecording rec;
      rec.label = std::to_string(code);
      rec.channel_names = wanted;
      for (const auto& name : wanted) {
        const auto& data = ev.channels.at(name);
        RawChannel ch;
        ch.values = data;
        ch.times.resize(data.size());
        const double period = kMindBigDataEventSeconds / static_cast<double>(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) ch.times[i] = static_cast<double>(i) * period;
        rec.channels.push_back(std::move(ch));
      }
      load.recordings.push_back(std::move(rec));
    }
  }
  return load;
}

std::vector<RawRecording> load_raw_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::SchemaError, "empty raw CSV " + path.string());
  const auto header = text::split(text::trim(line), ',');
  require(header.size() >= 3 && text::trim(header.front()) == "timestamp" && text::trim(header.back()) == "label",
          ErrorKind::SchemaError, "raw CSV header must be timestamp,<channels...>,label");
  std::vector<std::string> names;
  for (std::size_t i = 1; i + 1 < header.size(); ++i) names.emplace_back(text::trim(header[i]));

  std::vector<RawRecording> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    require(cells.size() == header.size(), ErrorKind::ParseError,
            "line " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells");
    std::string label(text::trim(cells.back()));
    if (out.empty() || out.back().label != label) {
      RawRecording rec;
      rec.channel_names = names;
      rec.channels.resize(names.size());
      rec.label = label;
      out.push_back(std::move(rec));
    }
    const auto t = text::parse_double(cells[0]);
    require(t.has_value(), ErrorKind::ParseError, "line " + std::to_string(row) + " column 1 is not numeric");
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto v = text::parse_double(cells[c + 1]);
      require(v.has_value(), ErrorKind::ParseError,
              "line " + std::to_string(row) + " column " + std::to_string(c + 2) + " is not numeric");
      out.back().channels[c].times.push_back(*t);
      out.back().channels[c].values.push_back(*v);
    }
  }
  for (const auto& rec : out) validate(rec);
  return out;
}

void write_raw_csv(const RawRecording& rec, const std::filesystem::path& path) {
  validate(rec);
  const auto& ref = rec.channels.front().times;
  for (const auto& ch : rec.channels)
    require(ch.times == ref, ErrorKind::InvalidRecording, "raw CSV output needs channels with shared timestamps");
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path.string());
  out << "timestamp";
  for (const auto& name : rec.channel_names) out << ',' << name;
  out << ",label\n";
  const std::string label = rec.label.value_or("");
  for (std::size_t i = 0; i < ref.size(); ++i) {
    out << text::format_double(ref[i]);
    for (const auto& ch : rec.channels) out << ',' << text::format_double(ch.values[i]);
    out << ',' << label << '\n';
  }
}

std::vector<std::string> default_channel_names(std::size_t count) {
  static const std::vector<std::string> muse = {"TP9", "AF7", "AF8", "TP10"};
  std::vector<std::string> names;
  for (std::size_t c = 0; c < count; ++c) names.push_back(c < muse.size() ? muse[c] : "CH" + std::to_string(c + 1));
  return names;
}

std::vector<RawRecording> synth_recording(std::span<const SynthClass> classes, double duration, std::size_t channels,
                                          std::uint64_t seed, double source_rate) {
  require(duration > 0.0, ErrorKind::ConfigError, "synthetic duration must be positive");
  require(channels >= 1, ErrorKind::ConfigError, "synthetic recordings need at least one channel");
  require(source_rate > 0.0, ErrorKind::ConfigError, "synthetic source rate must be positive");
  for (const auto& cls : classes)
    require(cls.frequency < 100.0 && cls.frequency >= 0.0, ErrorKind::NyquistViolation,
            "class " + cls.label + " frequency must lie in [0, 100) Hz");

  const auto n = static_cast<std::size_t>(std::lround(duration * source_rate));
  require(n >= 2, ErrorKind::ConfigError, "synthetic duration too short");
  const double period = 1.0 / source_rate;
  const auto names = default_channel_names(channels);

  std::vector<RawRecording> out;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& cls = classes[k];
    Rng rng(derive_seed(seed, {k}));
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double jitter = (i == 0 || i + 1 == n) ? 0.0 : rng.uniform(-0.3, 0.3) * period;
      times[i] = static_cast<double>(i) * period + jitter;
    }
    RawRecording rec;
    rec.label = cls.label;
    rec.channel_names = names;
    for (std::size_t c = 0; c < channels; ++c) {
      RawChannel ch;
      ch.times = times;
      ch.values.resize(n);
      const double phase = static_cast<double>(c) * std::numbers::pi / 7.0;
      for (std::size_t i = 0; i < n; ++i) {
        double v = cls.amplitude * std::sin(2.0 * std::numbers::pi * cls.frequency * times[i] + phase);
        if (cls.noise_std > 0.0) v += rng.normal(0.0, cls.noise_std);
        ch.values[i] = v;
      }
      rec.channels.push_back(std::move(ch));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace devo
