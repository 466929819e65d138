#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace devo {

/// One electrode's irregularly sampled stream.
struct RawChannel {
  std::vector<double> times;   // seconds, strictly increasing
  std::vector<double> values;  // microvolts
};

struct RawRecording {
  std::vector<std::string> channel_names;
  std::vector<RawChannel> channels;
  std::optional<std::string> label;
};

/// Throws InvalidRecording if the recording breaks any structural invariant
/// (fewer than two samples, non-increasing timestamps, misaligned coverage).
void validate(const RawRecording& rec);

struct UniformSignal {
  std::vector<std::string> channel_names;
  double rate = 0.0;
  std::vector<std::vector<double>> values;  // [channel][sample]
  std::optional<std::string> label;

  std::size_t length() const { return values.empty() ? 0 : values.front().size(); }
  double duration() const { return static_cast<double>(length()) / rate; }
};

struct Window {
  std::size_t start = 0;
};

struct WindowedSignal {
  std::shared_ptr<const UniformSignal> source;
  double window_len = 0.0;
  double stride = 0.0;
  std::size_t window_samples = 0;
  std::size_t stride_samples = 0;
  std::vector<Window> windows;

  std::size_t channel_count() const { return source->values.size(); }
  std::span<const double> slice(std::size_t window, std::size_t channel) const {
    return std::span<const double>(source->values[channel]).subspan(windows[window].start, window_samples);
  }
};

/// Fourier resampling onto a fixed-rate grid. Each channel is first
/// interpolated (local cubic, periodic extension over the recording span) onto
/// a dense uniform grid, then its spectrum is truncated to the target band and
/// inverted at `rate`. Output length is floor(duration * rate) where duration
/// spans the first sample to one mean sample period past the last.
UniformSignal resample(const RawRecording& rec, double rate);

/// Overlapping windows; trailing partial windows are dropped.
WindowedSignal make_windows(std::shared_ptr<const UniformSignal> sig, double window_len, double stride);

struct MindBigDataLoad {
  std::vector<RawRecording> recordings;
  std::vector<std::string> skipped;  // one message per dropped event
};

/// Nominal length of one MindBigData event in seconds.
inline constexpr double kMindBigDataEventSeconds = 2.0;

/// Reads the MindBigData open-DB tab-separated format. Events of device
/// `device_filter` are grouped by event id; at most `per_class_limit` events
/// per digit 0-9 are drawn by seeded sampling without replacement.
MindBigDataLoad load_mindbigdata(const std::filesystem::path& path, const std::string& device_filter,
                                 std::size_t per_class_limit, std::uint64_t seed);

/// Channel layout expected for a MindBigData device code.
std::vector<std::string> mindbigdata_channels(const std::string& device);

/// Generic raw CSV: `timestamp,<ch1>,...,label`. Contiguous runs of rows with
/// the same label become separate recordings.
std::vector<RawRecording> load_raw_csv(const std::filesystem::path& path);
/// Writes a recording whose channels share timestamps.
void write_raw_csv(const RawRecording& rec, const std::filesystem::path& path);

struct SynthClass {
  std::string label;
  double frequency = 0.0;  // Hz
  double amplitude = 1.0;
  double noise_std = 0.0;
};

/// Sinusoid-plus-noise recordings with jittered timestamps, one per class
/// entry. Channels share timestamps and differ by a fixed phase offset.
std::vector<RawRecording> synth_recording(std::span<const SynthClass> classes, double duration,
                                          std::size_t channels, std::uint64_t seed,
                                          double source_rate = 256.0);

/// Default Muse-style channel labels for synthetic recordings.
std::vector<std::string> default_channel_names(std::size_t count);

}  // namespace devo
