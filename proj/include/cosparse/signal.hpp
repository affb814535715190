#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cosparse {

inline constexpr Eigen::Index kDefaultFrameLength = 128;
inline constexpr Eigen::Index kDefaultPrePeak = 40;

struct SpikeFrame {
  Eigen::VectorXd samples;
  std::optional<int> label;
  std::size_t source_index = 0;
};

struct Dataset {
  std::vector<SpikeFrame> frames;
  std::string name;
  std::optional<double> sampling_rate;
  std::optional<std::string> difficulty_tag;

  Eigen::Index frame_length() const { return frames.empty() ? 0 : frames.front().samples.size(); }
  bool labeled() const;
  std::vector<int> labels() const;  // requires labeled()
  std::vector<Eigen::VectorXd> samples() const;
  // Throws if frames are ragged, non-finite, or only partially labeled.
  void validate() const;
};

struct RawTrace {
  Eigen::VectorXd samples;
  double sampling_rate = 24000.0;
};

// Robust noise level median(|x|) / 0.6745.
double mad_noise_level(const Eigen::VectorXd& samples);

// Threshold-crossing detector: every upward crossing of |x| over
// threshold_multiple · noise level yields one frame with its absolute peak at
// pre_peak. Crossings within n/2 samples after an accepted peak are ignored.
std::vector<SpikeFrame> detect_spikes(const RawTrace& trace, double threshold_multiple,
                                      Eigen::Index frame_length = kDefaultFrameLength,
                                      Eigen::Index pre_peak = kDefaultPrePeak);

enum class DatasetFormat { kCsv, kRawBinary };

// Spike CSV: optional "# n=<int> labeled=<0|1>" header, one frame per row, n
// floats plus a trailing integer label when labeled. Without a header, rows are
// unlabeled.
//
// Raw binary: magic "NSPK0001", uint32 frame count, uint32 n (little-endian),
// then count·n float32 samples. An optional trailer of count int32 labels
// follows the samples.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
Dataset load_dataset(const std::filesystem::path& path);  // format by extension (.csv / other)
void save_dataset(const std::filesystem::path& path, const Dataset& data, DatasetFormat format);

struct SynthesisOptions {
  Eigen::Index pre_peak = kDefaultPrePeak;
  double jitter = 2.0;         // uniform shift in [-jitter, jitter] samples
  double scale_spread = 0.1;   // uniform amplitude factor in [1 - s, 1 + s]
};

// Unit template: a depolarization difference-of-exponentials followed by an
// opposite-sign, slower repolarization lobe. Zero before onset.
struct SpikeTemplate {
  double amplitude = -1.0;
  double rise = 1.0;
  double decay = 3.0;
  double rebound_ratio = 0.3;
  double rebound_delay = 4.0;
  double rebound_rise = 3.0;
  double rebound_decay = 12.0;
  double onset_power = 4.0;

  double operator()(double t) const;  // t relative to onset
  double peak_time() const;           // argmax |h(t)| for t >= 0
};

std::vector<SpikeTemplate> make_templates(int units, std::uint64_t seed);

// k units, frames interleaved by unit (frame i has label i mod k).
Dataset synthesize_dataset(int units, int frames_per_unit, Eigen::Index n, double noise_sigma,
                           std::uint64_t seed, const SynthesisOptions& options = {});

}  // namespace cosparse
