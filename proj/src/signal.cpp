#include "cosparse/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cosparse/errors.hpp"
#include "text_fields.hpp"

namespace cosparse {

static_assert(std::endian::native == std::endian::little, "raw binary I/O assumes little-endian host");

bool Dataset::labeled() const {
  return !frames.empty() &&
         std::all_of(frames.begin(), frames.end(), [](const SpikeFrame& f) { return f.label.has_value(); });
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.label) throw std::invalid_argument("dataset '" + name + "' is not labeled");
    out.push_back(*f.label);
  }
  return out;
}

std::vector<Eigen::VectorXd> Dataset::samples() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.samples);
  return out;
}

void Dataset::validate() const {
  const Eigen::Index n = frame_length();
  std::size_t with_label = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].samples.size() != n)
      throw DimensionMismatchError("frame " + std::to_string(i) + " has length " +
                                   std::to_string(frames[i].samples.size()) + ", expected " +
                                   std::to_string(n));
    if (!frames[i].samples.allFinite())
      throw std::invalid_argument("frame " + std::to_string(i) + " has non-finite samples");
    if (frames[i].label) ++with_label;
  }
  if (with_label != 0 && with_label != frames.size())
    throw std::invalid_argument("dataset is only partially labeled");
}

double mad_noise_level(const Eigen::VectorXd& samples) {
  if (samples.size() == 0) throw std::invalid_argument("empty trace");
  std::vector<double> mag(samples.data(), samples.data() + samples.size());
  for (double& v : mag) v = std::abs(v);
  const auto mid = mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2);
  std::nth_element(mag.begin(), mid, mag.end());
  double median = *mid;
  if (mag.size() % 2 == 0) median = 0.5 * (median + *std::max_element(mag.begin(), mid));
  return median / 0.6745;
}

std::vector<SpikeFrame> detect_spikes(const RawTrace& trace, double threshold_multiple,
                                      Eigen::Index frame_length, Eigen::Index pre_peak) {
  const Eigen::Index total = trace.samples.size();
  if (total == 0) throw std::invalid_argument("empty trace");
  if (!(threshold_multiple > 0.0)) throw std::invalid_argument("threshold multiple must be positive");
  if (frame_length < 1 || frame_length > total)
    throw InvalidShapeError("frame length must be in [1, trace length]");
  if (pre_peak < 0 || pre_peak >= frame_length) throw InvalidShapeError("pre_peak must be in [0, n)");

  const Eigen::VectorXd& x = trace.samples;
  const double threshold = threshold_multiple * mad_noise_level(x);
  const Eigen::Index dead = frame_length / 2;

  std::vector<SpikeFrame> frames;
  Eigen::Index blocked_until = -1;
  for (Eigen::Index i = 1; i < total; ++i) {
    if (i <= blocked_until) continue;
    if (!(std::abs(x(i)) > threshold && std::abs(x(i - 1)) <= threshold)) continue;

    const Eigen::Index end = std::min(total, i + dead);
    Eigen::Index peak = i;
    for (Eigen::Index j = i; j < end; ++j)
      if (std::abs(x(j)) > std::abs(x(peak))) peak = j;
    blocked_until = peak + dead;

    const Eigen::Index start = peak - pre_peak;
    if (start < 0 || start + frame_length > total) continue;
    SpikeFrame frame;
    frame.samples = x.segment(start, frame_length);
    frame.source_index = static_cast<std::size_t>(peak);
    frames.push_back(std::move(frame));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// File formats

namespace {

constexpr char kMagic[8] = {'N', 'S', 'P', 'K', '0', '0', '0', '1'};

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  Dataset data;
  data.name = path.stem().string();
  std::optional<long> declared_n;
  bool labeled = false;
  std::size_t width = 0;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (!data.frames.empty()) continue;
      std::istringstream hdr{std::string(t.substr(1))};
      std::string tok;
      while (hdr >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = std::string_view(tok).substr(eq + 1);
        if (key == "n") declared_n = detail::parse_number<long>(val, row);
        else if (key == "labeled") labeled = detail::parse_number<int>(val, row) != 0;
      }
      continue;
    }

    const auto fields = detail::split(t);
    if (data.frames.empty()) {
      width = fields.size();
      if (declared_n && static_cast<long>(width) != *declared_n + (labeled ? 1 : 0))
        throw ParseError("row has " + std::to_string(width) + " fields, header declares n=" +
                             std::to_string(*declared_n) + (labeled ? " plus label" : ""),
                         row);
      if (labeled && width < 2) throw ParseError("labeled row needs at least 2 fields", row);
    }
    if (fields.size() != width)
      throw ParseError("ragged row: expected " + std::to_string(width) + " fields, found " +
                           std::to_string(fields.size()),
                       row);

    const std::size_t n = labeled ? width - 1 : width;
    SpikeFrame frame;
    frame.samples.resize(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
      frame.samples(static_cast<Eigen::Index>(j)) = detail::parse_number<double>(fields[j], row);
    if (!frame.samples.allFinite()) throw ParseError("non-finite sample", row);
    if (labeled) frame.label = detail::parse_number<int>(fields[n], row);
    frame.source_index = data.frames.size();
    data.frames.push_back(std::move(frame));
  }
  return data;
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const bool labeled = data.labeled();
  out << "# n=" << data.frame_length() << " labeled=" << (labeled ? 1 : 0) << '\n';
  for (const auto& f : data.frames) {
    for (Eigen::Index j = 0; j < f.samples.size(); ++j) {
      if (j) out << ',';
      out << detail::format_double(f.samples(j));
    }
    if (labeled) out << ',' << *f.label;
    out << '\n';
  }
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  std::uint32_t count = 0, n = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError("missing NSPK0001 magic", 0);
  if (!in.read(reinterpret_cast<char*>(&count), 4) || !in.read(reinterpret_cast<char*>(&n), 4))
    throw ParseError("truncated header", 0);
  if (n == 0 && count != 0) throw ParseError("frame length 0", 0);

  Dataset data;
  data.name = path.stem().string();
  std::vector<float> buf(n);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n) * 4))
      throw ParseError("truncated sample block", i + 1);
    SpikeFrame frame;
    frame.samples.resize(n);
    for (std::uint32_t j = 0; j < n; ++j) frame.samples(j) = static_cast<double>(buf[j]);
    if (!frame.samples.allFinite()) throw ParseError("non-finite sample", i + 1);
    frame.source_index = i;
    data.frames.push_back(std::move(frame));
  }

  std::vector<std::int32_t> labels(count);
  if (count > 0 && in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count) * 4)) {
    for (std::uint32_t i = 0; i < count; ++i) data.frames[i].label = labels[i];
  } else if (in.gcount() != 0) {
    throw ParseError("truncated label trailer", 0);
  }
  return data;
}

void save_binary(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto count = static_cast<std::uint32_t>(data.frames.size());
  const auto n = static_cast<std::uint32_t>(data.frame_length());
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  std::vector<float> buf(n);
  for (const auto& f : data.frames) {
    for (std::uint32_t j = 0; j < n; ++j) buf[j] = static_cast<float>(f.samples(j));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n) * 4);
  }
  if (data.labeled()) {
    for (const auto& f : data.frames) {
      const std::int32_t label = *f.label;
      out.write(reinterpret_cast<const char*>(&label), 4);
    }
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  Dataset data = format == DatasetFormat::kCsv ? load_csv(path) : load_binary(path);
  data.validate();
  return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, path.extension() == ".csv" ? DatasetFormat::kCsv : DatasetFormat::kRawBinary);
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, DatasetFormat format) {
  data.validate();
  if (format == DatasetFormat::kCsv) save_csv(path, data);
  else save_binary(path, data);
}

// ---------------------------------------------------------------------------
// Synthetic spikes

namespace {

// (1 - e^{-t/rise})^p e^{-t/decay}: a signed sum of p + 1 exponentials that
// grows like t^p at onset. Normalized to a unit peak.
double unit_doe(double t, double rise, double decay, double p) {
  if (t <= 0.0) return 0.0;
  auto shape = [&](double s) { return std::pow(1.0 - std::exp(-s / rise), p) * std::exp(-s / decay); };
  const double t_peak = rise * std::log1p(p * decay / rise);
  return shape(t) / shape(t_peak);
}

}  // namespace

double SpikeTemplate::operator()(double t) const {
  return amplitude * (unit_doe(t, rise, decay, onset_power) -
                      rebound_ratio * unit_doe(t - rebound_delay, rebound_rise, rebound_decay, onset_power));
}

double SpikeTemplate::peak_time() const {
  // Coarse scan, then a fine scan around the coarse maximum.
  auto scan = [&](double from, double to, double step) {
    double best_t = from, best = -1.0;
    for (double t = from; t <= to; t += step) {
      const double v = std::abs((*this)(t));
      if (v > best) {
        best = v;
        best_t = t;
      }
    }
    return best_t;
  };
  const double coarse = scan(0.0, 100.0, 0.05);
  return scan(std::max(0.0, coarse - 0.05), coarse + 0.05, 1e-4);
}

namespace {

constexpr int kTemplateAttempts = 200;
constexpr double kTemplateSeparation = 3.0;

// Peak-aligned template samples on a 96-sample grid, shifted by `shift` samples.
Eigen::VectorXd template_window(const SpikeTemplate& t, double peak, double shift) {
  Eigen::VectorXd w(96);
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = t(static_cast<double>(k) - 32.0 + peak + shift);
  return w;
}

// Smallest ratio of pairwise template distance to the larger within-unit jitter
// displacement (a 2-sample shift).
double template_separation(const std::vector<SpikeTemplate>& ts) {
  std::vector<Eigen::VectorXd> base;
  std::vector<double> wobble;
  for (const auto& t : ts) {
    const double peak = t.peak_time();
    base.push_back(template_window(t, peak, 0.0));
    wobble.push_back((template_window(t, peak, 2.0) - base.back()).norm());
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = i + 1; j < ts.size(); ++j)
      worst = std::min(worst, (base[i] - base[j]).norm() / std::max(wobble[i], wobble[j]));
  return worst;
}

std::vector<SpikeTemplate> draw_templates(int units, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Stratify amplitude and the two most visible shape parameters across units.
  std::vector<int> decay_rank(static_cast<std::size_t>(units)), rebound_rank(decay_rank.size()),
      amplitude_rank(decay_rank.size());
  std::iota(decay_rank.begin(), decay_rank.end(), 0);
  std::iota(rebound_rank.begin(), rebound_rank.end(), 0);
  std::iota(amplitude_rank.begin(), amplitude_rank.end(), 0);
  std::shuffle(rebound_rank.begin(), rebound_rank.end(), rng);
  std::shuffle(amplitude_rank.begin(), amplitude_rank.end(), rng);

  std::vector<SpikeTemplate> out;
  for (int u = 0; u < units; ++u) {
    const auto i = static_cast<std::size_t>(u);
    SpikeTemplate t;
    const double ds = (decay_rank[i] + 0.25 + 0.5 * unif(rng)) / units;
    const double rs = (rebound_rank[i] + 0.25 + 0.5 * unif(rng)) / units;
    const double as = (amplitude_rank[i] + 0.25 + 0.5 * unif(rng)) / units;
    t.amplitude = -(0.6 + 1.0 * as);
    t.rise = 2.5 + 2.5 * unif(rng);
    t.decay = 5.0 + 10.0 * ds;
    t.rebound_ratio = 0.15 + 0.45 * rs;
    t.rebound_delay = 8.0 + 8.0 * unif(rng);
    t.rebound_rise = 3.0 + 3.0 * unif(rng);
    t.rebound_decay = 10.0 + 10.0 * unif(rng);
    out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<SpikeTemplate> make_templates(int units, std::uint64_t seed) {
  if (units < 1) throw std::invalid_argument("need at least one unit");
  std::mt19937_64 rng(seed);
  // Redraw until every pair of units is well separated relative to jitter;
  // keep the best draw if none qualifies.
  std::vector<SpikeTemplate> best;
  double best_sep = -1.0;
  for (int attempt = 0; attempt < kTemplateAttempts; ++attempt) {
    auto ts = draw_templates(units, rng);
    if (units == 1) return ts;
    const double sep = template_separation(ts);
    if (sep > best_sep) {
      best_sep = sep;
      best = std::move(ts);
    }
    if (best_sep >= kTemplateSeparation) break;
  }
  return best;
}

Dataset synthesize_dataset(int units, int frames_per_unit, Eigen::Index n, double noise_sigma,
                           std::uint64_t seed, const SynthesisOptions& options) {
  if (units < 1) throw std::invalid_argument("need at least one unit");
  if (frames_per_unit < 0) throw std::invalid_argument("frames_per_unit must be nonnegative");
  if (n < 1) throw InvalidShapeError("frame length must be at least 1");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be nonnegative");

  const auto templates = make_templates(units, seed);
  std::vector<double> peak_times;
  for (const auto& t : templates) peak_times.push_back(t.peak_time());

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset data;
  {
    std::ostringstream name;
    name << "synthetic-k" << units << "-seed" << seed;
    data.name = name.str();
  }
  data.sampling_rate = 24000.0;
  data.difficulty_tag = noise_sigma > 0.0 ? "noisy" : "noiseless";

  const int total = units * frames_per_unit;
  for (int i = 0; i < total; ++i) {
    const int unit = i % units;
    const auto& tmpl = templates[static_cast<std::size_t>(unit)];
    const double shift = options.jitter * unif(rng);
    const double gain = 1.0 + options.scale_spread * unif(rng);
    const double onset = static_cast<double>(options.pre_peak) - peak_times[static_cast<std::size_t>(unit)] + shift;

    SpikeFrame frame;
    frame.samples.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) frame.samples(j) = gain * tmpl(static_cast<double>(j) - onset);
    if (noise_sigma > 0.0)
      for (Eigen::Index j = 0; j < n; ++j) frame.samples(j) += noise_sigma * gauss(rng);
    frame.label = unit;
    frame.source_index = static_cast<std::size_t>(i);
    data.frames.push_back(std::move(frame));
  }
  return data;
}

}  // namespace cosparse
