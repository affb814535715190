#include "cosparse/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cosparse/errors.hpp"
#include "cosparse/fracdiff.hpp"
#include "cosparse/sensing.hpp"
#include "text_fields.hpp"

namespace cosparse {

namespace {

using detail::format_double;

enum SeedTag : std::uint64_t { kTagNoise = 2, kTagRtf = 3, kTagKmeans = 4 };

// Trial t uses sensing seed master + t at every M.
std::uint64_t matrix_seed(const ExperimentConfig& config, std::size_t trial) { return config.seed + trial; }

std::string key_error(const std::string& key, const std::string& value, const std::string& why) {
  return "config key '" + key + "' = '" + value + "': " + why;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    const double v = detail::parse_number<double>(value, 0);
    if (!std::isfinite(v)) throw ConfigError(key_error(key, value, "not finite"));
    return v;
  } catch (const ParseError&) {
    throw ConfigError(key_error(key, value, "expected a number"));
  }
}

long long to_integer(const std::string& key, const std::string& value) {
  try {
    return detail::parse_number<long long>(value, 0);
  } catch (const ParseError&) {
    throw ConfigError(key_error(key, value, "expected an integer"));
  }
}

int to_int(const std::string& key, const std::string& value) {
  const auto v = to_integer(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(key_error(key, value, "out of range"));
  return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& value) {
  try {
    return detail::parse_number<std::uint64_t>(value, 0);
  } catch (const ParseError&) {
    throw ConfigError(key_error(key, value, "expected a nonnegative integer"));
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  const auto v = detail::trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key_error(key, value, "expected true or false"));
}

std::vector<std::string> to_words(const std::string& value) {
  std::vector<std::string> out;
  for (auto f : detail::split(value, ',')) {
    f = detail::trim(f);
    if (!f.empty()) out.emplace_back(f);
  }
  return out;
}

// Comma list, or a start:stop:step range (stop inclusive).
std::vector<double> to_doubles(const std::string& key, const std::string& value) {
  const auto range = detail::split(value, ':');
  if (range.size() == 3) {
    const double a = to_double(key, std::string(range[0]));
    const double b = to_double(key, std::string(range[1]));
    const double s = to_double(key, std::string(range[2]));
    if (!(s > 0.0) || b < a) throw ConfigError(key_error(key, value, "bad range"));
    std::vector<double> out;
    const auto count = static_cast<long long>(std::floor((b - a) / s + 1e-9));
    for (long long i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * s);
    return out;
  }
  std::vector<double> out;
  for (const auto& w : to_words(value)) out.push_back(to_double(key, w));
  return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& value) {
  const auto range = detail::split(value, ':');
  if (range.size() == 3) {
    const int a = to_int(key, std::string(range[0]));
    const int b = to_int(key, std::string(range[1]));
    const int s = to_int(key, std::string(range[2]));
    if (s <= 0 || b < a) throw ConfigError(key_error(key, value, "bad range"));
    std::vector<int> out;
    for (int v = a; v <= b; v += s) out.push_back(v);
    return out;
  }
  std::vector<int> out;
  for (const auto& w : to_words(value)) out.push_back(to_int(key, w));
  return out;
}

std::optional<double> to_optional(const std::string& key, const std::string& value) {
  const auto v = detail::trim(value);
  if (v.empty() || v == "auto" || v == "none") return std::nullopt;
  return to_double(key, std::string(v));
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) { return join(v, format_double); }
std::string join_ints(const std::vector<int>& v) {
  return join(v, [](int x) { return std::to_string(x); });
}
std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string header_line(const ExperimentConfig& config) {
  return "# cosparse seed=" + std::to_string(config.seed) + " config_hash=" + config_hash(config) + "\n";
}

std::ofstream open_output(const ExperimentConfig& config, const std::string& name,
                          std::vector<std::filesystem::path>& files) {
  std::filesystem::create_directories(config.output);
  const auto path = std::filesystem::path(config.output) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  files.push_back(path);
  return out;
}

void set_threads(const ExperimentConfig& config) {
#ifdef _OPENMP
  if (config.threads > 0) omp_set_num_threads(config.threads);
#else
  (void)config;
#endif
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct MethodSpec {
  std::string name;
  AnalysisDictionary dict;
  Eigen::VectorXd weights;
};

std::vector<MethodSpec> method_specs(const ExperimentConfig& config, Eigen::Index n,
                                     const std::optional<TrainingOutcome>& trained) {
  std::vector<MethodSpec> specs;
  for (const auto& name : config.methods) {
    if (name == "walm") {
      auto dict = build_mfod(config.orders, n);
      specs.push_back({name, dict, trained->weights.values});
    } else if (name == "al1") {
      auto dict = build_mfod(config.orders, n);
      specs.push_back({name, dict, Eigen::VectorXd::Ones(dict.rows())});
    } else if (name == "miod") {
      auto dict = build_mfod(config.miod_orders, n);
      specs.push_back({name, dict, Eigen::VectorXd::Ones(dict.rows())});
    } else if (name == "iod") {
      const double order[] = {config.iod_order};
      auto dict = build_mfod(order, n);
      specs.push_back({name, dict, Eigen::VectorXd::Ones(dict.rows())});
    } else if (name == "rtf") {
      auto dict = build_random_tight_frame(config.rtf_redundancy * n, n, derive_seed(config.seed, kTagRtf));
      specs.push_back({name, dict, Eigen::VectorXd::Ones(dict.rows())});
    }
  }
  return specs;
}

struct BatchOutput {
  std::vector<Eigen::VectorXd> x_hat;
  std::vector<int> iterations;
  std::vector<char> converged;
};

// Solves every measurement vector with one cached solver; results stored by index.
BatchOutput reconstruct_batch(const AnalysisL1Solver& solver, const std::vector<Eigen::VectorXd>& ys,
                              const Eigen::VectorXd& weights, const SolverConfig& scfg,
                              const std::string& context) {
  const auto count = static_cast<long long>(ys.size());
  BatchOutput out;
  out.x_hat.resize(ys.size());
  out.iterations.assign(ys.size(), 0);
  out.converged.assign(ys.size(), 0);
  std::vector<std::string> errors(ys.size());

#pragma omp parallel for schedule(dynamic)
  for (long long s = 0; s < count; ++s) {
    try {
      const auto r = solver.solve(ys[static_cast<std::size_t>(s)], weights, scfg);
      out.x_hat[static_cast<std::size_t>(s)] = r.x_hat;
      out.iterations[static_cast<std::size_t>(s)] = r.iterations;
      out.converged[static_cast<std::size_t>(s)] = r.converged ? 1 : 0;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(s)] = e.what();
    }
  }
  for (std::size_t s = 0; s < errors.size(); ++s)
    if (!errors[s].empty())
      throw std::runtime_error(context + " spike " + std::to_string(s) + ": " + errors[s]);
  return out;
}

std::vector<Eigen::VectorXd> measure_all(const SensingMatrix& phi, const std::vector<Eigen::VectorXd>& frames,
                                         const ExperimentConfig& config, int m, int trial) {
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(frames.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    const auto seed = derive_seed(config.seed, kTagNoise, static_cast<std::uint64_t>(m),
                                  static_cast<std::uint64_t>(trial), s);
    ys.push_back(measure(phi, frames[s], config.measurement_noise, seed).values);
  }
  return ys;
}

void check_measurements(const ExperimentConfig& config, Eigen::Index n) {
  for (int m : config.measurements)
    if (m > n)
      throw ConfigError("measurement count " + std::to_string(m) + " exceeds frame length " + std::to_string(n));
  if (config.classify_m > n)
    throw ConfigError("classify_m exceeds frame length " + std::to_string(n));
}

struct FittedPrior {
  OrderVarianceModel model;
  std::vector<OrderSigma> points;
};

FittedPrior fit_prior(const ExperimentConfig& config, const std::vector<Eigen::VectorXd>& train) {
  if (train.empty()) throw ConfigError("training needs train_count >= 1 frames");
  const auto& orders = config.train_orders.empty() ? config.orders : config.train_orders;
  FittedPrior out;
  for (double f : orders) out.points.push_back({f, estimate_order_sigma(train, f)});
  out.model = fit_variance_model(out.points);
  return out;
}

Eigen::MatrixXd extract_features(const ExperimentConfig& config, const std::vector<Eigen::VectorXd>& frames) {
  if (config.feature_kind == "haar") return haar_features(frames, config.features);
  return pca_features(frames, config.features);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "dataset", "dataset_format", "units", "frames_per_unit", "frame_length", "data_noise", "data_seed",
      "jitter", "scale_spread", "pre_peak", "orders", "miod_orders", "iod_order", "rtf_redundancy",
      "methods", "measurements", "trials", "seed", "measurement_noise", "eval_count", "lambda",
      "lambda_scale", "noise_hint", "penalty", "adapt_penalty", "abs_tol", "rel_tol", "max_iter",
      "train_count", "train_orders", "model", "clip_ratio", "weight_normalization", "classify_m",
      "features", "feature_kind", "restarts", "cosparsity_orders", "cosparsity_tol", "output", "threads"};
  return keys;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value(detail::trim(raw));
  if (key == "dataset") dataset = value;
  else if (key == "dataset_format") dataset_format = value;
  else if (key == "units") units = to_int(key, value);
  else if (key == "frames_per_unit") frames_per_unit = to_int(key, value);
  else if (key == "frame_length") frame_length = to_int(key, value);
  else if (key == "data_noise") data_noise = to_double(key, value);
  else if (key == "data_seed") data_seed = to_seed(key, value);
  else if (key == "jitter") jitter = to_double(key, value);
  else if (key == "scale_spread") scale_spread = to_double(key, value);
  else if (key == "pre_peak") pre_peak = to_int(key, value);
  else if (key == "orders") orders = to_doubles(key, value);
  else if (key == "miod_orders") miod_orders = to_doubles(key, value);
  else if (key == "iod_order") iod_order = to_double(key, value);
  else if (key == "rtf_redundancy") rtf_redundancy = to_int(key, value);
  else if (key == "methods") methods = to_words(value);
  else if (key == "measurements") measurements = to_ints(key, value);
  else if (key == "trials") trials = to_int(key, value);
  else if (key == "seed") seed = to_seed(key, value);
  else if (key == "measurement_noise") measurement_noise = to_double(key, value);
  else if (key == "eval_count") eval_count = to_int(key, value);
  else if (key == "lambda") lambda = to_optional(key, value);
  else if (key == "lambda_scale") lambda_scale = to_double(key, value);
  else if (key == "noise_hint") noise_hint = to_optional(key, value);
  else if (key == "penalty") penalty = to_double(key, value);
  else if (key == "adapt_penalty") adapt_penalty = to_bool(key, value);
  else if (key == "abs_tol") abs_tol = to_double(key, value);
  else if (key == "rel_tol") rel_tol = to_double(key, value);
  else if (key == "max_iter") max_iter = to_int(key, value);
  else if (key == "train_count") train_count = to_int(key, value);
  else if (key == "train_orders") train_orders = to_doubles(key, value);
  else if (key == "model") model = value;
  else if (key == "clip_ratio") clip_ratio = to_double(key, value);
  else if (key == "weight_normalization") weight_normalization = value;
  else if (key == "classify_m") classify_m = to_int(key, value);
  else if (key == "features") features = to_int(key, value);
  else if (key == "feature_kind") feature_kind = value;
  else if (key == "restarts") restarts = to_int(key, value);
  else if (key == "cosparsity_orders") cosparsity_orders = to_doubles(key, value);
  else if (key == "cosparsity_tol") cosparsity_tol = to_double(key, value);
  else if (key == "output") output = value;
  else if (key == "threads") threads = to_int(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::pairs() const {
  auto str = [](auto v) { return std::to_string(v); };
  return {
      {"dataset", dataset},
      {"dataset_format", dataset_format},
      {"units", str(units)},
      {"frames_per_unit", str(frames_per_unit)},
      {"frame_length", str(frame_length)},
      {"data_noise", format_double(data_noise)},
      {"data_seed", str(data_seed)},
      {"jitter", format_double(jitter)},
      {"scale_spread", format_double(scale_spread)},
      {"pre_peak", str(pre_peak)},
      {"orders", join_doubles(orders)},
      {"miod_orders", join_doubles(miod_orders)},
      {"iod_order", format_double(iod_order)},
      {"rtf_redundancy", str(rtf_redundancy)},
      {"methods", join(methods, [](const std::string& s) { return s; })},
      {"measurements", join_ints(measurements)},
      {"trials", str(trials)},
      {"seed", str(seed)},
      {"measurement_noise", format_double(measurement_noise)},
      {"eval_count", str(eval_count)},
      {"lambda", optional_text(lambda)},
      {"lambda_scale", format_double(lambda_scale)},
      {"noise_hint", optional_text(noise_hint)},
      {"penalty", format_double(penalty)},
      {"adapt_penalty", adapt_penalty ? "true" : "false"},
      {"abs_tol", format_double(abs_tol)},
      {"rel_tol", format_double(rel_tol)},
      {"max_iter", str(max_iter)},
      {"train_count", str(train_count)},
      {"train_orders", join_doubles(train_orders)},
      {"model", model},
      {"clip_ratio", format_double(clip_ratio)},
      {"weight_normalization", weight_normalization},
      {"classify_m", str(classify_m)},
      {"features", str(features)},
      {"feature_kind", feature_kind},
      {"restarts", str(restarts)},
      {"cosparsity_orders", join_doubles(cosparsity_orders)},
      {"cosparsity_tol", format_double(cosparsity_tol)},
      {"output", output},
      {"threads", str(threads)},
  };
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(dataset_format == "auto" || dataset_format == "csv" || dataset_format == "binary",
          "dataset_format must be auto, csv or binary");
  if (dataset.empty()) {
    require(units >= 1, "units must be at least 1");
    require(frames_per_unit >= 1, "frames_per_unit must be at least 1");
    require(frame_length >= 1, "frame_length must be at least 1");
    require(pre_peak >= 0 && pre_peak < frame_length, "pre_peak must lie in [0, frame_length)");
    require(data_noise >= 0.0, "data_noise must be nonnegative");
    require(jitter >= 0.0, "jitter must be nonnegative");
    require(scale_spread >= 0.0 && scale_spread < 1.0, "scale_spread must lie in [0, 1)");
  }
  require(!orders.empty(), "orders must not be empty");
  for (const auto* set : {&orders, &miod_orders, &train_orders, &cosparsity_orders})
    for (double f : *set) require(f >= 0.0, "orders must be nonnegative");
  require(iod_order >= 0.0, "iod_order must be nonnegative");
  require(rtf_redundancy >= 1, "rtf_redundancy must be at least 1");
  require(!methods.empty(), "methods must not be empty");
  for (const auto& m : methods) require(contains(kKnownMethods, m), "unknown method '" + m + "'");
  require(std::set<std::string>(methods.begin(), methods.end()).size() == methods.size(),
          "methods must not repeat");
  require(!measurements.empty(), "measurements must not be empty");
  for (int m : measurements) {
    require(m >= 1, "measurement counts must be positive");
    if (dataset.empty()) require(m <= frame_length, "measurement counts must not exceed frame_length");
  }
  require(trials >= 1, "trials must be at least 1");
  require(measurement_noise >= 0.0, "measurement_noise must be nonnegative");
  require(eval_count >= 0, "eval_count must be nonnegative");
  require(train_count >= 0, "train_count must be nonnegative");
  require(clip_ratio >= 1.0, "clip_ratio must be at least 1");
  require(weight_normalization == "mean" || weight_normalization == "none",
          "weight_normalization must be mean or none");
  require(classify_m >= 1, "classify_m must be positive");
  if (dataset.empty()) require(classify_m <= frame_length, "classify_m must not exceed frame_length");
  require(features >= 1, "features must be at least 1");
  require(feature_kind == "pca" || feature_kind == "haar", "feature_kind must be pca or haar");
  require(restarts >= 1, "restarts must be at least 1");
  require(cosparsity_tol >= 0.0, "cosparsity_tol must be nonnegative");
  require(threads >= 0, "threads must be nonnegative");
  try {
    solver().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SolverConfig ExperimentConfig::solver() const {
  SolverConfig s;
  s.lambda = lambda;
  s.noise_sigma_hint = noise_hint;
  s.lambda_scale = lambda_scale;
  s.penalty = penalty;
  s.adapt_penalty = adapt_penalty;
  s.abs_tol = abs_tol;
  s.rel_tol = rel_tol;
  s.max_iter = max_iter;
  return s;
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    const auto body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(row) + ": expected key = value");
    config.set(std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))));
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig config;
  apply_config_text(config, buf.str());
  return config;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : config.pairs()) {
    if (k == "output" || k == "threads") continue;
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t v : {tag, a, b, c}) h = splitmix64(h ^ v);
  return h;
}

Dataset experiment_dataset(const ExperimentConfig& config) {
  Dataset data;
  if (!config.dataset.empty()) {
    if (config.dataset_format == "csv") data = load_dataset(config.dataset, DatasetFormat::kCsv);
    else if (config.dataset_format == "binary") data = load_dataset(config.dataset, DatasetFormat::kRawBinary);
    else data = load_dataset(config.dataset);
  } else {
    SynthesisOptions opts;
    opts.pre_peak = config.pre_peak;
    opts.jitter = config.jitter;
    opts.scale_spread = config.scale_spread;
    data = synthesize_dataset(config.units, config.frames_per_unit, config.frame_length, config.data_noise,
                              config.data_seed, opts);
  }
  data.validate();
  if (data.frames.empty()) throw std::runtime_error("dataset has no frames");
  return data;
}

DataSplit split_dataset(const Dataset& data, const ExperimentConfig& config) {
  const auto total = data.frames.size();
  const auto train = static_cast<std::size_t>(config.train_count);
  if (train >= total)
    throw ConfigError("train_count " + std::to_string(train) + " leaves no evaluation frames out of " +
                      std::to_string(total));
  std::size_t count = total - train;
  if (config.eval_count > 0) count = std::min(count, static_cast<std::size_t>(config.eval_count));
  DataSplit split;
  const bool labeled = data.labeled();
  for (std::size_t i = 0; i < train; ++i) split.train.push_back(data.frames[i].samples);
  for (std::size_t i = train; i < train + count; ++i) {
    split.eval.push_back(data.frames[i].samples);
    if (labeled) split.eval_labels.push_back(*data.frames[i].label);
  }
  return split;
}

TrainingOutcome train_prior(const ExperimentConfig& config, const std::vector<Eigen::VectorXd>& train,
                            Eigen::Index n) {
  TrainingOutcome out;
  out.model = config.model.empty() ? fit_prior(config, train).model : read_model(config.model);
  out.weights = build_weights(out.model, config.orders, n, config.clip_ratio);
  if (config.weight_normalization == "mean") out.weights.values /= out.weights.values.mean();
  return out;
}

SweepResult run_sweep(const ExperimentConfig& config, bool write) {
  config.validate();
  set_threads(config);
  const auto data = experiment_dataset(config);
  const auto split = split_dataset(data, config);
  const auto n = data.frame_length();
  check_measurements(config, n);

  std::optional<TrainingOutcome> trained;
  if (contains(config.methods, "walm")) trained = train_prior(config, split.train, n);
  const auto specs = method_specs(config, n, trained);
  const auto scfg = config.solver();
  const auto spikes = split.eval.size();
  const auto trials = static_cast<std::size_t>(config.trials);

  SweepResult result;
  result.measurements = config.measurements;
  for (const auto& spec : specs) result.methods.push_back({spec.name, {}, {}, {}, {}});

  nlohmann::ordered_json matrix_seeds = nlohmann::ordered_json::array();
  for (int m : config.measurements) {
    std::vector<std::vector<double>> prds(specs.size(), std::vector<double>(trials * spikes));
    std::vector<std::vector<double>> trial_good(specs.size());
    std::vector<double> iterations(specs.size(), 0.0), converged(specs.size(), 0.0);

    for (std::size_t t = 0; t < trials; ++t) {
      const auto phi_seed = matrix_seed(config, t);
      matrix_seeds.push_back({{"M", m}, {"trial", t}, {"seed", phi_seed}});
      const auto phi = bernoulli_matrix(m, n, phi_seed);
      const auto ys = measure_all(phi, split.eval, config, m, static_cast<int>(t));

      for (std::size_t k = 0; k < specs.size(); ++k) {
        const AnalysisL1Solver solver(phi, specs[k].dict, config.penalty);
        const auto context = specs[k].name + " M=" + std::to_string(m) + " trial " + std::to_string(t);
        const auto batch = reconstruct_batch(solver, ys, specs[k].weights, scfg, context);
        std::vector<double> this_trial(spikes);
        for (std::size_t s = 0; s < spikes; ++s) {
          try {
            this_trial[s] = prd(split.eval[s], batch.x_hat[s]);
          } catch (const std::exception& e) {
            throw std::runtime_error(context + " spike " + std::to_string(s) + ": " + e.what());
          }
          prds[k][t * spikes + s] = this_trial[s];
          iterations[k] += batch.iterations[s];
          converged[k] += batch.converged[s];
        }
        trial_good[k].push_back(good_probability(this_trial));
      }
    }

    const double total = static_cast<double>(trials * spikes);
    for (std::size_t k = 0; k < specs.size(); ++k) {
      auto& ms = result.methods[k];
      ms.pooled.push_back(summarize_reconstruction(std::move(prds[k]), m));
      double mean_good = 0.0;
      for (double g : trial_good[k]) mean_good += g;
      ms.trial_mean_good.push_back(mean_good / static_cast<double>(trials));
      ms.mean_iterations.push_back(iterations[k] / total);
      ms.converged_fraction.push_back(converged[k] / total);
    }
  }

  if (!write) return result;

  for (const auto& ms : result.methods) {
    auto out = open_output(config, "sweep_" + ms.method + ".csv", result.files);
    out << header_line(config);
    out << "M,mean_prd,good_probability,q25,median,q75,min_prd,max_prd,good_probability_trial_mean,"
           "mean_iterations,converged_fraction\n";
    for (std::size_t i = 0; i < ms.pooled.size(); ++i) {
      const auto& r = ms.pooled[i];
      out << r.num_measurements << ',' << format_double(r.mean_prd) << ',' << format_double(r.good_probability)
          << ',' << format_double(r.quartiles.q25) << ',' << format_double(r.quartiles.median) << ','
          << format_double(r.quartiles.q75) << ',' << format_double(r.min_prd) << ','
          << format_double(r.max_prd) << ',' << format_double(ms.trial_mean_good[i]) << ','
          << format_double(ms.mean_iterations[i]) << ',' << format_double(ms.converged_fraction[i]) << '\n';
    }
  }

  nlohmann::ordered_json manifest;
  manifest["command"] = "sweep";
  manifest["seed"] = config.seed;
  manifest["config_hash"] = config_hash(config);
  nlohmann::ordered_json echo;
  for (const auto& [k, v] : config.pairs())
    if (k != "output" && k != "threads") echo[k] = v;
  manifest["config"] = echo;
  manifest["dataset"] = {{"name", data.name},
                         {"frames", data.frames.size()},
                         {"frame_length", n},
                         {"train_frames", split.train.size()},
                         {"eval_frames", spikes},
                         {"labeled", data.labeled()}};
  if (trained) {
    manifest["model"] = {{"a", trained->model.a}, {"b", trained->model.b}, {"c", trained->model.c},
                         {"residual", trained->model.residual}};
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < trained->weights.group_count; ++g)
      groups.push_back({{"order", config.orders[g]}, {"weight", trained->weights.group_value(g)}});
    manifest["weights"] = groups;
  }
  manifest["seeds"] = {{"master", config.seed},
                       {"data", config.data_seed},
                       {"rtf", derive_seed(config.seed, kTagRtf)},
                       {"matrices", matrix_seeds}};
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& ms : result.methods) files.push_back("sweep_" + ms.method + ".csv");
  manifest["files"] = files;
  auto out = open_output(config, "sweep_manifest.json", result.files);
  out << manifest.dump(2) << '\n';
  return result;
}

ClassificationResult run_classification(const ExperimentConfig& config, bool write) {
  config.validate();
  set_threads(config);
  const auto data = experiment_dataset(config);
  if (!data.labeled()) throw std::runtime_error("classification needs a labeled dataset");
  const auto split = split_dataset(data, config);
  const auto n = data.frame_length();
  check_measurements(config, n);

  const std::set<int> units(split.eval_labels.begin(), split.eval_labels.end());
  const int k = static_cast<int>(units.size());
  const auto kmeans_seed = derive_seed(config.seed, kTagKmeans);

  std::optional<TrainingOutcome> trained;
  if (contains(config.methods, "walm")) trained = train_prior(config, split.train, n);
  const auto specs = method_specs(config, n, trained);
  const auto scfg = config.solver();
  const int m = config.classify_m;
  const auto phi = bernoulli_matrix(m, n, matrix_seed(config, 0));
  const auto ys = measure_all(phi, split.eval, config, m, 0);

  ClassificationResult result;
  auto classify = [&](const std::string& name, const std::vector<Eigen::VectorXd>& frames, double mean_prd) {
    ClassificationOutcome o;
    o.method = name;
    o.mean_prd = mean_prd;
    o.features = extract_features(config, frames);
    o.clusters = kmeans_classify(o.features, k, config.restarts, kmeans_seed);
    o.report = classification_accuracy(o.clusters, split.eval_labels);
    o.report.features_used = static_cast<int>(o.features.cols());
    result.outcomes.push_back(std::move(o));
  };

  classify("original", split.eval, 0.0);
  for (const auto& spec : specs) {
    const AnalysisL1Solver solver(phi, spec.dict, config.penalty);
    const auto batch = reconstruct_batch(solver, ys, spec.weights, scfg, spec.name + " M=" + std::to_string(m));
    double total = 0.0;
    for (std::size_t s = 0; s < split.eval.size(); ++s) total += prd(split.eval[s], batch.x_hat[s]);
    classify(spec.name, batch.x_hat, total / static_cast<double>(split.eval.size()));
  }

  if (!write) return result;

  {
    auto out = open_output(config, "classification.csv", result.files);
    out << header_line(config);
    out << "method,M,accuracy,mean_prd,features_used\n";
    for (const auto& o : result.outcomes)
      out << o.method << ',' << (o.method == "original" ? 0 : m) << ',' << format_double(o.report.accuracy) << ','
          << format_double(o.mean_prd) << ',' << o.report.features_used << '\n';
  }
  for (const auto& o : result.outcomes) {
    auto out = open_output(config, "scatter_" + o.method + ".csv", result.files);
    out << header_line(config);
    out << "f1,f2,f3,cluster,truth\n";
    for (Eigen::Index r = 0; r < o.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < 3; ++c)
        out << format_double(c < o.features.cols() ? o.features(r, c) : 0.0) << ',';
      out << o.clusters[static_cast<std::size_t>(r)] << ',' << split.eval_labels[static_cast<std::size_t>(r)]
          << '\n';
    }
  }
  nlohmann::ordered_json j;
  j["command"] = "classify";
  j["seed"] = config.seed;
  j["config_hash"] = config_hash(config);
  j["M"] = m;
  j["clusters"] = k;
  j["spikes"] = split.eval.size();
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& o : result.outcomes) {
    auto e = nlohmann::ordered_json::parse(to_json(o.report));
    e["method"] = o.method;
    e["mean_prd"] = o.mean_prd;
    entries.push_back(e);
  }
  j["results"] = entries;
  auto out = open_output(config, "classification.json", result.files);
  out << j.dump(2) << '\n';
  return result;
}

TrainingResult run_training(const ExperimentConfig& config, bool write) {
  config.validate();
  const auto data = experiment_dataset(config);
  const auto split = split_dataset(data, config);
  const auto fitted = fit_prior(config, split.train);

  TrainingResult result;
  result.regression_points = fitted.points;
  result.outcome.model = fitted.model;
  result.outcome.weights = build_weights(fitted.model, config.orders, data.frame_length(), config.clip_ratio);
  if (config.weight_normalization == "mean")
    result.outcome.weights.values /= result.outcome.weights.values.mean();

  if (!write) return result;
  {
    auto out = open_output(config, "model.txt", result.files);
    out << header_line(config);
    write_model(out, fitted.model);
  }
  auto out = open_output(config, "regression.csv", result.files);
  out << header_line(config);
  out << "f,log2_sigma_sq,fitted\n";
  for (const auto& p : fitted.points)
    out << format_double(p.order) << ',' << format_double(2.0 * std::log2(p.sigma)) << ','
        << format_double(fitted.model.log2_variance(p.order)) << '\n';
  return result;
}

CoSparsityCurve run_cosparsity(const ExperimentConfig& config, bool write) {
  config.validate();
  const auto data = experiment_dataset(config);
  const auto n = data.frame_length();
  CoSparsityCurve curve;
  curve.orders = config.cosparsity_orders;
  for (double f : curve.orders) {
    const Eigen::MatrixXd d = difference_matrix(f, n);
    std::vector<std::size_t> hist(static_cast<std::size_t>(n) + 1, 0);
    double total = 0.0;
    for (const auto& frame : data.frames) {
      const auto k = co_sparsity(d * frame.samples, config.cosparsity_tol);
      ++hist[static_cast<std::size_t>(k)];
      total += static_cast<double>(k);
    }
    curve.mean.push_back(total / static_cast<double>(data.frames.size()));
    curve.histogram.push_back(std::move(hist));
  }
  if (!write) return curve;

  std::vector<std::filesystem::path> files;
  {
    auto out = open_output(config, "cosparsity_curve.csv", files);
    out << header_line(config);
    out << "order,mean_cosparsity,mean_fraction\n";
    for (std::size_t i = 0; i < curve.orders.size(); ++i)
      out << format_double(curve.orders[i]) << ',' << format_double(curve.mean[i]) << ','
          << format_double(curve.mean[i] / static_cast<double>(n)) << '\n';
  }
  auto out = open_output(config, "cosparsity_hist.csv", files);
  out << header_line(config);
  out << "order,k_co,count\n";
  for (std::size_t i = 0; i < curve.orders.size(); ++i)
    for (std::size_t k = 0; k < curve.histogram[i].size(); ++k)
      out << format_double(curve.orders[i]) << ',' << k << ',' << curve.histogram[i][k] << '\n';
  return curve;
}

std::filesystem::path run_synth(const ExperimentConfig& config, const std::string& format) {
  config.validate();
  if (format != "csv" && format != "binary") throw ConfigError("format must be csv or binary");
  const auto data = experiment_dataset(config);
  std::filesystem::create_directories(config.output);
  const auto path = std::filesystem::path(config.output) / (format == "csv" ? "dataset.csv" : "dataset.bin");
  save_dataset(path, data, format == "csv" ? DatasetFormat::kCsv : DatasetFormat::kRawBinary);
  return path;
}

}  // namespace cosparse
