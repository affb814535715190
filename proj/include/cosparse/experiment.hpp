#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cosparse/eval.hpp"
#include "cosparse/prior.hpp"
#include "cosparse/signal.hpp"
#include "cosparse/solver.hpp"

namespace cosparse {

// Reconstruction methods understood by the runners.
//   walm  weighted AL1 over the MFOD dictionary (trained or loaded weights)
//   al1   uniform-weight AL1 over the MFOD dictionary
//   miod  AL1 over the integer-order stack miod_orders
//   iod   AL1 over the single order iod_order
//   rtf   AL1 over a random tight frame with rtf_redundancy·n rows
inline const std::vector<std::string> kKnownMethods = {"walm", "al1", "miod", "iod", "rtf"};

struct ExperimentConfig {
  // Data: a file when `dataset` is set, otherwise the synthetic generator.
  std::string dataset;
  std::string dataset_format = "auto";  // auto | csv | binary
  int units = 3;
  int frames_per_unit = 100;
  int frame_length = 128;
  double data_noise = 0.0;
  std::uint64_t data_seed = 7;
  double jitter = 2.0;
  double scale_spread = 0.1;
  int pre_peak = 40;

  // Dictionaries and methods.
  std::vector<double> orders = {3.5, 4.0, 4.5};
  std::vector<double> miod_orders = {3.0, 4.0, 5.0};
  double iod_order = 4.0;
  int rtf_redundancy = 3;
  std::vector<std::string> methods = {"walm", "al1"};

  // Protocol.
  std::vector<int> measurements = {16, 24, 32, 40, 48, 56, 64, 72, 80};
  int trials = 20;
  std::uint64_t seed = 1;
  double measurement_noise = 0.0;
  int eval_count = 0;  // 0: every frame not used for training

  // Solver.
  std::optional<double> lambda;
  double lambda_scale = 0.01;
  std::optional<double> noise_hint;
  double penalty = 1.0;
  bool adapt_penalty = true;
  double abs_tol = 1e-7;
  double rel_tol = 1e-5;
  int max_iter = 5000;

  // Training.
  int train_count = 100;
  std::vector<double> train_orders;  // empty: use `orders`
  std::string model;                 // existing model file; skips training when set
  double clip_ratio = kDefaultClipRatio;
  std::string weight_normalization = "mean";  // mean | none

  // Classification.
  int classify_m = 16;
  int features = 10;
  std::string feature_kind = "pca";  // pca | haar
  int restarts = 10;

  // Co-sparsity curves.
  std::vector<double> cosparsity_orders = {0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5, 5.5, 6};
  double cosparsity_tol = kDefaultCoSparsityTolerance;

  // Execution; neither affects results.
  std::string output = "out";
  int threads = 0;  // 0: runtime default

  // Assigns one key from its text form. Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  // Canonical key=value pairs in a fixed order (execution keys last).
  std::vector<std::pair<std::string, std::string>> pairs() const;
  // Throws ConfigError when a value violates a module precondition.
  void validate() const;

  SolverConfig solver() const;
};

// Every key accepted by ExperimentConfig::set, in canonical order.
const std::vector<std::string>& config_keys();

// Flat "key = value" text; '#' starts a comment.
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_config_text(ExperimentConfig& config, const std::string& text);

// FNV-1a 64 over the canonical pairs, excluding output and threads. Hex string.
std::string config_hash(const ExperimentConfig& config);

// Derived per-task seed from the master seed and a tagged index tuple (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Loaded or synthesized dataset for the config.
Dataset experiment_dataset(const ExperimentConfig& config);

// Frames [0, train_count) train the prior; the following eval_count (or all
// remaining) frames are evaluated.
struct DataSplit {
  std::vector<Eigen::VectorXd> train;
  std::vector<Eigen::VectorXd> eval;
  std::vector<int> eval_labels;  // empty when unlabeled
};
DataSplit split_dataset(const Dataset& data, const ExperimentConfig& config);

struct TrainingOutcome {
  OrderVarianceModel model;
  WeightVector weights;  // for `orders`, clipped and normalized per config
};

// Fits the model on the training frames (or loads config.model) and builds WALM weights.
TrainingOutcome train_prior(const ExperimentConfig& config, const std::vector<Eigen::VectorXd>& train,
                            Eigen::Index n);

struct MethodSweep {
  std::string method;
  std::vector<ReconstructionReport> pooled;   // one per M, pooled over trials and spikes
  std::vector<double> trial_mean_good;        // per M, mean over trials of per-trial good-probability
  std::vector<double> mean_iterations;
  std::vector<double> converged_fraction;
};

struct SweepResult {
  std::vector<int> measurements;
  std::vector<MethodSweep> methods;
  std::vector<std::filesystem::path> files;
};

// Runs every enabled method at every M and trial. When write is true, emits
// sweep_<method>.csv and sweep_manifest.json into config.output.
SweepResult run_sweep(const ExperimentConfig& config, bool write = true);

struct ClassificationOutcome {
  std::string method;  // "original" for the uncompressed upper bound
  ClassificationReport report;
  double mean_prd = 0.0;
  Eigen::MatrixXd features;
  std::vector<int> clusters;
};

struct ClassificationResult {
  std::vector<ClassificationOutcome> outcomes;
  std::vector<std::filesystem::path> files;
};

// Reconstructs the evaluation frames at classify_m (trial 0 matrix), extracts
// features, clusters with k = number of true units. Writes classification.csv,
// classification.json and scatter_<method>.csv.
ClassificationResult run_classification(const ExperimentConfig& config, bool write = true);

struct TrainingResult {
  TrainingOutcome outcome;
  std::vector<OrderSigma> regression_points;
  std::vector<std::filesystem::path> files;
};

// Writes model.txt and regression.csv (f, log2_sigma_sq, fitted).
TrainingResult run_training(const ExperimentConfig& config, bool write = true);

struct CoSparsityCurve {
  std::vector<double> orders;
  std::vector<double> mean;                      // mean k_co per order
  std::vector<std::vector<std::size_t>> histogram;  // [order][k_co] frame counts, k_co in 0..n
};

// Co-sparsity of every frame under each single-order difference matrix.
// Writes cosparsity_curve.csv and cosparsity_hist.csv.
CoSparsityCurve run_cosparsity(const ExperimentConfig& config, bool write = true);

// Writes the dataset for `synth` as dataset.csv or dataset.bin.
std::filesystem::path run_synth(const ExperimentConfig& config, const std::string& format);

}  // namespace cosparse
