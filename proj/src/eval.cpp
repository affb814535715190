#include "cosparse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cosparse/errors.hpp"

namespace cosparse {

double prd(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat) {
  if (x.size() != x_hat.size()) throw DimensionMismatchError("prd arguments differ in length");
  const double ref = x.norm();
  if (!(ref > 0.0)) throw UndefinedPrdError("PRD is undefined for a zero reference signal");
  return 100.0 * (x - x_hat).norm() / ref;
}

double good_probability(std::span<const double> prds, double threshold) {
  if (prds.empty()) throw std::invalid_argument("good_probability needs at least one PRD");
  const auto good = std::count_if(prds.begin(), prds.end(), [&](double p) { return p < threshold; });
  return 100.0 * static_cast<double>(good) / static_cast<double>(prds.size());
}

Eigen::Index co_sparsity(const Eigen::VectorXd& z, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("co-sparsity tolerance must be nonnegative");
  if (z.size() == 0) return 0;
  const double cut = tol * z.cwiseAbs().maxCoeff();
  return static_cast<Eigen::Index>((z.array().abs() <= cut).count());
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  return {percentile(values, 0.25), percentile(values, 0.5), percentile(values, 0.75)};
}

ReconstructionReport summarize_reconstruction(std::vector<double> prds, Eigen::Index num_measurements,
                                              double threshold) {
  if (prds.empty()) throw std::invalid_argument("no PRD values to summarize");
  ReconstructionReport r;
  r.num_measurements = num_measurements;
  r.mean_prd = std::accumulate(prds.begin(), prds.end(), 0.0) / static_cast<double>(prds.size());
  r.good_probability = good_probability(prds, threshold);
  r.quartiles = quartiles(prds);
  const auto [lo, hi] = std::minmax_element(prds.begin(), prds.end());
  r.min_prd = *lo;
  r.max_prd = *hi;
  r.per_spike_prd = std::move(prds);
  return r;
}

// ---------------------------------------------------------------------------
// Features

namespace {

Eigen::MatrixXd stack_rows(std::span<const Eigen::VectorXd> frames) {
  if (frames.empty()) throw std::invalid_argument("no frames");
  const Eigen::Index n = frames.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(frames.size()), n);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].size() != n) throw DimensionMismatchError("frames differ in length");
    x.row(static_cast<Eigen::Index>(i)) = frames[i].transpose();
  }
  return x;
}

}  // namespace

PcaModel fit_pca(std::span<const Eigen::VectorXd> frames, Eigen::Index num_components) {
  if (frames.size() < 2) throw std::invalid_argument("PCA needs at least 2 frames");
  const Eigen::MatrixXd x = stack_rows(frames);
  const Eigen::Index n = x.cols();
  if (num_components < 1 || num_components > n)
    throw std::invalid_argument("num_components must be in [1, n]");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("covariance eigendecomposition failed");
  model.eigenvalues = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

  const double top = std::max(model.eigenvalues(0), 0.0);
  const double floor = 1e-12 * std::max(top, std::numeric_limits<double>::min()) + 1e-300;
  model.rank = (model.eigenvalues.array() > floor).count();
  if (top <= 0.0) model.rank = 0;

  model.components = Eigen::MatrixXd::Zero(n, num_components);
  for (Eigen::Index k = 0; k < num_components && k < model.rank; ++k) {
    Eigen::VectorXd v = vectors.col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.col(k) = v;
  }
  return model;
}

Eigen::MatrixXd project(const PcaModel& model, std::span<const Eigen::VectorXd> frames) {
  const Eigen::MatrixXd x = stack_rows(frames);
  if (x.cols() != model.mean.size()) throw DimensionMismatchError("frame length does not match PCA model");
  return (x.rowwise() - model.mean.transpose()) * model.components;
}

Eigen::MatrixXd pca_features(std::span<const Eigen::VectorXd> frames, Eigen::Index num_components) {
  const PcaModel model = fit_pca(frames, num_components);
  if (model.rank < num_components)
    std::cerr << "warning: data rank " << model.rank << " < " << num_components
              << " requested components; padding with zeros\n";
  return project(model, frames);
}

Eigen::MatrixXd haar_features(std::span<const Eigen::VectorXd> frames, Eigen::Index num_features) {
  const Eigen::MatrixXd x = stack_rows(frames);
  Eigen::Index len = 1;
  while (len < x.cols()) len *= 2;
  if (num_features < 1 || num_features > len) throw std::invalid_argument("num_features out of range");

  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(x.rows(), len);
  coeffs.leftCols(x.cols()) = x;
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::VectorXd tmp(len);
  for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
    for (Eigen::Index width = len; width > 1; width /= 2) {
      const Eigen::Index half = width / 2;
      for (Eigen::Index i = 0; i < half; ++i) {
        tmp(i) = s * (coeffs(r, 2 * i) + coeffs(r, 2 * i + 1));
        tmp(half + i) = s * (coeffs(r, 2 * i) - coeffs(r, 2 * i + 1));
      }
      coeffs.row(r).head(width) = tmp.head(width).transpose();
    }
  }

  const Eigen::RowVectorXd mean = coeffs.colwise().mean();
  const Eigen::RowVectorXd var = (coeffs.rowwise() - mean).colwise().squaredNorm();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(len));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return var(a) > var(b); });

  Eigen::MatrixXd out(x.rows(), num_features);
  for (Eigen::Index j = 0; j < num_features; ++j) out.col(j) = coeffs.col(idx[static_cast<std::size_t>(j)]);
  return out;
}

// ---------------------------------------------------------------------------
// Clustering

namespace {

struct KmeansRun {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KmeansRun kmeans_once(const Eigen::MatrixXd& f, int k, std::mt19937_64& rng, int max_iter) {
  const Eigen::Index n = f.rows();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd centers(k, f.cols());

  // k-means++ seeding
  centers.row(0) = f.row(static_cast<Eigen::Index>(unif(rng) * static_cast<double>(n)) % n);
  Eigen::VectorXd d2 = (f.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = unif(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(unif(rng) * static_cast<double>(n)) % n;
    }
    centers.row(c) = f.row(pick);
    d2 = d2.cwiseMin((f.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  KmeansRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  Eigen::VectorXd best_d(n);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (f.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      best_d(i) = bd;
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, f.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = run.labels[static_cast<std::size_t>(i)];
      sums.row(c) += f.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        Eigen::Index far = 0;
        best_d.maxCoeff(&far);
        centers.row(c) = f.row(far);
        best_d(far) = 0.0;
      }
    }
  }
  run.inertia = best_d.sum();
  return run;
}

}  // namespace

std::vector<int> kmeans_classify(const Eigen::MatrixXd& features, int k, int restarts,
                                 std::uint64_t seed, int max_iter) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (features.rows() == 0) throw std::invalid_argument("no feature rows");
  if (k > features.rows()) throw std::invalid_argument("k exceeds number of frames");
  std::mt19937_64 rng(seed);
  KmeansRun best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    KmeansRun run = kmeans_once(features, k, rng, max_iter);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best.labels;
}

ClassificationReport classification_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DimensionMismatchError("label vectors differ in length");
  if (truth.empty()) throw std::invalid_argument("no labels");

  std::map<int, int> tidx, pidx;
  for (int t : truth) tidx.emplace(t, 0);
  for (int p : predicted) pidx.emplace(p, 0);
  const int kt = static_cast<int>(tidx.size()), kp = static_cast<int>(pidx.size());
  const int k = std::max(kt, kp);
  if (k > 6) throw NotSupportedError("classification accuracy supports at most 6 labels, got " + std::to_string(k));
  int next = 0;
  for (auto& [label, i] : tidx) i = next++;
  next = 0;
  for (auto& [label, i] : pidx) i = next++;

  std::vector<std::vector<int>> counts(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++counts[static_cast<std::size_t>(pidx[predicted[i]])][static_cast<std::size_t>(tidx[truth[i]])];

  std::vector<int> perm(static_cast<std::size_t>(k)), best_perm;
  std::iota(perm.begin(), perm.end(), 0);
  int best = -1;
  do {
    int correct = 0;
    for (int p = 0; p < k; ++p) correct += counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(perm[static_cast<std::size_t>(p)])];
    if (correct > best) {
      best = correct;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ClassificationReport report;
  report.accuracy = 100.0 * best / static_cast<double>(truth.size());
  report.confusion.assign(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), 0));
  for (int p = 0; p < k; ++p)
    for (int t = 0; t < k; ++t)
      report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(best_perm[static_cast<std::size_t>(p)])] +=
          counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(t)];
  for (const auto& [label, i] : tidx) report.class_labels.push_back(label);
  return report;
}

std::string to_json(const ReconstructionReport& report) {
  nlohmann::ordered_json j;
  j["num_measurements"] = report.num_measurements;
  j["mean_prd"] = report.mean_prd;
  j["good_probability"] = report.good_probability;
  j["quartiles"] = {{"q25", report.quartiles.q25}, {"median", report.quartiles.median}, {"q75", report.quartiles.q75}};
  j["min_prd"] = report.min_prd;
  j["max_prd"] = report.max_prd;
  j["count"] = report.per_spike_prd.size();
  return j.dump(2);
}

std::string to_json(const ClassificationReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["confusion"] = report.confusion;
  j["class_labels"] = report.class_labels;
  j["features_used"] = report.features_used;
  return j.dump(2);
}

}  // namespace cosparse
