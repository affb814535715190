#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <json.hpp>

#include "cosparse/errors.hpp"
#include "cosparse/eval.hpp"
#include "cosparse/fracdiff.hpp"
#include "oracles.hpp"

using namespace cosparse;

TEST_CASE("prd examples") {
  const Eigen::Vector2d x(3.0, 4.0);
  CHECK(prd(x, x) == 0.0);
  CHECK(prd(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(100.0));
  CHECK(prd(x, Eigen::Vector2d(3.0, 0.0)) == doctest::Approx(80.0));
}

TEST_CASE("prd errors and scale invariance") {
  CHECK_THROWS_AS(prd(Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, 0.0)), UndefinedPrdError);
  CHECK_THROWS_AS(prd(Eigen::Vector2d(1.0, 0.0), Eigen::Vector3d::Zero()), DimensionMismatchError);
  const Eigen::VectorXd x = oracle::gaussian_vector(20, 1);
  const Eigen::VectorXd xh = x + 0.1 * oracle::gaussian_vector(20, 2);
  for (double a : {-2.0, 0.001, 7.5}) CHECK(prd(a * x, a * xh) == doctest::Approx(prd(x, xh)).epsilon(1e-12));
}

TEST_CASE("good probability") {
  const std::vector<double> a = {3.0, 7.0, 4.0};
  CHECK(std::abs(good_probability(a) - 66.7) <= 0.05);
  const std::vector<double> b = {0.1, 4.9};
  CHECK(good_probability(b) == 100.0);
  const std::vector<double> c = {5.0};
  CHECK(good_probability(c) == 0.0);  // strictly below the threshold
  CHECK_THROWS(good_probability(std::span<const double>{}));
}

TEST_CASE("good probability is monotone in the threshold") {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(0.2);
  std::vector<double> prds(500);
  for (auto& p : prds) p = e(rng);
  double last = -1.0;
  for (double t = 0.0; t <= 30.0; t += 0.5) {
    const double g = good_probability(prds, t);
    CHECK(g >= last);
    last = g;
  }
}

TEST_CASE("co-sparsity") {
  CHECK(co_sparsity(Eigen::Vector4d(0, 0, 1, 0), 0.0) == 3);
  CHECK(co_sparsity(Eigen::Vector3d(1, -2, 3), 0.0) == 0);
  CHECK(co_sparsity(Eigen::Vector3d(1e-4, -2, 3), 1e-3) == 1);
  CHECK(co_sparsity(Eigen::VectorXd::Zero(5), 0.0) == 5);
  CHECK_THROWS(co_sparsity(Eigen::Vector3d(1, 2, 3), -1.0));

  const Eigen::VectorXd z = difference_matrix(1.0, 16) * Eigen::VectorXd::Constant(16, 2.5);
  CHECK(co_sparsity(z, 0.0) == 15);

  Eigen::VectorXd r = oracle::gaussian_vector(40, 7);
  r.head(13).setZero();
  const auto nnz = (r.array() != 0.0).count();
  CHECK(co_sparsity(r, 0.0) + nnz == 40);
}

TEST_CASE("percentiles and quartiles") {
  const std::vector<double> v = {4.0, 1.0, 3.0, 2.0, 5.0};
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 5.0);
  CHECK(percentile(v, 0.5) == 3.0);
  CHECK(percentile(v, 0.25) == 2.0);
  const std::vector<double> w = {1.0, 2.0};
  CHECK(percentile(w, 0.5) == 1.5);
  const auto q = quartiles(v);
  CHECK(q.q25 <= q.median);
  CHECK(q.median <= q.q75);
}

TEST_CASE("reconstruction summary and json") {
  const auto r = summarize_reconstruction({1.0, 2.0, 9.0, 4.0}, 32);
  CHECK(r.mean_prd == 4.0);
  CHECK(r.good_probability == 75.0);
  CHECK(r.min_prd == 1.0);
  CHECK(r.max_prd == 9.0);
  CHECK(r.num_measurements == 32);
  CHECK(r.quartiles.q25 <= r.quartiles.median);

  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j.at("mean_prd").get<double>() == 4.0);
  CHECK(j.at("good_probability").get<double>() == 75.0);
  CHECK(j.at("quartiles").contains("q25"));
  CHECK(j.at("quartiles").contains("median"));
  CHECK(j.at("quartiles").contains("q75"));
}

TEST_CASE("pca: collinear frames") {
  const Eigen::VectorXd dir = oracle::gaussian_vector(16, 4).normalized();
  std::vector<Eigen::VectorXd> frames;
  for (int i = 0; i < 30; ++i) frames.push_back((i - 10.0) * 0.3 * dir);
  const auto model = fit_pca(frames, 4);
  CHECK(model.rank == 1);
  CHECK(model.eigenvalues(0) / model.eigenvalues.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const auto f = project(model, frames);
  CHECK(f.rightCols(3).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(f.col(0).cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("pca: full projection is invertible") {
  std::vector<Eigen::VectorXd> frames;
  for (std::uint64_t s = 0; s < 40; ++s) frames.push_back(oracle::gaussian_vector(12, s));
  const auto model = fit_pca(frames, 12);
  const auto f = project(model, frames);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::VectorXd back = model.mean + model.components * f.row(static_cast<Eigen::Index>(i)).transpose();
    CHECK((back - frames[i]).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("pca: eigenvalues match an independent Jacobi solver") {
  const Eigen::MatrixXd data = oracle::gaussian_matrix(200, 128, 99);
  std::vector<Eigen::VectorXd> frames;
  for (Eigen::Index r = 0; r < data.rows(); ++r) frames.push_back(data.row(r).transpose());
  const auto model = fit_pca(frames, 10);

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd c = data.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / 199.0;
  const auto ref = oracle::jacobi_eigenvalues(cov);
  for (std::size_t i = 0; i < ref.size(); ++i)
    CHECK(std::abs(model.eigenvalues(static_cast<Eigen::Index>(i)) - ref[i]) <= 1e-8);
}

TEST_CASE("pca: sign convention and descending order") {
  std::vector<Eigen::VectorXd> frames;
  for (std::uint64_t s = 0; s < 50; ++s) frames.push_back(oracle::gaussian_vector(8, 300 + s));
  const auto model = fit_pca(frames, 5);
  for (Eigen::Index k = 0; k + 1 < model.eigenvalues.size(); ++k)
    CHECK(model.eigenvalues(k) >= model.eigenvalues(k + 1));
  for (Eigen::Index k = 0; k < 5; ++k) {
    Eigen::Index arg = 0;
    model.components.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(model.components(arg, k) > 0.0);
  }
}

TEST_CASE("pca: degenerate frames pad with zeros") {
  std::vector<Eigen::VectorXd> frames(5, Eigen::VectorXd::Ones(6));
  const auto f = pca_features(frames, 3);
  CHECK(f.rows() == 5);
  CHECK(f.cols() == 3);
  CHECK(f.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(pca_features(std::vector<Eigen::VectorXd>(1, Eigen::VectorXd::Ones(6)), 2));
}

TEST_CASE("haar features pick high-variance coefficients") {
  std::vector<Eigen::VectorXd> frames;
  for (std::uint64_t s = 0; s < 20; ++s) frames.push_back(oracle::gaussian_vector(10, s));
  const auto f = haar_features(frames, 4);
  CHECK(f.rows() == 20);
  CHECK(f.cols() == 4);
  for (Eigen::Index j = 0; j + 1 < 4; ++j) {
    const double v0 = (f.col(j).array() - f.col(j).mean()).square().sum();
    const double v1 = (f.col(j + 1).array() - f.col(j + 1).mean()).square().sum();
    CHECK(v0 >= v1);
  }
}

namespace {

Eigen::MatrixXd blobs(int per, std::uint64_t seed, std::vector<int>& truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  const Eigen::Vector2d centers[] = {{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}};
  Eigen::MatrixXd f(3 * per, 2);
  truth.clear();
  for (int i = 0; i < 3 * per; ++i) {
    const int c = i % 3;
    f(i, 0) = centers[c](0) + g(rng);
    f(i, 1) = centers[c](1) + g(rng);
    truth.push_back(c);
  }
  return f;
}

}  // namespace

TEST_CASE("kmeans: separated blobs") {
  std::vector<int> truth;
  const auto f = blobs(40, 1, truth);
  const auto labels = kmeans_classify(f, 3, 5, 7);
  CHECK(classification_accuracy(labels, truth).accuracy == 100.0);
  CHECK(std::set<int>(labels.begin(), labels.end()).size() == 3);
}

TEST_CASE("kmeans: one cluster and errors") {
  std::vector<int> truth;
  const auto f = blobs(5, 2, truth);
  const auto labels = kmeans_classify(f, 1, 2, 1);
  CHECK(std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; }));
  CHECK_THROWS(kmeans_classify(f, 16, 1, 1));
  CHECK_THROWS(kmeans_classify(f, 0, 1, 1));
}

TEST_CASE("kmeans: deterministic and consistent on duplicated data") {
  std::vector<int> truth;
  const auto f = blobs(20, 3, truth);
  Eigen::MatrixXd twice(2 * f.rows(), f.cols());
  twice << f, f;
  const auto a = kmeans_classify(twice, 3, 4, 11);
  const auto b = kmeans_classify(twice, 3, 4, 11);
  CHECK(a == b);
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    CHECK(a[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(i + f.rows())]);
}

TEST_CASE("accuracy: identity, relabeling and confusion") {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 2};
  CHECK(classification_accuracy(truth, truth).accuracy == 100.0);
  const std::vector<int> renamed = {7, 7, 3, 3, 5, 5, 5};
  const auto r = classification_accuracy(renamed, truth);
  CHECK(r.accuracy == 100.0);
  const std::vector<int> noisy = {0, 1, 1, 1, 2, 2, 0};
  const auto n = classification_accuracy(noisy, truth);
  int trace = 0;
  for (std::size_t i = 0; i < n.confusion.size(); ++i) {
    trace += n.confusion[i][i];
    int row = 0;
    for (int c : n.confusion[i]) row += c;
    CHECK(row == static_cast<int>(std::count(truth.begin(), truth.end(), n.class_labels[i])));
  }
  CHECK(n.accuracy == doctest::Approx(100.0 * trace / 7.0));
  CHECK(n.accuracy == doctest::Approx(100.0 * 5.0 / 7.0));
}

TEST_CASE("accuracy: invariant under permutations of predicted names") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> u(0, 3);
  std::vector<int> truth(200), pred(200);
  for (auto& t : truth) t = u(rng);
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = (i % 5 == 0) ? u(rng) : truth[i];
  const double base = classification_accuracy(pred, truth).accuracy;
  std::vector<int> perm = {0, 1, 2, 3};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<int> p2;
    for (int p : pred) p2.push_back(perm[static_cast<std::size_t>(p)]);
    CHECK(classification_accuracy(p2, truth).accuracy == base);
  }
}

TEST_CASE("accuracy: random guessing over three classes") {
  // Averaged over draws; a single draw is biased up by the best permutation.
  std::uniform_int_distribution<int> u(0, 2);
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> truth(3000), pred(3000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth[i] = static_cast<int>(i % 3);
      pred[i] = u(rng);
    }
    const double acc = classification_accuracy(pred, truth).accuracy;
    CHECK(acc >= 33.3 - 3.0);
    sum += acc;
  }
  CHECK(std::abs(sum / 20.0 - 33.3) <= 3.0);
}

TEST_CASE("accuracy: too many labels") {
  std::vector<int> truth = {0, 1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(classification_accuracy(truth, truth), NotSupportedError);
  CHECK_THROWS_AS(classification_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), DimensionMismatchError);
}

TEST_CASE("classification json fields") {
  const std::vector<int> truth = {0, 1, 1};
  auto r = classification_accuracy(truth, truth);
  r.features_used = 10;
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j.at("accuracy").get<double>() == 100.0);
  CHECK(j.at("confusion").size() == 2);
  CHECK(j.at("features_used").get<int>() == 10);
}
