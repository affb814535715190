#include "cosparse/prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "cosparse/errors.hpp"
#include "cosparse/fracdiff.hpp"
#include "text_fields.hpp"

namespace cosparse {

double OrderVarianceModel::log2_variance(double order) const {
  return std::log2(c) - 2.0 * a * order * order - 2.0 * b * order;
}

double OrderVarianceModel::variance(double order) const {
  return std::exp2(log2_variance(order));
}

double OrderVarianceModel::sigma(double order) const { return std::sqrt(variance(order)); }

double laplace_ml_sigma(std::span<const double> samples) {
  if (samples.empty()) throw DegenerateSigmaError("no samples for sigma estimate");
  double sum = 0.0;
  for (double v : samples) sum += std::abs(v);
  const double mean_abs = sum / static_cast<double>(samples.size());
  if (!(mean_abs > 0.0)) throw DegenerateSigmaError("all pooled coefficients are zero");
  return std::sqrt(2.0) * mean_abs;
}

double estimate_order_sigma(std::span<const Eigen::VectorXd> frames, double order) {
  if (frames.empty()) throw std::invalid_argument("need at least one training frame");
  const Eigen::Index n = frames.front().size();
  const Eigen::MatrixXd d = difference_matrix(order, n);

  std::vector<double> pooled;
  pooled.reserve(frames.size() * static_cast<std::size_t>(n));
  for (const auto& x : frames) {
    if (x.size() != n) throw DimensionMismatchError("training frames differ in length");
    const Eigen::VectorXd z = d * x;
    pooled.insert(pooled.end(), z.data(), z.data() + z.size());
  }
  return laplace_ml_sigma(pooled);
}

OrderVarianceModel fit_variance_model(std::span<const OrderSigma> points) {
  if (points.size() < 3)
    throw UnderdeterminedFitError("variance model needs at least 3 (order, sigma) points");

  const auto k = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(k, 3);
  Eigen::VectorXd target(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    if (!std::isfinite(p.order) || !(p.sigma > 0.0) || !std::isfinite(p.sigma))
      throw std::invalid_argument("sigma points must be finite with sigma > 0");
    design(i, 0) = -2.0 * p.order * p.order;
    design(i, 1) = -2.0 * p.order;
    design(i, 2) = 1.0;
    target(i) = std::log2(p.sigma * p.sigma);
  }

  // Orders are O(1..10); the column-pivoted QR rank test is scale-safe here.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3)
    throw UnderdeterminedFitError("variance model design is rank deficient (need 3 distinct orders)");
  const Eigen::Vector3d theta = qr.solve(target);

  OrderVarianceModel model;
  model.a = theta(0);
  model.b = theta(1);
  model.c = std::exp2(theta(2));
  model.per_order_sigma.assign(points.begin(), points.end());
  const Eigen::VectorXd r = design * theta - target;
  model.residual = std::sqrt(r.squaredNorm() / static_cast<double>(k));
  return model;
}

WeightVector build_weights(const OrderVarianceModel& model, std::span<const double> orders,
                           Eigen::Index n, double clip_ratio) {
  if (!std::isfinite(model.a) || !std::isfinite(model.b) || !std::isfinite(model.c) ||
      !(model.c > 0.0))
    throw std::invalid_argument("variance model parameters must be finite with c > 0");
  if (orders.empty()) throw InvalidOrderSetError("order set is empty");
  if (n < 1) throw InvalidShapeError("frame length must be at least 1");
  if (!(clip_ratio >= 1.0)) throw std::invalid_argument("clip ratio must be >= 1");

  std::vector<double> group(orders.size());
  for (std::size_t g = 0; g < orders.size(); ++g) {
    const double f = orders[g];
    group[g] = std::exp2(model.a * f * f + model.b * f) / std::sqrt(model.c);
  }
  double lo = std::numeric_limits<double>::infinity();
  for (double w : group)
    if (w > 0.0 && std::isfinite(w)) lo = std::min(lo, w);
  if (!std::isfinite(lo)) throw std::invalid_argument("variance model yields no finite weight");
  for (double& w : group) w = std::clamp(w, lo, lo * clip_ratio);

  WeightVector out;
  out.group_count = orders.size();
  out.group_size = n;
  out.values.resize(static_cast<Eigen::Index>(orders.size()) * n);
  for (std::size_t g = 0; g < orders.size(); ++g)
    out.values.segment(static_cast<Eigen::Index>(g) * n, n).setConstant(group[g]);
  return out;
}

WeightVector uniform_weights(std::size_t groups, Eigen::Index n) {
  WeightVector out;
  out.group_count = groups;
  out.group_size = n;
  out.values = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(groups) * n);
  return out;
}

namespace {

std::string join(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += detail::format_double(values[i]);
  }
  return s;
}

}  // namespace

void write_model(std::ostream& out, const OrderVarianceModel& model) {
  std::vector<double> orders, sigmas;
  for (const auto& p : model.per_order_sigma) {
    orders.push_back(p.order);
    sigmas.push_back(p.sigma);
  }
  out << "# order variance model: sigma^2(f) = c * 2^(-2 a f^2 - 2 b f)\n";
  out << "a=" << detail::format_double(model.a) << '\n';
  out << "b=" << detail::format_double(model.b) << '\n';
  out << "c=" << detail::format_double(model.c) << '\n';
  out << "orders=" << join(orders) << '\n';
  out << "sigmas=" << join(sigmas) << '\n';
  out << "residual=" << detail::format_double(model.residual) << '\n';
}

void write_model(const std::filesystem::path& path, const OrderVarianceModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

OrderVarianceModel read_model(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", row);
    kv[std::string(detail::trim(t.substr(0, eq)))] = std::string(detail::trim(t.substr(eq + 1)));
  }
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("missing key '") + key + "'", 0);
    return it->second;
  };
  auto list = [](const std::string& s) {
    std::vector<double> v;
    if (s.empty()) return v;
    for (auto f : detail::split(s)) v.push_back(detail::parse_number<double>(f, 0));
    return v;
  };

  OrderVarianceModel model;
  model.a = detail::parse_number<double>(need("a"), 0);
  model.b = detail::parse_number<double>(need("b"), 0);
  model.c = detail::parse_number<double>(need("c"), 0);
  const auto orders = list(need("orders"));
  const auto sigmas = list(need("sigmas"));
  if (orders.size() != sigmas.size()) throw ParseError("orders and sigmas differ in length", 0);
  for (std::size_t i = 0; i < orders.size(); ++i) model.per_order_sigma.push_back({orders[i], sigmas[i]});
  if (kv.count("residual")) model.residual = detail::parse_number<double>(kv["residual"], 0);
  return model;
}

OrderVarianceModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in);
}

}  // namespace cosparse
