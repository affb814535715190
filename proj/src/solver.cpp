#include "cosparse/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cosparse/errors.hpp"

namespace cosparse {

namespace {

constexpr double kBalanceRatio = 10.0;
constexpr double kBalanceFactor = 2.0;
constexpr int kMaxPenaltyUpdates = 64;

void soft_threshold(const Eigen::VectorXd& v, const Eigen::VectorXd& thresh, Eigen::VectorXd& out) {
  out = v.cwiseSign().cwiseProduct((v.cwiseAbs() - thresh).cwiseMax(0.0));
}

}  // namespace

void SolverConfig::validate() const {
  if (lambda && !(*lambda > 0.0 && std::isfinite(*lambda)))
    throw std::invalid_argument("lambda must be positive and finite");
  if (noise_sigma_hint && !(*noise_sigma_hint >= 0.0))
    throw std::invalid_argument("noise sigma hint must be nonnegative");
  if (!(lambda_scale > 0.0)) throw std::invalid_argument("lambda_scale must be positive");
  if (!(penalty > 0.0 && std::isfinite(penalty))) throw std::invalid_argument("penalty must be positive");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

double resolve_lambda(const SolverConfig& config, const Eigen::VectorXd& phi_t_y) {
  if (config.lambda) return *config.lambda;
  if (config.noise_sigma_hint && *config.noise_sigma_hint > 0.0)
    return std::sqrt(2.0) * *config.noise_sigma_hint * *config.noise_sigma_hint;
  const double scale = phi_t_y.size() ? phi_t_y.cwiseAbs().maxCoeff() : 0.0;
  // y = 0 has the unique solution x = 0 for any lambda.
  return scale > 0.0 ? config.lambda_scale * scale : 1.0;
}

double analysis_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& phi, const Eigen::MatrixXd& omega,
                          const Eigen::VectorXd& w, double lambda) {
  const double fit = 0.5 * (y - phi * x).squaredNorm();
  const double reg = (omega * x).cwiseAbs().cwiseProduct(w).sum();
  return fit + lambda * reg;
}

AnalysisL1Solver::AnalysisL1Solver(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& omega,
                                   double initial_penalty)
    : phi_(phi), omega_(omega), cached_penalty_(initial_penalty) {
  if (phi_.cols() != omega_.cols()) {
    std::ostringstream msg;
    msg << "sensing matrix has " << phi_.cols() << " columns but dictionary has " << omega_.cols();
    throw DimensionMismatchError(msg.str());
  }
  if (!(initial_penalty > 0.0)) throw std::invalid_argument("penalty must be positive");
  gram_phi_ = phi_.transpose() * phi_;
  gram_omega_ = omega_.transpose() * omega_;
  cached_factor_ = factor(cached_penalty_);
}

Eigen::LLT<Eigen::MatrixXd> AnalysisL1Solver::factor(double penalty) const {
  Eigen::LLT<Eigen::MatrixXd> llt(gram_phi_ + penalty * gram_omega_);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ΦᵀΦ + ρΩᵀΩ is not positive definite; stack Φ and Ω must have full column rank");
  return llt;
}

SolverResult AnalysisL1Solver::solve(const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                                     const SolverConfig& config) const {
  config.validate();
  if (y.size() != m()) throw DimensionMismatchError("measurement length does not match Φ");
  if (weights.size() != l()) throw DimensionMismatchError("weight length does not match Ω rows");
  if (!(weights.array() > 0.0).all() || !weights.allFinite())
    throw std::invalid_argument("weights must be positive and finite");

  const Eigen::VectorXd phi_t_y = phi_.transpose() * y;
  const double lambda = resolve_lambda(config, phi_t_y);
  double rho = config.penalty;

  // Local factor only if the starting penalty differs from the shared one.
  std::optional<Eigen::LLT<Eigen::MatrixXd>> local;
  if (rho != cached_penalty_) local = factor(rho);
  auto solve_x = [&](const Eigen::VectorXd& rhs) {
    return local ? local->solve(rhs) : cached_factor_.solve(rhs);
  };

  const Eigen::Index n_ = n(), l_ = l();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(l_);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(l_);
  Eigen::VectorXd z_old(l_), omega_x(l_), thresh(l_), rhs(n_);
  const double sqrt_l = std::sqrt(static_cast<double>(l_));
  const double sqrt_n = std::sqrt(static_cast<double>(n_));

  SolverResult result;
  int penalty_updates = 0;
  int it = 0;
  thresh = (lambda / rho) * weights;
  for (it = 1; it <= config.max_iter; ++it) {
    rhs.noalias() = omega_.transpose() * (z - u);
    rhs = phi_t_y + rho * rhs;
    x = solve_x(rhs);
    omega_x.noalias() = omega_ * x;

    z_old.swap(z);
    soft_threshold(omega_x + u, thresh, z);
    u += omega_x - z;

    const double r_norm = (omega_x - z).norm();
    const double s_norm = rho * (omega_.transpose() * (z - z_old)).norm();
    const double eps_pri = sqrt_l * config.abs_tol + config.rel_tol * std::max(omega_x.norm(), z.norm());
    const double eps_dual = sqrt_n * config.abs_tol + config.rel_tol * rho * (omega_.transpose() * u).norm();

    result.primal_residual = r_norm;
    result.dual_residual = s_norm;
    result.primal_tolerance = eps_pri;
    result.dual_tolerance = eps_dual;
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      result.converged = true;
      break;
    }

    if (config.adapt_penalty && penalty_updates < kMaxPenaltyUpdates) {
      double next = rho;
      if (r_norm > kBalanceRatio * s_norm) next = rho * kBalanceFactor;
      else if (s_norm > kBalanceRatio * r_norm) next = rho / kBalanceFactor;
      if (next != rho) {
        u *= rho / next;  // keeps ρu fixed
        rho = next;
        thresh = (lambda / rho) * weights;
        local = factor(rho);
        ++penalty_updates;
      }
    }
  }

  result.iterations = std::min(it, config.max_iter);
  result.x_hat = std::move(x);
  result.z = std::move(z);
  result.multiplier = rho * u;
  result.lambda = lambda;
  result.penalty = rho;
  result.objective = analysis_objective(result.x_hat, y, phi_, omega_, weights, lambda);
  return result;
}

SolverResult solve_walm(const Eigen::VectorXd& y, const SensingMatrix& phi,
                        const AnalysisDictionary& dict, const WeightVector& w,
                        const SolverConfig& config) {
  return AnalysisL1Solver(phi, dict, config.penalty).solve(y, w.values, config);
}

SolverResult solve_al1(const Eigen::VectorXd& y, const SensingMatrix& phi,
                       const AnalysisDictionary& dict, const SolverConfig& config) {
  return AnalysisL1Solver(phi, dict, config.penalty)
      .solve(y, Eigen::VectorXd::Ones(dict.rows()), config);
}

OptimalityReport optimality_report(const SolverResult& result, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& phi, const Eigen::MatrixXd& omega,
                                   const Eigen::VectorXd& w, const OptimalityOptions& options) {
  const Eigen::VectorXd& x = result.x_hat;
  if (phi.cols() != x.size() || omega.cols() != x.size() || phi.rows() != y.size() ||
      omega.rows() != w.size())
    throw DimensionMismatchError("optimality report inputs are inconsistent");
  const double lambda = result.lambda;

  OptimalityReport report;
  report.objective = analysis_objective(x, y, phi, omega, w, lambda);
  report.zero_objective = 0.5 * y.squaredNorm();
  report.phi_t_y_norm = (phi.transpose() * y).norm();

  const Eigen::VectorXd omega_x = omega * x;
  const Eigen::VectorXd grad = phi.transpose() * (phi * x - y);
  report.gradient_norm = grad.norm();
  const double tol = options.zero_tolerance.value_or(
      2.0 * result.primal_residual + 1e-12 * (1.0 + omega_x.cwiseAbs().maxCoeff()));
  report.zero_tolerance = tol;

  // Fixed part from the sign of clearly nonzero coefficients.
  std::vector<Eigen::Index> free;
  Eigen::VectorXd fixed_g = Eigen::VectorXd::Zero(omega.rows());
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    if (std::abs(omega_x(i)) <= tol) free.push_back(i);
    else fixed_g(i) = omega_x(i) > 0.0 ? 1.0 : -1.0;
  }
  report.free_count = static_cast<Eigen::Index>(free.size());
  const Eigen::VectorXd r0 = grad + lambda * omega.transpose() * w.cwiseProduct(fixed_g);
  if (free.empty()) {
    report.stationarity_residual = r0.norm();
    return report;
  }

  // Box-constrained least squares over the free subgradients, by FISTA.
  const auto k = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd a(x.size(), k);
  Eigen::VectorXd g(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index i = free[static_cast<std::size_t>(j)];
    a.col(j) = lambda * w(i) * omega.row(i).transpose();
    double start = 0.0;
    if (result.multiplier.size() == omega.rows()) start = result.multiplier(i) / (lambda * w(i));
    g(j) = std::clamp(start, -1.0, 1.0);
  }
  const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                               a * a.transpose(), Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .maxCoeff();
  double best = (r0 + a * g).norm();
  if (lipschitz > 0.0) {
    Eigen::VectorXd g_prev = g, v = g;
    double t = 1.0;
    for (int it = 0; it < options.max_iter; ++it) {
      const Eigen::VectorXd res = r0 + a * v;
      g_prev.swap(g);
      g = (v - a.transpose() * res / lipschitz).cwiseMax(-1.0).cwiseMin(1.0);
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      v = g + ((t - 1.0) / t_next) * (g - g_prev);
      t = t_next;
      if (it % 16 == 0) {
        best = std::min(best, (r0 + a * g).norm());
        if ((g - g_prev).lpNorm<Eigen::Infinity>() < 1e-15) break;
      }
    }
    best = std::min(best, (r0 + a * g).norm());
  }
  report.stationarity_residual = best;
  return report;
}

}  // namespace cosparse
