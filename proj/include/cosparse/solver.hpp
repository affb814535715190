#pragma once

#include <optional>

#include <Eigen/Dense>

#include "cosparse/fracdiff.hpp"
#include "cosparse/prior.hpp"
#include "cosparse/sensing.hpp"

namespace cosparse {

struct SolverConfig {
  // Explicit regularization weight. When unset, lambda = sqrt(2)·sigma_e² if a
  // noise hint is given, otherwise lambda_scale·‖Φᵀy‖∞.
  std::optional<double> lambda;
  std::optional<double> noise_sigma_hint;
  double lambda_scale = 0.01;

  // Augmented-Lagrangian penalty and residual balancing (x2 when residuals differ 10x).
  double penalty = 1.0;
  bool adapt_penalty = true;

  double abs_tol = 1e-7;
  double rel_tol = 1e-5;
  int max_iter = 5000;

  void validate() const;
};

struct SolverResult {
  Eigen::VectorXd x_hat;
  // Split variable z ≈ Ωx̂ after the last shrinkage step (exact zeros).
  Eigen::VectorXd z;
  // Scaled multiplier penalty·u; at a solution it lies in λ·w ⊙ ∂‖z‖₁.
  Eigen::VectorXd multiplier;

  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double primal_tolerance = 0.0;
  double dual_tolerance = 0.0;
  double objective = 0.0;
  double lambda = 0.0;
  double penalty = 0.0;
  bool converged = false;
};

double resolve_lambda(const SolverConfig& config, const Eigen::VectorXd& phi_t_y);

// ½‖y − Φx‖² + λ‖diag(w) Ω x‖₁
double analysis_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& phi, const Eigen::MatrixXd& omega,
                          const Eigen::VectorXd& w, double lambda);

/// Weighted analysis ℓ1 solver by alternating direction splitting on z = Ωx:
///
///   x ← (ΦᵀΦ + ρΩᵀΩ)⁻¹ (Φᵀy + ρΩᵀ(z − u))
///   z ← soft(Ωx + u, λw/ρ)
///   u ← u + Ωx − z
///
/// The Cholesky factor for the configured initial penalty is computed once per
/// (Φ, Ω) and shared read-only by every solve; a solve only refactors locally
/// when residual balancing moves the penalty.
class AnalysisL1Solver {
 public:
  AnalysisL1Solver(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& omega,
                   double initial_penalty = 1.0);
  AnalysisL1Solver(const SensingMatrix& phi, const AnalysisDictionary& dict,
                   double initial_penalty = 1.0)
      : AnalysisL1Solver(phi.entries, dict.matrix(), initial_penalty) {}

  SolverResult solve(const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                     const SolverConfig& config) const;

  Eigen::Index m() const noexcept { return phi_.rows(); }
  Eigen::Index n() const noexcept { return phi_.cols(); }
  Eigen::Index l() const noexcept { return omega_.rows(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> factor(double penalty) const;

  Eigen::MatrixXd phi_;
  Eigen::MatrixXd omega_;
  Eigen::MatrixXd gram_phi_;
  Eigen::MatrixXd gram_omega_;
  double cached_penalty_;
  Eigen::LLT<Eigen::MatrixXd> cached_factor_;
};

// min ½‖y − Φx‖² + λ‖diag(w) Ω x‖₁
SolverResult solve_walm(const Eigen::VectorXd& y, const SensingMatrix& phi,
                        const AnalysisDictionary& dict, const WeightVector& w,
                        const SolverConfig& config);

// Uniform-weight special case.
SolverResult solve_al1(const Eigen::VectorXd& y, const SensingMatrix& phi,
                       const AnalysisDictionary& dict, const SolverConfig& config);

struct OptimalityOptions {
  // |(Ωx̂)_i| at or below this is treated as zero (free subgradient). Defaults
  // to 2·primal_residual + 1e-12·(1 + ‖Ωx̂‖∞).
  std::optional<double> zero_tolerance;
  int max_iter = 20000;
};

struct OptimalityReport {
  double objective = 0.0;
  double zero_objective = 0.0;  // objective at x = 0
  // min over admissible g of ‖Φᵀ(Φx̂ − y) + λ Ωᵀ(w ⊙ g)‖₂
  double stationarity_residual = 0.0;
  double gradient_norm = 0.0;  // ‖Φᵀ(Φx̂ − y)‖₂
  double phi_t_y_norm = 0.0;   // ‖Φᵀy‖₂
  Eigen::Index free_count = 0;
  double zero_tolerance = 0.0;
};

OptimalityReport optimality_report(const SolverResult& result, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& phi, const Eigen::MatrixXd& omega,
                                   const Eigen::VectorXd& w,
                                   const OptimalityOptions& options = {});

}  // namespace cosparse
