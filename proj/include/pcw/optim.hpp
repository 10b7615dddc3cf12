#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace pcw::optim {

struct NelderMeadOptions {
    int max_evaluations = 4000;
    double ftol_abs = 1e-9;
    double ftol_rel = 1e-10;
    double xtol = 1e-9;
    // After convergence the simplex is rebuilt around the best point this many
    // times; guards against premature collapse on ridges.
    int reinitializations = 2;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double initial_value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

// Derivative-free simplex minimization. `step` sets the initial simplex edge per coordinate.
NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& options = {});

struct LeastSquaresOptions {
    int max_iterations = 200;
    double ftol_rel = 1e-12;
    double xtol_rel = 1e-12;
    double initial_lambda = 1e-3;
};

struct LeastSquaresResult {
    Eigen::VectorXd x;
    double cost = 0.0;         // 0.5 * ||r||^2
    double initial_cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Box-constrained Levenberg-Marquardt (steps are projected onto [lower, upper]).
// Without a Jacobian callback a forward-difference Jacobian is used.
LeastSquaresResult levenberg_marquardt(const ResidualFn& residual, const std::optional<JacobianFn>& jacobian,
                                       const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                       const Eigen::VectorXd& upper, const LeastSquaresOptions& options = {});

} // namespace pcw::optim
