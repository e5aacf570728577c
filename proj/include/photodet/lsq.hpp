// lsq.hpp: small bounded Levenberg-Marquardt solver used by the fits.

#pragma once

#include <Eigen/Dense>

#include <functional>

namespace photodet {

// Fills residuals r (size m) and Jacobian J (m x n) at parameters x.
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J)>;

struct LsqOptions {
    int max_iterations = 500;
    double xtol = 1e-14;  // relative step size
    double ftol = 1e-16;  // relative cost decrease
};

struct LsqResult {
    Eigen::VectorXd x;
    Eigen::VectorXd sigma;  // sqrt(diag((J^T J)^-1) * SSR/(m - n)); zeros when m <= n
    double cost = 0.0;      // sum of squared residuals
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    bool at_bound = false;
};

// Projected LM: each trial step is clipped to [lower, upper].
LsqResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const LsqOptions& options = {});

}  // namespace photodet
