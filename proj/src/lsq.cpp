#include "photodet/lsq.hpp"

#include <cmath>
#include <limits>

namespace photodet {

LsqResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const LsqOptions& options) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = x0.cwiseMax(lower).cwiseMin(upper);
    Eigen::VectorXd r, r_trial;
    Eigen::MatrixXd J, J_trial;
    f(x, r, J);
    double cost = r.squaredNorm();
    double lambda = 1e-3;

    LsqResult out;
    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() == 0.0) {
            out.converged = true;
            break;
        }
        bool improved = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd M = A;
            for (Eigen::Index k = 0; k < n; ++k) M(k, k) += lambda * std::max(A(k, k), 1e-300);
            const Eigen::VectorXd step = M.ldlt().solve(-g);
            const Eigen::VectorXd x_trial = (x + step).cwiseMax(lower).cwiseMin(upper);
            f(x_trial, r_trial, J_trial);
            const double c_trial = r_trial.squaredNorm();
            if (std::isfinite(c_trial) && c_trial <= cost) {
                const double dx = (x_trial - x).norm();
                const double dc = cost - c_trial;
                x = x_trial;
                r.swap(r_trial);
                J.swap(J_trial);
                const double old = cost;
                cost = c_trial;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (dx <= options.xtol * (x.norm() + options.xtol) || dc <= options.ftol * old) out.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
        if (!improved) {
            // No descent direction left within the bounds: a (local) minimum.
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }

    out.x = x;
    out.cost = cost;
    const Eigen::Index m = r.size();
    out.residual_rms = m > 0 ? std::sqrt(cost / static_cast<double>(m)) : 0.0;
    out.sigma = Eigen::VectorXd::Zero(n);
    if (m > n) {
        const double s2 = cost / static_cast<double>(m - n);
        const Eigen::MatrixXd A = J.transpose() * J;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
        const Eigen::MatrixXd cov = cod.pseudoInverse() * s2;
        for (Eigen::Index k = 0; k < n; ++k) out.sigma(k) = std::sqrt(std::max(0.0, cov(k, k)));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        if (x(k) <= lower(k) || x(k) >= upper(k)) out.at_bound = true;
    }
    return out;
}

}  // namespace photodet
