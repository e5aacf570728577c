// Seeded random instances for property tests.

#pragma once

#include "photodet/hilbert.hpp"

#include <random>

namespace photodet::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    cplx normal_c() {
        std::normal_distribution<double> n;
        return {n(rng_), n(rng_)};
    }

    Matrix matrix(Eigen::Index dim) {
        Matrix m(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = normal_c();
        }
        return m;
    }

    // Ginibre-ensemble mixed state; rank between 1 and dim.
    DensityMatrix density(const ModeLayout& layout) {
        const Eigen::Index d = layout.total_dim();
        const int rank = integer(1, static_cast<int>(d));
        Matrix g(d, rank);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (int j = 0; j < rank; ++j) g(i, j) = normal_c();
        }
        return DensityMatrix::normalized(layout, g * g.adjoint());
    }

    Operator op(const ModeLayout& layout) { return {layout, matrix(layout.total_dim())}; }

    // One to three modes, dims in [2, 4].
    ModeLayout layout() {
        const int n = integer(1, 3);
        std::vector<Mode> modes;
        for (int k = 0; k < n; ++k) modes.push_back({"m" + std::to_string(k), integer(2, 4)});
        return ModeLayout(modes);
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace photodet::testing
