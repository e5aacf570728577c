#include "photodet/tomography.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace photodet {

namespace {

constexpr double kPi = 3.14159265358979323846;

int idx(int n, int m) { return n * 5 + m; }

void require_moment(int n, int m) {
    if (!MomentTable::in_range(n, m)) throw ValidationError("MomentTable: index outside n + m <= 4");
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void require_single_mode(const DensityMatrix& rho, const char* what) {
    if (rho.layout().size() != 1) throw ValidationError(std::string(what) + ": state must be single-mode");
}

Matrix power(const Matrix& a, int k) {
    Matrix r = Matrix::Identity(a.rows(), a.cols());
    for (int i = 0; i < k; ++i) r = r * a;
    return r;
}

// Fresh distribution per draw: std::normal_distribution caches a spare
// variate, which would otherwise leak between traces.
cplx complex_gaussian(std::mt19937_64& rng, double variance) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * variance));
    const double re = g(rng);
    const double im = g(rng);
    return {re, im};
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

TemporalMode TemporalMode::from(const Vector& samples) {
    const double norm = samples.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("TemporalMode: zero or non-finite samples");
    Vector f = samples / norm;
    Eigen::Index k = 0;
    f.cwiseAbs().maxCoeff(&k);
    f *= std::conj(f(k)) / std::abs(f(k));
    f(k) = std::abs(f(k));
    return {f};
}

double mode_overlap(const TemporalMode& a, const TemporalMode& b) {
    if (a.size() != b.size()) throw ValidationError("mode_overlap: length mismatch");
    return std::norm(a.f.dot(b.f));
}

TemporalMode emission_mode(int n_samples, double sample_period, double kappa, double detuning) {
    if (n_samples < 1) throw ValidationError("emission_mode: need at least one sample");
    Vector f(n_samples);
    for (int j = 0; j < n_samples; ++j) {
        const double t = j * sample_period;
        f(j) = std::exp(cplx{-0.5 * kappa * t, detuning * t});
    }
    return TemporalMode::from(f);
}

// ---------------------------------------------------------------------------

QSampler::QSampler(const DensityMatrix& rho) : rho_(rho.matrix()), dim_(static_cast<int>(rho.matrix().rows())) {
    require_single_mode(rho, "QSampler");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
    lambda_max_ = std::max(es.eigenvalues().maxCoeff(), 1e-300);

    // <alpha|rho|alpha> <= lambda_max B(r), B(r) = e^{-r^2} sum_{n<dim} r^{2n}/n!.
    // Ratio to a Gaussian proposal of variance s2: s2 B(r) e^{r^2/s2}.
    auto log_b = [&](double r2) {
        double term = 0.0, acc = 1.0, logt = 0.0;
        for (int n = 1; n < dim_; ++n) {
            logt += std::log(r2) - std::log(static_cast<double>(n));
            term = std::exp(logt);
            acc += term;
        }
        return -r2 + std::log(acc);
    };
    double best = std::numeric_limits<double>::infinity();
    for (double s2 : {1.5, 2.0, 3.0, 4.0, 6.0}) {
        const double r2_max = 4.0 * dim_ / (1.0 - 1.0 / s2) + 25.0;
        double sup = 0.0;
        for (int k = 0; k <= 4000; ++k) {
            const double r2 = r2_max * k / 4000.0;
            sup = std::max(sup, log_b(r2) + r2 / s2);
        }
        const double m = s2 * std::exp(sup) * 1.0001;
        if (m < best) {
            best = m;
            sigma2_ = s2;
        }
    }
    bound_ = lambda_max_ * best;
}

cplx QSampler::operator()(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int attempt = 0; attempt < 1000000; ++attempt) {
        const cplx alpha = complex_gaussian(rng, sigma2_);
        const Vector c = coherent_amplitudes(alpha, dim_);
        const double q = std::max(0.0, (c.adjoint() * rho_ * c)(0, 0).real());
        const double accept = q * sigma2_ / (bound_ * std::exp(-std::norm(alpha) / sigma2_));
        if (uni(rng) < accept) return alpha;
    }
    throw NumericalError("QSampler: rejection sampling exceeded 10^6 attempts");
}

TraceEnsemble generate_traces(const DensityMatrix& rho, const TemporalMode& mode, const TraceOptions& options) {
    require_single_mode(rho, "generate_traces");
    if (!(options.gain > 0.0)) throw ValidationError("generate_traces: gain must be > 0");
    if (!(options.noise_quanta >= 0.0)) throw ValidationError("generate_traces: noise_quanta must be >= 0");
    if (options.n_traces < 1) throw ValidationError("generate_traces: need at least one trace");
    if (std::abs(mode.f.norm() - 1.0) > 1e-10) throw ValidationError("generate_traces: mode must be normalized");

    const QSampler sampler(rho);
    const Eigen::Index n_samples = mode.size();
    TraceEnsemble ens;
    ens.sample_period = options.sample_period;
    ens.seed = options.seed;
    ens.traces.resize(options.n_traces, n_samples);
    const double amp = std::sqrt(options.gain);
    const double nh = options.noise_quanta;

    auto fill = [&](int begin, int end) {
        Vector w(n_samples);
        for (int k = begin; k < end; ++k) {
            std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(static_cast<std::uint64_t>(k) + 1)));
            const cplx s = sampler(rng) + (nh > 0.0 ? complex_gaussian(rng, nh) : cplx{});
            for (Eigen::Index j = 0; j < n_samples; ++j) w(j) = complex_gaussian(rng, 1.0 + nh);
            w -= mode.f * mode.f.dot(w);
            ens.traces.row(k) = (amp * (s * mode.f + w)).transpose();
        }
    };

    const int threads = std::min(resolve_threads(options.threads), options.n_traces);
    if (threads <= 1) {
        fill(0, options.n_traces);
        return ens;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex mu;
    const int chunk = (options.n_traces + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int b = t * chunk, e = std::min(options.n_traces, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, b, e] {
            try {
                fill(b, e);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return ens;
}

ModeExtraction extract_mode(const TraceEnsemble& ensemble) {
    if (ensemble.n_traces() < 2) throw ValidationError("extract_mode: need at least two traces");
    const Matrix& z = ensemble.traces;
    Matrix r = (z.transpose() * z.conjugate()) / static_cast<double>(z.rows());
    r = 0.5 * (r + r.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(r);
    if (es.info() != Eigen::Success) throw NumericalError("extract_mode: eigen-decomposition failed");
    const Eigen::Index n = r.rows();
    ModeExtraction out;
    out.mode = TemporalMode::from(es.eigenvectors().col(n - 1));
    out.spectrum = es.eigenvalues().reverse();
    Eigen::VectorXd sorted = es.eigenvalues();
    const double median = n % 2 ? sorted(n / 2) : 0.5 * (sorted(n / 2 - 1) + sorted(n / 2));
    out.top_excess = out.spectrum(0) / median - 1.0;
    return out;
}

std::vector<cplx> project(const Matrix& traces, const TemporalMode& mode) {
    if (traces.cols() != mode.size()) throw ValidationError("project: mode length differs from trace length");
    const Vector s = traces * mode.f.conjugate();
    return {s.data(), s.data() + s.size()};
}

std::vector<cplx> project(const TraceEnsemble& ensemble, const TemporalMode& mode) {
    return project(ensemble.traces, mode);
}

// ---------------------------------------------------------------------------

std::string to_string(MomentStage stage) {
    switch (stage) {
        case MomentStage::raw: return "raw";
        case MomentStage::noise: return "noise";
        case MomentStage::signal: return "signal";
        case MomentStage::model: return "model";
    }
    return "unknown";
}

cplx& MomentTable::at(int n, int m) {
    require_moment(n, m);
    return values[idx(n, m)];
}

const cplx& MomentTable::at(int n, int m) const {
    require_moment(n, m);
    return values[idx(n, m)];
}

double& MomentTable::sigma(int n, int m) {
    require_moment(n, m);
    return sigmas[idx(n, m)];
}

double MomentTable::sigma(int n, int m) const {
    require_moment(n, m);
    return sigmas[idx(n, m)];
}

double MomentTable::hermiticity_defect() const {
    double d = 0.0;
    for (int n = 0; n <= kOrder; ++n) {
        for (int m = 0; n + m <= kOrder; ++m) d = std::max(d, std::abs(at(n, m) - std::conj(at(m, n))));
    }
    return d;
}

MomentTable raw_moments(std::span<const cplx> samples, int blocks) {
    const auto n_samples = static_cast<long long>(samples.size());
    if (n_samples < 1) throw ValidationError("raw_moments: no samples");
    const int b = static_cast<int>(std::clamp<long long>(blocks, 1, n_samples));

    std::vector<std::array<cplx, 25>> block_sums(b);
    std::vector<long long> block_count(b);
    for (int k = 0; k < b; ++k) {
        const long long begin = n_samples * k / b, end = n_samples * (k + 1) / b;
        block_count[k] = end - begin;
        auto& acc = block_sums[k];
        acc.fill(cplx{});
        for (long long i = begin; i < end; ++i) {
            const cplx s = samples[static_cast<std::size_t>(i)];
            cplx sp[5], cp[5];
            sp[0] = cp[0] = 1.0;
            for (int p = 1; p <= 4; ++p) {
                sp[p] = sp[p - 1] * s;
                cp[p] = cp[p - 1] * std::conj(s);
            }
            for (int n = 0; n <= 4; ++n) {
                for (int m = 0; n + m <= 4; ++m) acc[idx(n, m)] += cp[n] * sp[m];
            }
        }
    }

    MomentTable t;
    t.stage = MomentStage::raw;
    std::array<cplx, 25> total{};
    for (int k = 0; k < b; ++k) {
        for (int i = 0; i < 25; ++i) total[i] += block_sums[k][i];
    }
    const double N = static_cast<double>(n_samples);
    for (int i = 0; i < 25; ++i) t.values[i] = total[i] / N;
    if (b >= 2) {
        for (int i = 0; i < 25; ++i) {
            std::vector<cplx> loo(b);
            cplx mean{};
            for (int k = 0; k < b; ++k) {
                loo[k] = (total[i] - block_sums[k][i]) / (N - static_cast<double>(block_count[k]));
                mean += loo[k];
            }
            mean /= static_cast<double>(b);
            double var = 0.0;
            for (int k = 0; k < b; ++k) var += std::norm(loo[k] - mean);
            t.sigmas[i] = std::sqrt(var * (b - 1) / b);
        }
    }
    t.at(0, 0) = 1.0;
    t.sigma(0, 0) = 0.0;
    return t;
}

MomentTable state_moments(const DensityMatrix& rho) {
    require_single_mode(rho, "state_moments");
    const Matrix a = lowering(static_cast<int>(rho.matrix().rows()));
    const Matrix ad = a.adjoint();
    MomentTable t;
    t.stage = MomentStage::model;
    for (int n = 0; n <= 4; ++n) {
        for (int m = 0; n + m <= 4; ++m) t.at(n, m) = (rho.matrix() * power(ad, n) * power(a, m)).trace();
    }
    t.at(0, 0) = 1.0;
    return t;
}

GainCalibration calibrate_gain(std::span<const MomentTable> tables, std::span<const cplx> amplitudes) {
    if (tables.size() != amplitudes.size()) throw ValidationError("calibrate_gain: tables and amplitudes differ");
    double denom = 0.0;
    cplx num{};
    double var = 0.0;
    int distinct = 0;
    for (std::size_t k = 0; k < tables.size(); ++k) {
        const double a2 = std::norm(amplitudes[k]);
        if (a2 > 0.0) ++distinct;
        denom += a2;
        num += std::conj(amplitudes[k]) * tables[k].at(0, 1);
        var += a2 * tables[k].sigma(0, 1) * tables[k].sigma(0, 1);
    }
    if (!(denom > 0.0)) throw ValidationError("calibrate_gain: all amplitudes are zero");
    if (tables.size() < 2) throw ValidationError("calibrate_gain: need at least two calibration runs");
    GainCalibration g;
    g.slope = num / denom;
    g.gain = std::norm(g.slope);
    g.sigma = 2.0 * std::abs(g.slope) * std::sqrt(var) / denom;
    return g;
}

MomentTable noise_moments(const MomentTable& vacuum_raw, double gain) {
    if (!(gain > 0.0)) throw ValidationError("noise_moments: gain must be > 0");
    MomentTable t;
    t.stage = MomentStage::noise;
    t.gain = gain;
    for (int n = 0; n <= 4; ++n) {
        for (int m = 0; n + m <= 4; ++m) {
            const double scale = std::pow(gain, -0.5 * (n + m));
            t.at(n, m) = vacuum_raw.at(n, m) * scale;
            t.sigma(n, m) = vacuum_raw.sigma(n, m) * scale;
        }
    }
    t.at(0, 0) = 1.0;
    t.sigma(0, 0) = 0.0;
    return t;
}

MomentTable noise_moments(const TraceEnsemble& vacuum, const TemporalMode& mode, double gain, int blocks) {
    const std::vector<cplx> s = project(vacuum, mode);
    return noise_moments(raw_moments(s, blocks), gain);
}

MomentTable invert_moments(const MomentTable& raw, const MomentTable& noise, double gain) {
    if (!(gain > 0.0)) throw ValidationError("invert_moments: gain must be > 0");
    MomentTable sig;
    sig.stage = MomentStage::signal;
    sig.gain = gain;
    for (int order = 0; order <= MomentTable::kOrder; ++order) {
        for (int n = 0; n <= order; ++n) {
            const int m = order - n;
            const double scale = std::pow(gain, -0.5 * order);
            cplx v = raw.at(n, m) * scale;
            double var = std::pow(raw.sigma(n, m) * scale, 2);
            for (int i = 0; i <= n; ++i) {
                for (int j = 0; j <= m; ++j) {
                    if (i == n && j == m) continue;
                    const double c = binomial(n, i) * binomial(m, j);
                    const cplx h = noise.at(n - i, m - j);
                    v -= c * sig.at(i, j) * h;
                    var += c * c * (std::norm(h) * std::pow(sig.sigma(i, j), 2) +
                                    std::norm(sig.at(i, j)) * std::pow(noise.sigma(n - i, m - j), 2));
                }
            }
            sig.at(n, m) = v;
            sig.sigma(n, m) = std::sqrt(var);
        }
    }
    return sig;
}

MomentTable compose_moments(const MomentTable& signal, const MomentTable& noise, double gain) {
    if (!(gain > 0.0)) throw ValidationError("compose_moments: gain must be > 0");
    MomentTable raw;
    raw.stage = MomentStage::raw;
    raw.gain = gain;
    for (int n = 0; n <= 4; ++n) {
        for (int m = 0; n + m <= 4; ++m) {
            cplx v{};
            for (int i = 0; i <= n; ++i) {
                for (int j = 0; j <= m; ++j) v += binomial(n, i) * binomial(m, j) * signal.at(i, j) * noise.at(n - i, m - j);
            }
            raw.at(n, m) = v * std::pow(gain, 0.5 * (n + m));
        }
    }
    return raw;
}

// ---------------------------------------------------------------------------

MleObjective::MleObjective(const MomentTable& target, int n_fock) : n_(n_fock) {
    if (n_fock < 3) throw ValidationError("mle_reconstruct: N_fock must be >= 3");
    const Matrix a = lowering(n_fock);
    const Matrix ad = a.adjoint();
    for (int n = 0; n <= 4; ++n) {
        for (int m = 0; n + m <= 4; ++m) {
            if (n + m == 0) continue;
            const cplx t = target.at(n, m);
            if (!std::isfinite(t.real()) || !std::isfinite(t.imag())) {
                throw ValidationError("mle_reconstruct: non-finite target moment");
            }
            ops_.push_back({{n, m}, power(ad, n) * power(a, m)});
            target_.push_back(t);
        }
    }
}

Matrix MleObjective::unpack(const Eigen::VectorXd& x) const {
    Matrix T = Matrix::Zero(n_, n_);
    Eigen::Index k = 0;
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j <= i; ++j) T(i, j) = x(k++);
    }
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < i; ++j) T(i, j) += cplx{0.0, x(k++)};
    }
    return T;
}

Eigen::VectorXd MleObjective::pack(const Matrix& T) const {
    Eigen::VectorXd x(parameter_count());
    Eigen::Index k = 0;
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j <= i; ++j) x(k++) = T(i, j).real();
    }
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < i; ++j) x(k++) = T(i, j).imag();
    }
    return x;
}

Matrix MleObjective::density(const Eigen::VectorXd& x) const {
    const Matrix T = unpack(x);
    const Matrix g = T.adjoint() * T;
    return g / g.trace().real();
}

double MleObjective::value(const Eigen::VectorXd& x) const {
    const Matrix rho = density(x);
    double d = 0.0;
    for (std::size_t k = 0; k < ops_.size(); ++k) d += std::norm((rho * ops_[k].second).trace() - target_[k]);
    return d;
}

double MleObjective::value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    const Matrix T = unpack(x);
    const Matrix g = T.adjoint() * T;
    const double tau = g.trace().real();
    const Matrix rho = g / tau;
    Matrix K = Matrix::Zero(n_, n_);
    double d = 0.0;
    for (std::size_t k = 0; k < ops_.size(); ++k) {
        const cplx dk = (rho * ops_[k].second).trace() - target_[k];
        d += std::norm(dk);
        K += std::conj(dk) * ops_[k].second;
    }
    const double re_tr = (rho * K).trace().real();
    const Matrix W = ((K + K.adjoint()) * T.adjoint() - 2.0 * re_tr * T.adjoint()) / tau;
    grad.resize(parameter_count());
    Eigen::Index k = 0;
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j <= i; ++j) grad(k++) = 2.0 * W(j, i).real();
    }
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < i; ++j) grad(k++) = -2.0 * W(j, i).imag();
    }
    return d;
}

namespace {

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    bool converged = false;
};

BfgsResult bfgs(const MleObjective& obj, Eigen::VectorXd x, const MleOptions& options) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd g, g_new;
    double f = obj.value_and_gradient(x, g);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool first = true;
    BfgsResult out;
    for (int it = 0; it < options.max_iterations; ++it) {
        if (f <= 1e-30 || g.norm() <= 1e-300) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd p = -H * g;
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            H.setIdentity();
            p = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        Eigen::VectorXd x_new;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * p;
            f_new = obj.value_and_gradient(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            out.converged = true;  // no further descent available numerically
            break;
        }
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-300) {
            if (first) {
                H *= sy / y.squaredNorm();
                first = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
        }
        const double improvement = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        if (improvement <= options.relative_tol * f) {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    out.value = f;
    return out;
}

}  // namespace

ReconstructedState mle_reconstruct(const MomentTable& signal, int n_fock, const std::vector<NamedState>& targets,
                                   const MleOptions& options) {
    const MleObjective obj(signal, n_fock);
    const ModeLayout layout = field_layout(n_fock);
    std::mt19937_64 rng(splitmix64(options.seed));
    std::normal_distribution<double> normal(0.0, 1.0);

    BfgsResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
        Eigen::VectorXd x0;
        if (r == 0) {
            x0 = obj.pack(Matrix::Identity(n_fock, n_fock));
        } else {
            x0.resize(obj.parameter_count());
            for (Eigen::Index k = 0; k < x0.size(); ++k) x0(k) = normal(rng);
        }
        const BfgsResult res = bfgs(obj, x0, options);
        any_converged = any_converged || res.converged;
        if (res.value < best.value) best = res;
    }

    Matrix rho = obj.density(best.x);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    ReconstructedState out{DensityMatrix::normalized(layout, rho), best.value, any_converged && best.converged, {}};
    for (const auto& t : targets) out.fidelities.emplace_back(t.name, fidelity(out.rho, t.rho));
    return out;
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.matrix().rows() != sigma.matrix().rows()) throw ValidationError("fidelity: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix());
    const Eigen::VectorXd sq = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix root = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().adjoint();
    Matrix m = root * sigma.matrix() * root;
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> em(m, Eigen::EigenvaluesOnly);
    const double tr = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return std::min(1.0, tr * tr);
}

// ---------------------------------------------------------------------------

ModeLayout field_layout(int dim) { return ModeLayout::single("field", dim); }

DensityMatrix fock_state(int dim, int n) {
    if (n < 0 || n >= dim) throw ValidationError("fock_state: n outside the truncated space");
    return DensityMatrix::fock(field_layout(dim), {n});
}

DensityMatrix thermal_state(int dim, double n_bar) {
    if (!(n_bar >= 0.0)) throw ValidationError("thermal_state: n_bar must be >= 0");
    Matrix m = Matrix::Zero(dim, dim);
    const double q = n_bar / (1.0 + n_bar);
    double p = 1.0;
    for (int n = 0; n < dim; ++n) {
        m(n, n) = p;
        p *= q;
    }
    return DensityMatrix::normalized(field_layout(dim), m);
}

DensityMatrix field_coherent_state(int dim, cplx alpha) { return coherent_state(field_layout(dim), "field", alpha); }

DensityMatrix named_state(std::string_view name, int dim) {
    auto number_after = [&](std::size_t pos) {
        const std::string s(name.substr(pos));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw ValidationError("unknown state '" + std::string(name) + "'");
        return v;
    };
    if (name == "vacuum") return fock_state(dim, 0);
    if (name.starts_with("fock")) {
        const double n = number_after(4);
        if (n != std::floor(n)) throw ValidationError("unknown state '" + std::string(name) + "'");
        return fock_state(dim, static_cast<int>(n));
    }
    if (name.starts_with("coherent:")) return field_coherent_state(dim, number_after(9));
    if (name.starts_with("thermal:")) return thermal_state(dim, number_after(8));
    throw ValidationError("unknown state '" + std::string(name) + "' (vacuum, fock<n>, coherent:<a>, thermal:<n>)");
}

std::vector<double> wigner(const DensityMatrix& rho, std::span<const cplx> points) {
    require_single_mode(rho, "wigner");
    const Matrix& r = rho.matrix();
    const int dim = static_cast<int>(r.rows());
    std::vector<double> out;
    out.reserve(points.size());
    for (const cplx alpha : points) {
        if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
            throw ValidationError("wigner: non-finite grid point");
        }
        const double x = 4.0 * std::norm(alpha);
        const double gauss = std::exp(-2.0 * std::norm(alpha));
        double w = 0.0;
        for (int n = 0; n < dim; ++n) {
            for (int m = n; m < dim; ++m) {
                // W_{|m><n|}(alpha) for m >= n.
                const int k = m - n;
                const double pref = (n % 2 ? -1.0 : 1.0) *
                                    std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)));
                const cplx term = pref * std::pow(2.0 * std::conj(alpha), k) *
                                  std::assoc_laguerre(static_cast<unsigned>(n), static_cast<unsigned>(k), x);
                if (k == 0) {
                    w += r(n, n).real() * term.real();
                } else {
                    w += 2.0 * (r(m, n) * term).real();
                }
            }
        }
        out.push_back(2.0 / kPi * gauss * w);
    }
    return out;
}

bool wigner_truncation_warning(const DensityMatrix& rho, std::span<const cplx> points) {
    const double limit = rho.matrix().rows() / 4.0;
    return std::any_of(points.begin(), points.end(), [&](cplx a) { return std::norm(a) > limit; });
}

// ---------------------------------------------------------------------------

RoundtripResult tomography_roundtrip(const std::vector<std::string>& state_names, const RoundtripOptions& options) {
    RoundtripResult out;
    out.true_mode = emission_mode(options.n_samples, options.traces.sample_period, options.mode_kappa,
                                  options.mode_detuning);
    const int gdim = options.generation_dim;
    auto run = [&](const DensityMatrix& rho, std::uint64_t salt) {
        TraceOptions t = options.traces;
        t.seed = splitmix64(options.traces.seed + salt);
        return generate_traces(rho, out.true_mode, t);
    };

    out.herald = extract_mode(run(fock_state(gdim, 1), 1));
    const TemporalMode& mode = out.herald.mode;
    out.mode_overlap = mode_overlap(mode, out.true_mode);

    std::vector<MomentTable> cal;
    std::vector<cplx> amps;
    for (std::size_t k = 0; k < options.calibration_amplitudes.size(); ++k) {
        const double a = options.calibration_amplitudes[k];
        cal.push_back(raw_moments(project(run(field_coherent_state(gdim, a), 10 + k), mode)));
        amps.push_back(a);
    }
    out.gain = calibrate_gain(cal, amps);
    out.noise = noise_moments(run(fock_state(gdim, 0), 2), mode, out.gain.gain);

    for (std::size_t k = 0; k < state_names.size(); ++k) {
        const std::string& name = state_names[k];
        const TraceEnsemble ens = run(named_state(name, gdim), 100 + k);
        MomentTable raw = raw_moments(project(ens, mode));
        raw.gain = out.gain.gain;
        const MomentTable signal = invert_moments(raw, out.noise, out.gain.gain);
        ReconstructedState rec =
            mle_reconstruct(signal, options.n_fock, {{name, named_state(name, options.n_fock)}}, options.mle);
        const double f = rec.fidelities.front().second;
        const double own = mode_overlap(extract_mode(ens).mode, out.true_mode);
        out.states.push_back({name, raw, signal, std::move(rec), f, own});
    }
    return out;
}

}  // namespace photodet
