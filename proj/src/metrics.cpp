#include "photodet/metrics.hpp"

#include "photodet/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace photodet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FitParameter param(const LsqResult& r, Eigen::Index k, std::string name) {
    return {std::move(name), r.x(k), r.sigma(k)};
}

std::vector<double> time_grid(double t0, double t1, double per_us) {
    const auto n = static_cast<std::size_t>(std::max(2.0, std::ceil((t1 - t0) * 1e6 * per_us) + 1.0));
    return linspace(t0, t1, n);
}

}  // namespace

double click_probability(double n_bar, double eta) {
    if (!(n_bar >= 0.0)) throw ValidationError("click_probability: n_bar must be >= 0");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("click_probability: eta must lie in [0, 1]");
    return -std::expm1(-eta * n_bar);
}

std::string to_string(Abscissa kind) {
    switch (kind) {
        case Abscissa::photon_number: return "n_bar";
        case Abscissa::pulse_length: return "t_b_s";
        case Abscissa::window: return "t_p_s";
    }
    return "x";
}

void DetectionCurve::validate() const {
    if (x.size() != p_e.size()) throw ValidationError("DetectionCurve: x and p_e differ in length");
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k])) throw ValidationError("DetectionCurve: non-finite abscissa");
        if (k > 0 && !(x[k] > x[k - 1])) throw ValidationError("DetectionCurve: abscissa must increase");
        if (!(p_e[k] >= 0.0 && p_e[k] <= 1.0)) throw ValidationError("DetectionCurve: p_e outside [0, 1]");
    }
}

double FitResult::value(std::string_view name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return p.value;
    }
    throw ValidationError("FitResult: no parameter named " + std::string(name));
}

double FitResult::sigma(std::string_view name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return p.sigma;
    }
    throw ValidationError("FitResult: no parameter named " + std::string(name));
}

FitResult fit_efficiency(const DetectionCurve& curve, double window) {
    curve.validate();
    std::vector<double> u, y;
    for (std::size_t k = 0; k < curve.x.size(); ++k) {
        const double uk = -std::expm1(-curve.x[k]);
        if (uk <= window) {
            u.push_back(uk);
            y.push_back(curve.p_e[k]);
        }
    }
    if (u.size() < 2) throw ValidationError("fit_efficiency: fewer than two points inside the fit window");
    if (*std::max_element(u.begin(), u.end()) - *std::min_element(u.begin(), u.end()) <= 0.0) {
        throw ValidationError("fit_efficiency: degenerate abscissa");
    }

    const auto m = static_cast<Eigen::Index>(u.size());
    const ResidualFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        r.resize(m);
        J.resize(m, 2);
        for (Eigen::Index k = 0; k < m; ++k) {
            r(k) = x(0) + x(1) * u[k] - y[k];
            J(k, 0) = 1.0;
            J(k, 1) = u[k];
        }
    };
    const LsqResult r = levenberg_marquardt(f, Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(0.0, 0.0),
                                            Eigen::Vector2d(1.0, 1.0));
    FitResult out;
    out.model = "p_e = p0 + eta * (1 - exp(-n_bar))";
    out.parameters = {param(r, 0, "p0"), param(r, 1, "eta")};
    out.residual_rms = r.residual_rms;
    out.converged = r.converged;
    if (r.at_bound) out.flags.push_back("parameter at bound");
    return out;
}

DarkCountFit fit_dark_count(std::span<const double> t_p, std::span<const double> p_e) {
    if (t_p.size() != p_e.size()) throw ValidationError("fit_dark_count: t_p and p_e differ in length");
    if (t_p.size() < 4) throw ValidationError("fit_dark_count: need at least four points");
    const auto m = static_cast<Eigen::Index>(t_p.size());
    const double span = *std::max_element(t_p.begin(), t_p.end()) - *std::min_element(t_p.begin(), t_p.end());
    if (!(span > 0.0)) throw ValidationError("fit_dark_count: degenerate abscissa");

    DarkCountFit out;
    {
        const ResidualFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
            r.resize(m);
            J.resize(m, 2);
            for (Eigen::Index k = 0; k < m; ++k) {
                r(k) = x(0) + x(1) * t_p[k] - p_e[k];
                J(k, 0) = 1.0;
                J(k, 1) = t_p[k];
            }
        };
        const LsqResult r = levenberg_marquardt(f, Eigen::Vector2d(p_e[0], 0.0), Eigen::Vector2d(0.0, 0.0),
                                                Eigen::Vector2d(1.0, kInf));
        out.linear.model = "p_e = p0 + gamma_dc * t_p";
        out.linear.parameters = {param(r, 0, "p0"), param(r, 1, "gamma_dc")};
        out.linear.residual_rms = r.residual_rms;
        out.linear.converged = r.converged;
    }

    // Exponential: (p0, p_inf) are linear given T1, so seed T1 by a log scan.
    auto solve_linear = [&](double T1, double& p0, double& pinf) {
        Eigen::MatrixXd A(m, 2);
        Eigen::VectorXd b(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const double e = std::exp(-t_p[k] / T1);
            A(k, 0) = e;
            A(k, 1) = 1.0 - e;
            b(k) = p_e[k];
        }
        const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
        p0 = std::clamp(c(0), 0.0, 1.0);
        pinf = std::clamp(c(1), 0.0, 1.0);
        return (A * Eigen::Vector2d(p0, pinf) - b).squaredNorm();
    };
    double best_T1 = span, best_cost = kInf, p0 = 0.0, pinf = 0.0;
    for (int k = 0; k <= 80; ++k) {
        const double T1 = span * std::pow(10.0, -2.0 + 4.0 * k / 80.0);
        double a = 0.0, b = 0.0;
        const double c = solve_linear(T1, a, b);
        if (c < best_cost) {
            best_cost = c;
            best_T1 = T1;
            p0 = a;
            pinf = b;
        }
    }
    const ResidualFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        r.resize(m);
        J.resize(m, 3);
        for (Eigen::Index k = 0; k < m; ++k) {
            const double e = std::exp(-t_p[k] / x(2));
            r(k) = x(1) + (x(0) - x(1)) * e - p_e[k];
            J(k, 0) = e;
            J(k, 1) = 1.0 - e;
            J(k, 2) = (x(0) - x(1)) * e * t_p[k] / (x(2) * x(2));
        }
    };
    const double T1_min = span * 1e-4, T1_max = span * 1e4;
    const LsqResult r = levenberg_marquardt(f, Eigen::Vector3d(p0, pinf, best_T1), Eigen::Vector3d(0.0, 0.0, T1_min),
                                            Eigen::Vector3d(1.0, 1.0, T1_max));
    out.exponential.model = "p_e = p_inf + (p0 - p_inf) * exp(-t_p / T1)";
    out.exponential.parameters = {param(r, 0, "p0"), param(r, 1, "p_inf"), param(r, 2, "T1")};
    out.exponential.residual_rms = r.residual_rms;
    out.exponential.converged = r.converged;

    const double amplitude = std::abs(r.x(0) - r.x(1));
    const double scale = std::max({std::abs(r.x(0)), std::abs(r.x(1)), 1e-300});
    const bool t1_pinned = r.x(2) <= T1_min * 1.0001 || r.x(2) >= T1_max * 0.9999;
    if (!r.converged || t1_pinned || amplitude <= 1e-9 * scale || !std::isfinite(r.sigma(2))) {
        out.exponential_valid = false;
        out.exponential.converged = false;
        out.exponential.flags.push_back("exponential fit did not converge; use the linear model");
    }
    return out;
}

FitResult fit_decay_rate(std::span<const double> t, std::span<const double> y, double y_high, double y_low) {
    if (t.size() != y.size()) throw ValidationError("fit_decay_rate: t and y differ in length");
    if (!(y_low > 0.0 && y_high > y_low)) throw ValidationError("fit_decay_rate: need 0 < y_low < y_high");
    std::vector<double> ts, ls;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (y[k] >= y_low && y[k] <= y_high) {
            ts.push_back(t[k]);
            ls.push_back(std::log(y[k]));
        }
    }
    if (ts.size() < 3) throw ValidationError("fit_decay_rate: fewer than three samples inside the window");
    const auto m = static_cast<Eigen::Index>(ts.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        A(k, 0) = 1.0;
        A(k, 1) = -ts[k];
        b(k) = ls[k];
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd r = A * c - b;
    FitResult out;
    out.model = "ln y = ln A - rate * t";
    double s2 = m > 2 ? r.squaredNorm() / static_cast<double>(m - 2) : 0.0;
    const Eigen::Matrix2d cov = (A.transpose() * A).inverse() * s2;
    out.parameters = {{"log_amplitude", c(0), std::sqrt(cov(0, 0))}, {"rate", c(1), std::sqrt(cov(1, 1))}};
    out.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(m));
    return out;
}

double duty_cycle_efficiency(double eta, double t_p, double t_cycle) {
    if (!(t_cycle > 0.0)) throw ValidationError("duty_cycle_efficiency: t_cycle must be > 0");
    if (!(t_p >= 0.0 && t_p <= t_cycle)) throw ValidationError("duty_cycle_efficiency: need 0 <= t_p <= t_cycle");
    return eta * t_p / t_cycle;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::ideal: return "ideal";
        case Regime::infinite_bandwidth: return "infinite_bandwidth";
        case Regime::no_decay: return "no_decay";
        case Regime::measured: return "measured";
    }
    return "unknown";
}

Pulse pump_turn_on(double ramp) {
    if (!(ramp > 0.0)) return Pulse::constant(1.0);
    // tanh edge centred at ramp/2 with width ramp/6: s(0) = 0.0025, s(ramp) = 0.9975.
    return Pulse{1.0, 0.5 * ramp, kInf, ramp / 6.0};
}

double pulse_click_probability(const CircuitParams& p, Regime regime, double t_b, double n_bar,
                               const PulseSweepOptions& options) {
    if (!(t_b > 0.0)) throw ValidationError("pulse_click_probability: t_b must be > 0");
    if (!(n_bar >= 0.0)) throw ValidationError("pulse_click_probability: n_bar must be >= 0");
    const Pulse input{std::sqrt(n_bar / t_b), 0.0, t_b, 0.0};
    const Pulse pump = pump_turn_on(options.pump_ramp);

    std::vector<double> grid = time_grid(0.0, t_b, options.samples_per_us);
    if (options.readout_delay > 0.0) {
        const std::vector<double> tail = time_grid(t_b, t_b + options.readout_delay, options.samples_per_us);
        grid.insert(grid.end(), tail.begin() + 1, tail.end());
    }
    StepControl control;
    control.store_states = false;

    if (regime == Regime::ideal || regime == Regime::infinite_bandwidth) {
        const ModeLayout layout = ModeLayout::single("qubit", 2);
        const Operator sigma = annihilation(layout, "qubit");
        const double knl = kappa_nl_in_use(p);
        const double kb = p.kappa_b;
        // The ideal curve has no pump rise either: it is the flat closed-form efficiency.
        const Envelope s = regime == Regime::ideal ? envelopes::constant(1.0) : pump.envelope();
        const Envelope b_in = input.envelope();
        LindbladGenerator gen(Operator::zero(layout));
        gen.add_collapse(1.0, sigma.adjoint(), "absorption",
                         [=](double t) { return efficiency(knl * std::norm(s(t)), kb) * std::norm(b_in(t)); });
        if (regime == Regime::infinite_bandwidth) gen.add_collapse(p.kappa_q, sigma, "kappa_q");
        const Trajectory tr =
            evolve(gen, DensityMatrix::fock(layout, {0}), grid, {{"pe", sigma.adjoint() * sigma}}, control);
        return std::clamp(tr.observable("pe").back().real(), 0.0, 1.0);
    }

    ReducedModelFlags flags;
    if (regime == Regime::no_decay) flags.qubit_decay = false;
    const LindbladGenerator gen = build_reduced_model(p, input, flags, pump);
    const DetectorOperators ops = detector_operators(gen.layout());
    const Trajectory tr = evolve(gen, DensityMatrix::fock(gen.layout(), {0, 0}), grid, {{"pe", ops.excited}}, control);
    return std::clamp(tr.observable("pe").back().real(), 0.0, 1.0);
}

double pulse_efficiency(const CircuitParams& p, Regime regime, double t_b, const PulseSweepOptions& options) {
    DetectionCurve curve;
    curve.kind = Abscissa::photon_number;
    std::vector<double> n_bars = options.n_bars;
    std::sort(n_bars.begin(), n_bars.end());
    for (double n : n_bars) {
        curve.x.push_back(n);
        curve.p_e.push_back(pulse_click_probability(p, regime, t_b, n, options));
    }
    return fit_efficiency(curve, 1.0).value("eta");
}

std::vector<DetectionCurve> efficiency_vs_pulse_length(const CircuitParams& p, std::span<const Regime> regimes,
                                                       std::span<const double> t_b_grid,
                                                       const PulseSweepOptions& options) {
    std::vector<DetectionCurve> curves;
    for (Regime regime : regimes) {
        DetectionCurve c;
        c.kind = Abscissa::pulse_length;
        c.label = to_string(regime);
        for (double t_b : t_b_grid) {
            c.x.push_back(t_b);
            c.p_e.push_back(pulse_efficiency(p, regime, t_b, options));
        }
        c.validate();
        curves.push_back(std::move(c));
    }
    return curves;
}

double buffer_fock_click_probability(const CircuitParams& p, int n, double t_final) {
    if (n < 0 || n >= p.buffer_dim) throw ValidationError("buffer_fock_click_probability: n outside the buffer space");
    if (!(t_final > 0.0)) throw ValidationError("buffer_fock_click_probability: t_final must be > 0");
    const LindbladGenerator gen = build_full_model(p);
    const DetectorOperators ops = detector_operators(gen.layout());
    StepControl control;
    control.store_states = false;
    const Trajectory tr = evolve(gen, DensityMatrix::fock(gen.layout(), {n, 0, 0}),
                                 time_grid(0.0, t_final, 10.0), {{"pe", ops.excited}}, control);
    return tr.observable("pe").back().real();
}

FockCoherentReport fock_coherent_equivalence(const CircuitParams& p, double epsilon, double t_final) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("fock_coherent_equivalence: epsilon in [0, 1]");
    FockCoherentReport r;
    r.epsilon = epsilon;
    std::vector<double> pn;
    double weight_sum = 0.0, weighted = 0.0, w = std::exp(-epsilon);
    for (int n = 0; n < p.buffer_dim; ++n) {
        if (n > 0) w *= epsilon / n;
        if (n > 1 && w < 1e-12) break;
        pn.push_back(buffer_fock_click_probability(p, n, t_final));
        weight_sum += w;
        weighted += w * pn.back();
    }
    r.p_fock = (1.0 - epsilon) * pn[0] + epsilon * pn[1];
    r.p_coherent = weighted / weight_sum;
    r.difference = r.p_coherent - r.p_fock;
    return r;
}

}  // namespace photodet
