#include "photodet/lindblad.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace photodet {

namespace envelopes {

Envelope constant(cplx value) {
    return [value](double) { return value; };
}

Envelope smooth_rect(cplx value, double t_on, double t_off, double ramp) {
    if (ramp <= 0.0) {
        return [=](double t) { return (t >= t_on && t < t_off) ? value : cplx{}; };
    }
    return [=](double t) {
        return value * (0.5 * (std::tanh((t - t_on) / ramp) - std::tanh((t - t_off) / ramp)));
    };
}

}  // namespace envelopes

LindbladGenerator::LindbladGenerator(Operator hamiltonian) : hamiltonian_(std::move(hamiltonian)) {}

LindbladGenerator& LindbladGenerator::add_hamiltonian(const Operator& h) {
    hamiltonian_ = hamiltonian_ + h;
    return *this;
}

LindbladGenerator& LindbladGenerator::add_collapse(double rate, Operator op, std::string label,
                                                   RateModulation modulation) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw ValidationError("add_collapse: rate must be finite and >= 0 (" + label + ")");
    }
    require_same_layout(layout(), op.layout(), "add_collapse");
    collapses_.push_back({rate, std::move(op), std::move(label), std::move(modulation)});
    return *this;
}

LindbladGenerator& LindbladGenerator::add_drive(Envelope envelope, Operator coupling, std::string label) {
    if (!envelope) throw ValidationError("add_drive: empty envelope");
    require_same_layout(layout(), coupling.layout(), "add_drive");
    drives_.push_back({std::move(envelope), std::move(coupling), std::move(label)});
    return *this;
}

Matrix LindbladGenerator::hamiltonian_at(double t) const {
    Matrix h = hamiltonian_.matrix();
    for (const auto& d : drives_) {
        const cplx e = d.envelope(t);
        h += e * d.coupling.matrix() + std::conj(e) * d.coupling.matrix().adjoint();
    }
    return h;
}

double LindbladGenerator::rate_at(const Collapse& c, double t) const {
    return c.modulation ? c.rate * c.modulation(t) : c.rate;
}

// --------------------------------------------------------------------------

Matrix dissipator_apply(const Matrix& op, const Matrix& rho) {
    const Matrix ldl = op.adjoint() * op;
    return op * rho * op.adjoint() - 0.5 * (ldl * rho + rho * ldl);
}

Matrix dissipator_apply(const Operator& op, const DensityMatrix& rho) {
    require_same_layout(op.layout(), rho.layout(), "dissipator_apply");
    return dissipator_apply(op.matrix(), rho.matrix());
}

Matrix rhs(const LindbladGenerator& generator, double t, const Matrix& rho) {
    if (rho.rows() != generator.layout().total_dim()) throw ValidationError("rhs: dimension mismatch");
    const Matrix h = generator.hamiltonian_at(t);
    const cplx i{0.0, 1.0};
    Matrix out = -i * (h * rho - rho * h);
    for (const auto& c : generator.collapses()) {
        const double k = generator.rate_at(c, t);
        if (k != 0.0) out += k * dissipator_apply(c.op.matrix(), rho);
    }
    return out;
}

Matrix rhs(const LindbladGenerator& generator, double t, const DensityMatrix& rho) {
    require_same_layout(generator.layout(), rho.layout(), "rhs");
    return rhs(generator, t, rho.matrix());
}

// --------------------------------------------------------------------------

namespace {

// Nonzero entries of an operator in column-major order. Detector operators
// carry about one entry per column, so explicit loops beat general sparse
// products by a wide margin at these sizes.
struct Entry {
    Eigen::Index row, col;
    cplx v;
};

// acc += a * b without the NaN-recovery path of std::complex multiplication.
inline void fma_c(cplx& acc, cplx a, cplx b) {
    acc = {acc.real() + a.real() * b.real() - a.imag() * b.imag(), acc.imag() + a.real() * b.imag() + a.imag() * b.real()};
}

std::vector<Entry> entries_of(const Matrix& m) {
    std::vector<Entry> out;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (m(i, j) != cplx{}) out.push_back({i, j, m(i, j)});
        }
    }
    return out;
}

// Generator evaluated as
//   X = -i H_eff(t) rho,   drho/dt = X + X^dag + sum_k k(t) L_k rho L_k^dag
// with H_eff = H - (i/2) sum_k k(t) L_k^dag L_k. The time-dependent parts of
// H_eff share one sparsity pattern so it is refreshed in place.
class CompiledGenerator {
public:
    explicit CompiledGenerator(const LindbladGenerator& g) : gen_(g) {
        const cplx i{0.0, 1.0};
        const auto n = g.layout().total_dim();
        Matrix heff = g.hamiltonian().matrix();
        std::vector<Matrix> parts;
        for (const auto& c : g.collapses()) {
            const Matrix ldl = c.op.matrix().adjoint() * c.op.matrix();
            if (c.modulation) {
                modulated_.push_back({&c, compile(c.op.matrix())});
                parts.push_back(-0.5 * i * ldl);
            } else {
                heff -= 0.5 * i * c.rate * ldl;
                if (c.rate != 0.0) jumps_.push_back({c.rate, compile(c.op.matrix())});
            }
        }
        for (const auto& d : g.drives()) {
            drives_.push_back(&d);
            parts.push_back(d.coupling.matrix());
            parts.push_back(d.coupling.matrix().adjoint());
        }
        Matrix mask = heff.cwiseAbs().cast<cplx>();
        for (const auto& m : parts) mask += m.cwiseAbs().cast<cplx>();
        pattern_ = entries_of(mask);
        dense_heff_ = is_dense(pattern_.size(), n);
        base_.reserve(pattern_.size());
        for (const auto& e : pattern_) base_.push_back(heff(e.row, e.col));
        for (const auto& m : parts) {
            std::vector<cplx> v;
            v.reserve(pattern_.size());
            for (const auto& e : pattern_) v.push_back(m(e.row, e.col));
            part_values_.push_back(std::move(v));
        }
        values_.resize(pattern_.size());
        x_.resize(n, n);
        y_.resize(n, n);
    }

    void operator()(double t, const Matrix& rho, Matrix& out) {
        const cplx i{0.0, 1.0};
        refresh(t);

        // X = -i H_eff rho, accumulated column by column.
        const auto n = rho.rows();
        if (dense_heff_) {
            heff_dense_.setZero(n, n);
            for (std::size_t k = 0; k < pattern_.size(); ++k) heff_dense_(pattern_[k].row, pattern_[k].col) = values_[k];
            x_.noalias() = heff_dense_ * rho;
        } else {
            x_.setZero();
            for (Eigen::Index c = 0; c < n; ++c) {
                const cplx* src = rho.col(c).data();
                cplx* dst = x_.col(c).data();
                for (std::size_t k = 0; k < pattern_.size(); ++k) fma_c(dst[pattern_[k].row], values_[k], src[pattern_[k].col]);
            }
        }
        x_ *= -i;

        y_.setZero();
        for (const auto& j : jumps_) sandwich(j.rate, j.l, rho);
        for (std::size_t m = 0; m < modulated_.size(); ++m) {
            const double k = modulated_rates_[m];
            if (k != 0.0) sandwich(k, modulated_[m].l, rho);
        }
        out = x_ + x_.adjoint();
        out += 0.5 * (y_ + y_.adjoint());
    }

private:
    // Entry list for a sparse operator, the matrix itself otherwise.
    struct JumpOp {
        std::vector<Entry> entries;
        std::optional<Matrix> dense;
    };
    struct Jump {
        double rate;
        JumpOp l;
    };
    struct Modulated {
        const Collapse* collapse;
        JumpOp l;
    };

    static bool is_dense(std::size_t nnz, Eigen::Index n) { return nnz > static_cast<std::size_t>(4 * n); }

    static JumpOp compile(const Matrix& m) {
        JumpOp op{entries_of(m), std::nullopt};
        if (is_dense(op.entries.size(), m.rows())) {
            op.dense = m;
            op.entries.clear();
        }
        return op;
    }

    void refresh(double t) {
        values_ = base_;
        modulated_rates_.resize(modulated_.size());
        std::size_t part = 0;
        auto add = [&](cplx coeff) {
            const auto& v = part_values_[part++];
            if (coeff == cplx{}) return;
            for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += coeff * v[k];
        };
        for (std::size_t m = 0; m < modulated_.size(); ++m) {
            modulated_rates_[m] = gen_.rate_at(*modulated_[m].collapse, t);
            add(modulated_rates_[m]);
        }
        for (const Drive* d : drives_) {
            const cplx e = d->envelope(t);
            add(e);
            add(std::conj(e));
        }
    }

    // y += k L rho L^dag; for sparse L, summed over pairs of nonzero entries.
    void sandwich(double k, const JumpOp& op, const Matrix& rho) {
        if (op.dense) {
            tmp_.noalias() = *op.dense * rho;
            y_.noalias() += k * (tmp_ * op.dense->adjoint());
            return;
        }
        const auto& l = op.entries;
        for (const auto& b : l) {
            const cplx wb = k * std::conj(b.v);
            const cplx* src = rho.col(b.col).data();
            cplx* dst = y_.col(b.row).data();
            for (const auto& a : l) {
                cplx w{};
                fma_c(w, a.v, wb);
                fma_c(dst[a.row], w, src[a.col]);
            }
        }
    }

    const LindbladGenerator& gen_;
    std::vector<Entry> pattern_;
    bool dense_heff_ = false;
    Matrix heff_dense_;
    std::vector<cplx> base_, values_;
    std::vector<std::vector<cplx>> part_values_;  // modulated L^dag L terms, then (coupling, coupling^dag) per drive
    std::vector<double> modulated_rates_;
    std::vector<Jump> jumps_;
    std::vector<Modulated> modulated_;
    std::vector<const Drive*> drives_;
    Matrix x_, y_, tmp_;
};

struct RunResult {
    std::vector<Matrix> outputs;
};

RunResult integrate(CompiledGenerator& f, const Matrix& rho0, std::span<const double> t_grid, double h,
                    double trace_tol) {
    RunResult r;
    r.outputs.reserve(t_grid.size());
    Matrix rho = rho0;
    const auto n = rho.rows();
    Matrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), stage(n, n);
    r.outputs.push_back(rho);
    for (std::size_t s = 0; s + 1 < t_grid.size(); ++s) {
        const double t0 = t_grid[s];
        const double span = t_grid[s + 1] - t0;
        const auto steps = std::max<long long>(1, static_cast<long long>(std::ceil(span / h - 1e-9)));
        const double dt = span / static_cast<double>(steps);
        for (long long k = 0; k < steps; ++k) {
            const double t = t0 + static_cast<double>(k) * dt;
            f(t, rho, k1);
            stage = rho + (0.5 * dt) * k1;
            f(t + 0.5 * dt, stage, k2);
            stage = rho + (0.5 * dt) * k2;
            f(t + 0.5 * dt, stage, k3);
            stage = rho + dt * k3;
            // Last stage evaluated just inside the interval so that hard
            // envelope edges placed on grid points are resolved exactly.
            f(std::nextafter(t + dt, t0), stage, k4);
            rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const double drift = std::abs(rho.trace() - 1.0);
        if (!std::isfinite(drift) || drift > trace_tol) {
            std::ostringstream os;
            os << "evolve: trace drift " << drift << " at t = " << t_grid[s + 1] << " s (step " << h << " s)";
            throw NumericalError(os.str());
        }
        r.outputs.push_back(rho);
    }
    return r;
}

void check_grid(std::span<const double> t_grid) {
    if (t_grid.size() < 2) throw ValidationError("evolve: time grid needs at least two points");
    for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
        if (!(t_grid[i + 1] > t_grid[i])) throw ValidationError("evolve: time grid must be strictly increasing");
    }
}

}  // namespace

namespace {
thread_local TruncationMonitor* g_monitor = nullptr;

void record_truncation(const ModeLayout& layout, const std::vector<Matrix>& outputs) {
    TruncationMonitor* monitor = TruncationMonitor::active();
    if (!monitor) return;
    const auto n = layout.total_dim();
    for (std::size_t k = 0; k < layout.size(); ++k) {
        const Mode& mode = layout.modes()[k];
        if (mode.dim <= 2) continue;
        std::vector<Eigen::Index> top;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (layout.digits(i)[k] == mode.dim - 1) top.push_back(i);
        }
        double worst = 0.0;
        for (const auto& m : outputs) {
            double p = 0.0;
            for (auto i : top) p += m(i, i).real();
            worst = std::max(worst, p);
        }
        monitor->record(mode.name, worst);
    }
}
}  // namespace

TruncationMonitor::TruncationMonitor() : previous_(g_monitor) { g_monitor = this; }

TruncationMonitor::~TruncationMonitor() {
    g_monitor = previous_;
    if (previous_ && max_population_ > 0.0) previous_->record(worst_mode_, max_population_);
}

TruncationMonitor* TruncationMonitor::active() { return g_monitor; }

void TruncationMonitor::record(const std::string& mode, double population) {
    if (worst_mode_.empty() || population > max_population_) {
        max_population_ = population;
        worst_mode_ = mode;
    }
}

double frequency_scale(const LindbladGenerator& generator, std::span<const double> times) {
    const cplx i{0.0, 1.0};
    Matrix heff = generator.hamiltonian().matrix();
    for (const auto& c : generator.collapses()) {
        double kmax = c.rate;
        if (c.modulation) {
            kmax = 0.0;
            for (double t : times) kmax = std::max(kmax, generator.rate_at(c, t));
        }
        heff -= 0.5 * i * kmax * (c.op.matrix().adjoint() * c.op.matrix());
    }
    for (const auto& d : generator.drives()) {
        cplx peak{};
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double ts[2] = {times[k], k + 1 < times.size() ? 0.5 * (times[k] + times[k + 1]) : times[k]};
            for (double t : ts) {
                const cplx e = d.envelope(t);
                if (std::abs(e) > std::abs(peak)) peak = e;
            }
        }
        heff += peak * d.coupling.matrix() + std::conj(peak) * d.coupling.matrix().adjoint();
    }
    Eigen::ComplexEigenSolver<Matrix> es(heff, false);
    const auto& ev = es.eigenvalues();
    double scale = 0.0;
    for (Eigen::Index a = 0; a < ev.size(); ++a) {
        for (Eigen::Index b = 0; b < ev.size(); ++b) scale = std::max(scale, std::abs(ev(a) - std::conj(ev(b))));
    }
    return scale;
}

Trajectory evolve(const LindbladGenerator& generator, const DensityMatrix& rho0, std::span<const double> t_grid,
                  const std::vector<Observable>& observables, const StepControl& control) {
    require_same_layout(generator.layout(), rho0.layout(), "evolve");
    check_grid(t_grid);
    for (const auto& o : observables) require_same_layout(generator.layout(), o.op.layout(), "evolve observable");

    double h = control.step;
    if (!(h > 0.0)) {
        const double scale = frequency_scale(generator, t_grid);
        h = scale > 0.0 ? 1.0 / (3.0 * scale) : (t_grid.back() - t_grid.front());
    }

    CompiledGenerator f(generator);
    RunResult run = integrate(f, rho0.matrix(), t_grid, h, control.trace_tol);
    int halvings = 0;
    double delta = 0.0;
    if (control.check_convergence) {
        for (;;) {
            if (halvings >= control.max_halvings) {
                std::ostringstream os;
                os << "evolve: step-size underflow; final-state change " << delta << " > "
                   << control.convergence_tol << " after " << halvings << " halvings (step " << h << " s)";
                throw NumericalError(os.str());
            }
            h *= 0.5;
            ++halvings;
            RunResult finer = integrate(f, rho0.matrix(), t_grid, h, control.trace_tol);
            delta = (finer.outputs.back() - run.outputs.back()).cwiseAbs().maxCoeff();
            run = std::move(finer);
            if (delta < control.convergence_tol) break;
        }
    }

    record_truncation(generator.layout(), run.outputs);

    Trajectory traj{.times = {t_grid.begin(), t_grid.end()},
                    .states = {},
                    .observable_names = {},
                    .observable_values = {},
                    .final_state = rho0,
                    .step = h,
                    .halvings = halvings,
                    .convergence_delta = delta};
    for (const auto& o : observables) {
        traj.observable_names.push_back(o.name);
        std::vector<cplx> series;
        series.reserve(run.outputs.size());
        for (const auto& m : run.outputs) series.push_back(expectation(m, o.op));
        traj.observable_values.push_back(std::move(series));
    }
    auto validated = [&](const Matrix& m, double t) {
        try {
            return DensityMatrix(generator.layout(), m);
        } catch (const ValidationError& e) {
            std::ostringstream os;
            os << "evolve: state at t = " << t << " s violates density-matrix invariants: " << e.what();
            throw NumericalError(os.str());
        }
    };
    if (control.store_states) {
        traj.states.reserve(run.outputs.size());
        for (std::size_t k = 0; k < run.outputs.size(); ++k) traj.states.push_back(validated(run.outputs[k], t_grid[k]));
        traj.final_state = traj.states.back();
    } else {
        traj.final_state = validated(run.outputs.back(), t_grid.back());
    }
    return traj;
}

const std::vector<cplx>& Trajectory::observable(std::string_view name) const {
    for (std::size_t k = 0; k < observable_names.size(); ++k) {
        if (observable_names[k] == name) return observable_values[k];
    }
    throw ValidationError("Trajectory: unknown observable '" + std::string(name) + "'");
}

std::vector<double> Trajectory::real_series(std::string_view name) const {
    const auto& s = observable(name);
    std::vector<double> out(s.size());
    std::transform(s.begin(), s.end(), out.begin(), [](cplx z) { return z.real(); });
    return out;
}

double steady_observable(const Trajectory& trajectory, std::string_view name, double window) {
    const auto& s = trajectory.observable(name);
    const auto& t = trajectory.times;
    if (!(window > 0.0)) throw ValidationError("steady_observable: window must be > 0");
    const double t_start = t.back() - window;
    // Trapezoidal time average over the trailing window.
    double integral = 0.0, span = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double a = std::max(t[k], t_start);
        const double b = t[k + 1];
        if (b <= a) continue;
        const double fa = s[k].real() + (s[k + 1].real() - s[k].real()) * (a - t[k]) / (t[k + 1] - t[k]);
        integral += 0.5 * (fa + s[k + 1].real()) * (b - a);
        span += b - a;
    }
    if (span <= 0.0) return s.back().real();
    return integral / span;
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& os, std::string_view header_comment) {
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "time_s";
    for (const auto& n : trajectory.observable_names) os << ',' << n;
    os << '\n';
    os << std::setprecision(17);
    for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
        os << trajectory.times[k];
        for (const auto& series : trajectory.observable_values) os << ',' << series[k].real();
        os << '\n';
    }
}

std::string final_state_json(const Trajectory& trajectory) {
    nlohmann::json j;
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& m : trajectory.final_state.layout().modes()) layout.push_back({{"name", m.name}, {"dim", m.dim}});
    j["layout"] = layout;
    const Matrix& rho = trajectory.final_state.matrix();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < rho.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < rho.cols(); ++c) row.push_back({rho(r, c).real(), rho(r, c).imag()});
        rows.push_back(row);
    }
    j["final_state"] = rows;
    j["time_s"] = trajectory.times.back();
    return j.dump();
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n < 2) return {a};
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    v.back() = b;
    return v;
}

}  // namespace photodet
