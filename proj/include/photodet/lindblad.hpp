// lindblad.hpp: Lindblad master-equation generators and a deterministic
// fixed-step RK4 integrator with step-halving convergence control.

#pragma once

#include "photodet/hilbert.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace photodet {

// Complex drive amplitude as a function of time (rad/s).
using Envelope = std::function<cplx(double)>;
// Dimensionless multiplier applied to a collapse rate.
using RateModulation = std::function<double(double)>;

namespace envelopes {

Envelope constant(cplx value);

// value * 0.5 * [tanh((t - t_on)/ramp) - tanh((t - t_off)/ramp)].
// ramp <= 0 gives a hard-edged rectangle.
Envelope smooth_rect(cplx value, double t_on, double t_off, double ramp);

}  // namespace envelopes

struct Collapse {
    double rate = 0.0;
    Operator op;
    std::string label;
    RateModulation modulation;  // empty: constant rate
};

// Adds envelope(t) * coupling + conj(envelope(t)) * coupling^dag to H.
struct Drive {
    Envelope envelope;
    Operator coupling;
    std::string label;
};

class LindbladGenerator {
public:
    explicit LindbladGenerator(Operator hamiltonian);

    LindbladGenerator& add_hamiltonian(const Operator& h);
    LindbladGenerator& add_collapse(double rate, Operator op, std::string label = {},
                                    RateModulation modulation = {});
    LindbladGenerator& add_drive(Envelope envelope, Operator coupling, std::string label = {});

    const ModeLayout& layout() const { return hamiltonian_.layout(); }
    const Operator& hamiltonian() const { return hamiltonian_; }
    const std::vector<Collapse>& collapses() const { return collapses_; }
    const std::vector<Drive>& drives() const { return drives_; }

    // H + sum of drive terms at time t.
    Matrix hamiltonian_at(double t) const;
    double rate_at(const Collapse& c, double t) const;

private:
    Operator hamiltonian_;
    std::vector<Collapse> collapses_;
    std::vector<Drive> drives_;
};

// D[L]rho = L rho L^dag - 1/2 {L^dag L, rho}.
Matrix dissipator_apply(const Operator& op, const DensityMatrix& rho);
Matrix dissipator_apply(const Matrix& op, const Matrix& rho);

// -i[H(t), rho] + sum_k rate_k(t) D[L_k] rho.
Matrix rhs(const LindbladGenerator& generator, double t, const DensityMatrix& rho);
Matrix rhs(const LindbladGenerator& generator, double t, const Matrix& rho);

// While alive, records on the constructing thread the largest top-Fock-level
// population (modes with dim > 2) over every output state of evolve().
class TruncationMonitor {
public:
    TruncationMonitor();
    ~TruncationMonitor();
    TruncationMonitor(const TruncationMonitor&) = delete;
    TruncationMonitor& operator=(const TruncationMonitor&) = delete;

    double max_population() const { return max_population_; }
    const std::string& worst_mode() const { return worst_mode_; }
    bool exceeded() const { return max_population_ > kTruncationWarnLevel; }

    static TruncationMonitor* active();
    void record(const std::string& mode, double population);

private:
    TruncationMonitor* previous_;
    double max_population_ = 0.0;
    std::string worst_mode_;
};

struct Observable {
    std::string name;
    Operator op;
};

struct StepControl {
    // Initial RK4 step in seconds; <= 0 picks 1/(3 * frequency scale).
    double step = 0.0;
    // Max entrywise change of the final state between step h and h/2.
    double convergence_tol = 1e-7;
    int max_halvings = 8;
    bool check_convergence = true;
    // Abort when |Tr rho - 1| exceeds this at any output time.
    double trace_tol = 1e-5;
    bool store_states = true;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;  // empty unless StepControl::store_states
    std::vector<std::string> observable_names;
    std::vector<std::vector<cplx>> observable_values;  // [observable][time]
    DensityMatrix final_state;
    double step = 0.0;
    int halvings = 0;
    double convergence_delta = 0.0;

    const std::vector<cplx>& observable(std::string_view name) const;
    std::vector<double> real_series(std::string_view name) const;
};

// Largest |lambda_i - conj(lambda_j)| of the effective non-Hermitian
// Hamiltonian with drives at their peak over `times`; sets the default step.
double frequency_scale(const LindbladGenerator& generator, std::span<const double> times);

Trajectory evolve(const LindbladGenerator& generator, const DensityMatrix& rho0, std::span<const double> t_grid,
                  const std::vector<Observable>& observables = {}, const StepControl& control = {});

// Mean of the named observable (real part) over times >= t_final - window.
double steady_observable(const Trajectory& trajectory, std::string_view name, double window);

// CSV: time_s, then one column per observable (real part).
void write_trajectory_csv(const Trajectory& trajectory, std::ostream& os, std::string_view header_comment = {});
// JSON: {"layout": [...], "final_state": [[[re, im], ...], ...]}.
std::string final_state_json(const Trajectory& trajectory);

std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace photodet
