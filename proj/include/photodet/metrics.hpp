// metrics.hpp: detection figures of merit and the fits that extract them
// from simulated or measured click-probability series.

#pragma once

#include "photodet/detector.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace photodet {

// 1 - exp(-eta * n_bar).
double click_probability(double n_bar, double eta);

enum class Abscissa { photon_number, pulse_length, window };

std::string to_string(Abscissa kind);

struct DetectionCurve {
    Abscissa kind = Abscissa::photon_number;
    std::string label;
    std::vector<double> x;
    std::vector<double> p_e;
    std::string config_hash;

    // Throws ValidationError unless sizes match, x increases, and p_e in [0, 1].
    void validate() const;
};

struct FitParameter {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    std::string model;
    std::vector<FitParameter> parameters;
    double residual_rms = 0.0;
    bool converged = true;
    std::vector<std::string> flags;

    double value(std::string_view name) const;
    double sigma(std::string_view name) const;
};

// Fits p_e = p0 + eta * (1 - exp(-n_bar)) over points with 1 - exp(-n_bar) <= window.
FitResult fit_efficiency(const DetectionCurve& curve, double window = 0.3);

struct DarkCountFit {
    FitResult linear;       // p0 + gamma_dc * t
    FitResult exponential;  // p_inf + (p0 - p_inf) exp(-t / T1)
    bool exponential_valid = true;
};

DarkCountFit fit_dark_count(std::span<const double> t_p, std::span<const double> p_e);

// Rate from a least-squares line through ln(y) over the samples with
// y_low <= y <= y_high (one decade by default).
FitResult fit_decay_rate(std::span<const double> t, std::span<const double> y, double y_high = 0.5,
                         double y_low = 0.05);

double duty_cycle_efficiency(double eta, double t_p, double t_cycle);

// Pulse-length regimes. `ideal` and `infinite_bandwidth` replace the buffer
// by a direct qubit excitation rate eta(t) |b_in(t)|^2; `ideal` and
// `no_decay` drop qubit decay. `ideal` also keeps the pump at full strength.
enum class Regime { ideal, infinite_bandwidth, no_decay, measured };

std::string to_string(Regime r);

struct PulseSweepOptions {
    std::vector<double> n_bars{0.05, 0.1, 0.2};
    double pump_ramp = 500e-9;      // pump reaches full amplitude after this time
    double readout_delay = 500e-9;  // readout after the end of the buffer pulse
    double samples_per_us = 20.0;   // output grid density (integration step is automatic)
};

// Pump profile used by the sweep: starts at ~0 at t = 0 and saturates after `ramp`.
Pulse pump_turn_on(double ramp);

// Click probability after a square buffer pulse of length t_b carrying n_bar photons.
double pulse_click_probability(const CircuitParams& p, Regime regime, double t_b, double n_bar,
                               const PulseSweepOptions& options = {});

// eta(t_b): fit_efficiency over options.n_bars (window disabled).
double pulse_efficiency(const CircuitParams& p, Regime regime, double t_b, const PulseSweepOptions& options = {});

std::vector<DetectionCurve> efficiency_vs_pulse_length(const CircuitParams& p, std::span<const Regime> regimes,
                                                       std::span<const double> t_b_grid,
                                                       const PulseSweepOptions& options = {});

// Final P_e of the full model, no drive, started from |n photons, g, 0>.
double buffer_fock_click_probability(const CircuitParams& p, int n, double t_final);

struct FockCoherentReport {
    double epsilon = 0.0;
    double p_fock = 0.0;      // (1 - eps)|0><0| + eps|1><1| in the buffer
    double p_coherent = 0.0;  // phase-averaged coherent state, |alpha|^2 = eps
    double difference = 0.0;
};

// Both click probabilities from full-model runs with Fock initial buffer states.
FockCoherentReport fock_coherent_equivalence(const CircuitParams& p, double epsilon, double t_final);

}  // namespace photodet
