// detector.hpp: device parameters, closed-form rates and the builders of
// the master-equation models.
//
// All frequencies and rates are angular (rad/s); times are seconds.

#pragma once

#include "photodet/hilbert.hpp"
#include "photodet/lindblad.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace photodet {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Self- and cross-Kerr rates.
struct ChiSet {
    double qq = 0.0, qb = 0.0, qw = 0.0;
    double bb = 0.0, ww = 0.0, bw = 0.0;
};

// Josephson energy E_J/hbar (rad/s) and zero-point phase fluctuations (rad).
struct MicroscopicParams {
    double E_J = 0.0;
    double phi_q = 0.0, phi_b = 0.0, phi_w = 0.0;
};

struct CircuitParams {
    // Measured frequencies without pump: qubit, buffer with qubit in |g>,
    // waste with qubit in |e>.
    double omega_q = 0.0;
    double omega_b_g = 0.0;
    double omega_w_e = 0.0;

    ChiSet chi;

    double kappa_b = 0.0;
    double kappa_w = 0.0;
    double kappa_q = 0.0;    // 1/T1
    double kappa_phi = 0.0;  // enters as kappa_phi/2 D[sigma_z]
    double gamma_up = 0.0;   // phenomenological thermal excitation, sqrt(gamma_up) sigma^dag

    cplx xi_p{};  // pump amplitude, sqrt(photons)

    std::optional<double> Delta;              // waste-frame detuning; default chi_qw
    std::optional<double> kappa_nl_override;  // replaces the derived kappa_nl in reduced models and eta
    std::optional<MicroscopicParams> micro;

    int buffer_dim = 6;
    int waste_dim = 6;

    double detuning() const { return Delta.value_or(chi.qw); }

    // Throws ValidationError on negative rates, |xi_p|^2 >= 1, bad dims, or
    // microscopic parameters implying chis more than 1% from the stored ones.
    void validate() const;

    // Bundled device values: T1 = 7.7 us, T2* = 10 us, |xi_p|^2 = 0.076,
    // Delta = chi_qw, unmeasured chis from complete_chis().
    static CircuitParams reference_device();
};

// kappa_phi such that 1/T2* = kappa_q/2 + kappa_phi (clamped at 0).
double dephasing_from_t2star(double T1, double T2star);

ChiSet chi_from_circuit(double E_J, double phi_q, double phi_b, double phi_w);

// chi_bb, chi_ww, chi_bw from the measured qubit Kerr and cross-Kerrs.
ChiSet complete_chis(double chi_qq, double chi_qb, double chi_qw);

cplx three_wave_rate(cplx xi_p, double chi_qb, double chi_qw);

struct NonlinearRates {
    double kappa_nl = 0.0;
    double delta_nl = 0.0;
};

NonlinearRates nonlinear_rate(cplx g3, double kappa_w, double Delta, double chi_qw);

double efficiency(double kappa_nl, double kappa_b);

struct BareFrequencies {
    double omega_q = 0.0, omega_b = 0.0, omega_w = 0.0;
};

BareFrequencies bare_frequencies(const CircuitParams& p);

struct PumpFrequency {
    double omega_p = 0.0;   // at the configured |xi_p|^2 and Delta
    double omega_p0 = 0.0;  // zero-power intercept at Delta = chi_qw
    double slope = 0.0;     // d omega_p / d|xi_p|^2
};

PumpFrequency pump_frequency(const CircuitParams& p);

// Predicted pump frequency of the sixth-order spurious line.
double spurious_pump_frequency(const CircuitParams& p);

struct PurcellRates {
    double kappa_w_eff = 0.0;
    double kappa_q_w = 0.0;
};

PurcellRates purcell_rates(double G_coupling, double kappa_P, double omega_P, double omega_w, double g_qw,
                           double omega_q);

// Effective drive of the reset model, kappa_nl eps_w / (2 g3), evaluated
// from the kappa_nl in use.
cplx reset_drive(const CircuitParams& p, double epsilon_w);
double reset_rate(const CircuitParams& p, double epsilon_w);
// eps_w giving the requested kappa_reset (inverse of reset_rate).
double reset_drive_for_rate(const CircuitParams& p, double kappa_reset);

struct DerivedRates {
    cplx g3{};
    double kappa_nl = 0.0;  // derived from g3; see kappa_nl_used
    double delta_nl = 0.0;
    double kappa_nl_used = 0.0;  // override if present
    double eta = 0.0;            // from kappa_nl_used
    double omega_p = 0.0;
    double omega_p0 = 0.0;
    std::optional<double> kappa_reset;
};

DerivedRates derive_rates(const CircuitParams& p, std::optional<double> epsilon_w = std::nullopt);

// kappa_nl as used by the reduced and reset models.
double kappa_nl_in_use(const CircuitParams& p);

// Rectangular pulse with optional tanh edges. Used for the buffer input
// b_in(t) (sqrt(1/s)), the waste drive (rad/s), and the pump profile
// (dimensionless multiplier of xi_p).
struct Pulse {
    cplx amplitude{};
    double t_on = -std::numeric_limits<double>::infinity();
    double t_off = std::numeric_limits<double>::infinity();
    double ramp = 0.0;

    static Pulse constant(cplx a) { return {a}; }
    Envelope envelope() const;
    cplx at(double t) const { return envelope()(t); }
};

struct FullModelOptions {
    std::optional<Pulse> buffer_input;  // b_in(t)
    std::optional<Pulse> waste_drive;   // eps_w(t)
    std::optional<Pulse> pump;          // xi_p(t)/xi_p; absent means always on
};

LindbladGenerator build_full_model(const CircuitParams& p, const FullModelOptions& options = {});

struct ReducedModelFlags {
    bool delta_nl = true;
    bool chi_bb = true;
    bool chi_qb = true;
    bool qubit_decay = true;
    bool dephasing = true;
    bool thermal = true;

    // kappa_nl D[b sigma^dag] + kappa_b D[b] + drive only.
    static ReducedModelFlags minimal() { return {false, false, false, false, false, false}; }
};

LindbladGenerator build_reduced_model(const CircuitParams& p, const std::optional<Pulse>& buffer_input,
                                      const ReducedModelFlags& flags = {},
                                      const std::optional<Pulse>& pump = std::nullopt);

struct ResetModelFlags {
    bool qubit_decay = false;
};

LindbladGenerator build_reset_model(const CircuitParams& p, double epsilon_w, const ResetModelFlags& flags = {});

struct AdiabaticReport {
    double max_dpe = 0.0;
    double rms_dpe = 0.0;
    double max_dn = 0.0;
    double rms_dn = 0.0;
    double g3_over_kappa_w = 0.0;
    bool weak_coupling_warning = false;
    std::vector<double> times;
    std::vector<double> pe_full, pe_reduced, n_full, n_reduced;
};

// Runs the full and reduced models from |0, g, 0> with identical buffer
// input and compares P_e(t) and <b^dag b>(t). Any kappa_nl override is
// ignored so both models share the g3-derived rate.
AdiabaticReport adiabatic_equivalence_check(const CircuitParams& p, const Pulse& buffer_input,
                                            std::span<const double> t_grid, const StepControl& control = {});

// Named operators on the canonical layouts.
struct DetectorOperators {
    Operator b, sigma, sigma_z, excited, buffer_number;
};

DetectorOperators detector_operators(const ModeLayout& layout);

}  // namespace photodet
