// tomography.hpp: single-mode field tomography from synthetic heterodyne
// records, from trace generation to maximum-likelihood reconstruction.
//
// Conventions:
//   * a trace sample is z_j = sqrt(G) (s f_j + background_j), with s drawn
//     from the Husimi Q function of the state plus amplifier noise of
//     variance n_h, so a vacuum input has E|S|^2 = G (1 + n_h);
//   * moment (n, m) of a table is E[(S^*)^n S^m] (raw, noise) or
//     <(a^dag)^n a^m> (signal);
//   * Wigner functions use W(alpha) = (2/pi) Tr[D(-alpha) rho D(alpha) P],
//     P the photon-number parity, so the vacuum peaks at 2/pi.

#pragma once

#include "photodet/hilbert.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace photodet {

struct TemporalMode {
    Vector f;

    // Normalizes and fixes the phase (largest-magnitude sample real positive).
    static TemporalMode from(const Vector& samples);
    Eigen::Index size() const { return f.size(); }
};

// |<a|b>|^2 for two temporal modes.
double mode_overlap(const TemporalMode& a, const TemporalMode& b);

// exp(-kappa t / 2 + i detuning t) sampled at t_j = j * sample_period.
TemporalMode emission_mode(int n_samples, double sample_period, double kappa, double detuning = 0.0);

struct TraceEnsemble {
    double sample_period = 20e-9;
    Matrix traces;            // n_traces x n_samples
    std::vector<int> labels;  // optional per-trace qubit outcome: 0 = g, 1 = e
    std::uint64_t seed = 0;

    Eigen::Index n_traces() const { return traces.rows(); }
    Eigen::Index n_samples() const { return traces.cols(); }
};

struct TraceOptions {
    double gain = 100.0;
    double noise_quanta = 2.0;  // n_h
    int n_traces = 50000;
    double sample_period = 20e-9;
    std::uint64_t seed = 1;
    int threads = 0;  // 0: hardware concurrency
};

// Deterministic given options.seed; independent of options.threads.
TraceEnsemble generate_traces(const DensityMatrix& rho, const TemporalMode& mode, const TraceOptions& options);

// Draws one Husimi-Q sample of a single-mode state (exposed for tests).
class QSampler {
public:
    explicit QSampler(const DensityMatrix& rho);
    // Throws NumericalError after 10^6 rejected proposals.
    cplx operator()(std::mt19937_64& rng) const;
    double bound() const { return bound_; }
    double proposal_variance() const { return sigma2_; }

private:
    Matrix rho_;
    int dim_ = 0;
    double sigma2_ = 1.0;
    double bound_ = 1.0;  // M with Q <= M g
    double lambda_max_ = 1.0;
};

struct ModeExtraction {
    TemporalMode mode;
    Eigen::VectorXd spectrum;  // eigenvalues of the autocorrelation matrix, descending
    double top_excess = 0.0;   // top eigenvalue / median eigenvalue - 1
};

ModeExtraction extract_mode(const TraceEnsemble& ensemble);

// S_k = sum_j f^*(t_j) z_k(t_j).
std::vector<cplx> project(const TraceEnsemble& ensemble, const TemporalMode& mode);
std::vector<cplx> project(const Matrix& traces, const TemporalMode& mode);

enum class MomentStage { raw, noise, signal, model };

std::string to_string(MomentStage stage);

struct MomentTable {
    static constexpr int kOrder = 4;

    MomentStage stage = MomentStage::raw;
    double gain = 1.0;
    std::array<cplx, 25> values{};
    std::array<double, 25> sigmas{};

    static bool in_range(int n, int m) { return n >= 0 && m >= 0 && n + m <= kOrder; }
    cplx& at(int n, int m);
    const cplx& at(int n, int m) const;
    double& sigma(int n, int m);
    double sigma(int n, int m) const;

    // Largest |entry(n,m) - conj(entry(m,n))|.
    double hermiticity_defect() const;
};

// Empirical E[(S^*)^n S^m] with jackknife errors over `blocks` contiguous blocks.
MomentTable raw_moments(std::span<const cplx> samples, int blocks = 50);

// Exact <(a^dag)^n a^m> of a single-mode state.
MomentTable state_moments(const DensityMatrix& rho);

struct GainCalibration {
    double gain = 0.0;
    cplx slope{};
    double sigma = 0.0;
};

// Complex slope of <S> against the known <a> through the origin; G = |slope|^2.
GainCalibration calibrate_gain(std::span<const MomentTable> tables, std::span<const cplx> amplitudes);

// G^{-(n+m)/2} times the raw moments of a vacuum-input run.
MomentTable noise_moments(const TraceEnsemble& vacuum, const TemporalMode& mode, double gain, int blocks = 50);
MomentTable noise_moments(const MomentTable& vacuum_raw, double gain);

// Solves raw(n,m) = G^{(n+m)/2} sum_{i<=n, j<=m} C(n,i) C(m,j) signal(i,j) noise(n-i, m-j).
MomentTable invert_moments(const MomentTable& raw, const MomentTable& noise, double gain);
// The forward map of the same relation.
MomentTable compose_moments(const MomentTable& signal, const MomentTable& noise, double gain);

struct MleOptions {
    int restarts = 8;
    std::uint64_t seed = 7;
    int max_iterations = 3000;
    double relative_tol = 1e-12;
};

struct NamedState {
    std::string name;
    DensityMatrix rho;
};

struct ReconstructedState {
    DensityMatrix rho;
    double distance = 0.0;
    bool converged = false;
    std::vector<std::pair<std::string, double>> fidelities;
};

// Sum over n+m <= 4 of |<(a^dag)^n a^m>_rho - target(n,m)|^2, and its
// gradient with respect to the real and imaginary parts of the entries of
// the lower-triangular T (real diagonal) with rho = T^dag T / Tr(T^dag T).
// Parameters are packed as [Re T_ij (j <= i), Im T_ij (j < i)].
struct MleObjective {
    MleObjective(const MomentTable& target, int n_fock);

    int parameter_count() const { return n_ * n_; }
    Matrix unpack(const Eigen::VectorXd& x) const;
    Eigen::VectorXd pack(const Matrix& T) const;
    Matrix density(const Eigen::VectorXd& x) const;
    double value(const Eigen::VectorXd& x) const;
    double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

private:
    int n_;
    std::vector<std::pair<std::array<int, 2>, Matrix>> ops_;
    std::vector<cplx> target_;
};

ReconstructedState mle_reconstruct(const MomentTable& signal, int n_fock, const std::vector<NamedState>& targets = {},
                                   const MleOptions& options = {});

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

// Single-mode states on a layout with one mode named "field".
ModeLayout field_layout(int dim);
DensityMatrix fock_state(int dim, int n);
DensityMatrix thermal_state(int dim, double n_bar);
DensityMatrix field_coherent_state(int dim, cplx alpha);
// "vacuum", "fock<n>", "coherent:<alpha>", "thermal:<n_bar>".
DensityMatrix named_state(std::string_view name, int dim);

std::vector<double> wigner(const DensityMatrix& rho, std::span<const cplx> points);
// True when any |alpha|^2 exceeds dim/4 (evaluation still performed).
bool wigner_truncation_warning(const DensityMatrix& rho, std::span<const cplx> points);

struct RoundtripOptions {
    TraceOptions traces;
    int n_samples = 40;
    double mode_kappa = 6.283185307179586 * 1.37e6;
    double mode_detuning = 6.283185307179586 * 0.3e6;
    int n_fock = 6;
    int generation_dim = 16;
    std::vector<double> calibration_amplitudes{0.5, 1.0, 2.0};
    MleOptions mle;
};

struct StateRoundtrip {
    std::string name;
    MomentTable raw;
    MomentTable signal;
    ReconstructedState reconstruction;
    double fidelity = 0.0;
    double own_mode_overlap = 0.0;  // diagnostic: mode extracted from this state's own ensemble
};

struct RoundtripResult {
    TemporalMode true_mode;
    ModeExtraction herald;  // mode extracted from the single-photon ensemble
    double mode_overlap = 0.0;
    GainCalibration gain;
    MomentTable noise;
    std::vector<StateRoundtrip> states;
};

// Generates the herald (|1>), calibration (coherent), and vacuum runs, then
// reconstructs every named state with the herald mode and calibrated gain.
RoundtripResult tomography_roundtrip(const std::vector<std::string>& state_names, const RoundtripOptions& options);

// Ensemble file: one-line JSON header, then little-endian (re, im) doubles
// in row-major trace order.
void write_ensemble(const TraceEnsemble& ensemble, std::ostream& os);
TraceEnsemble read_ensemble(std::istream& is);

std::string moment_table_json(const MomentTable& table);
std::string density_matrix_json(const DensityMatrix& rho);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace photodet
