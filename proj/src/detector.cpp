#include "photodet/detector.hpp"

#include <cmath>
#include <sstream>

namespace photodet {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_rate(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream os;
        os << "CircuitParams: " << name << " must be finite and >= 0 (got " << v << ")";
        throw ValidationError(os.str());
    }
}

bool within_rel(double a, double b, double tol) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 || std::abs(a - b) <= tol * scale;
}

// Lorentzian detuning factor (Delta - chi_qw)/kappa_w.
double detuning_ratio(const CircuitParams& p) { return (p.detuning() - p.chi.qw) / p.kappa_w; }

Matrix kerr_local(int dim) {
    const Matrix a = lowering(dim);
    const Matrix ad = a.adjoint();
    return ad * ad * a * a;
}

void check_drive_truncation(double mean_photons, int dim, const char* mode) {
    if (mean_photons > dim / 4.0) {
        std::ostringstream os;
        os << "truncation: " << mode << " dimension " << dim << " too small for a steady occupation of "
           << mean_photons << " photons (limit dim/4)";
        throw ValidationError(os.str());
    }
}

}  // namespace

void CircuitParams::validate() const {
    const std::pair<double, const char*> rates[] = {
        {chi.qq, "chi_qq"},   {chi.qb, "chi_qb"},       {chi.qw, "chi_qw"},     {chi.bb, "chi_bb"},
        {chi.ww, "chi_ww"},   {chi.bw, "chi_bw"},       {kappa_b, "kappa_b"},   {kappa_w, "kappa_w"},
        {kappa_q, "kappa_q"}, {kappa_phi, "kappa_phi"}, {gamma_up, "gamma_up"},
    };
    for (const auto& [v, name] : rates) require_rate(v, name);
    if (!(kappa_w > 0.0)) throw ValidationError("CircuitParams: kappa_w must be > 0");
    if (!std::isfinite(std::norm(xi_p)) || std::norm(xi_p) >= 1.0) {
        throw ValidationError("CircuitParams: |xi_p|^2 must be < 1");
    }
    if (Delta && !std::isfinite(*Delta)) throw ValidationError("CircuitParams: Delta must be finite");
    if (kappa_nl_override) require_rate(*kappa_nl_override, "kappa_nl");
    if (buffer_dim < 2 || waste_dim < 2) throw ValidationError("CircuitParams: mode dimensions must be >= 2");
    for (double f : {omega_q, omega_b_g, omega_w_e}) {
        if (!std::isfinite(f)) throw ValidationError("CircuitParams: frequencies must be finite");
    }
    if (micro) {
        const ChiSet implied = chi_from_circuit(micro->E_J, micro->phi_q, micro->phi_b, micro->phi_w);
        const std::pair<double, double> pairs[] = {{implied.qq, chi.qq}, {implied.qb, chi.qb}, {implied.qw, chi.qw},
                                                   {implied.bb, chi.bb}, {implied.ww, chi.ww}, {implied.bw, chi.bw}};
        for (const auto& [a, b] : pairs) {
            if (!within_rel(a, b, 0.01)) {
                throw ValidationError("CircuitParams: microscopic parameters disagree with stored chi values by > 1%");
            }
        }
    }
}

CircuitParams CircuitParams::reference_device() {
    CircuitParams p;
    p.omega_q = kTwoPi * 4.532e9;
    p.omega_b_g = kTwoPi * 5.495e9;
    p.omega_w_e = kTwoPi * 5.770e9;
    p.chi = complete_chis(kTwoPi * 146e6, kTwoPi * 1.02e6, kTwoPi * 2.73e6);
    p.kappa_b = kTwoPi * 1.0e6;
    p.kappa_w = kTwoPi * 2.4e6;
    const double T1 = 7.7e-6;
    p.kappa_q = 1.0 / T1;
    p.kappa_phi = dephasing_from_t2star(T1, 10e-6);
    p.xi_p = std::sqrt(0.076);
    return p;
}

double dephasing_from_t2star(double T1, double T2star) {
    if (!(T2star > 0.0)) throw ValidationError("dephasing_from_t2star: T2* must be > 0");
    const double gamma1 = std::isinf(T1) ? 0.0 : 1.0 / T1;
    return std::max(0.0, 1.0 / T2star - 0.5 * gamma1);
}

ChiSet chi_from_circuit(double E_J, double phi_q, double phi_b, double phi_w) {
    if (!(E_J > 0.0) || !std::isfinite(E_J)) throw ValidationError("chi_from_circuit: E_J must be > 0");
    for (double phi : {phi_q, phi_b, phi_w}) {
        if (!(phi > 0.0 && phi < 1.0)) throw ValidationError("chi_from_circuit: phases must lie in (0, 1) rad");
    }
    const double q2 = phi_q * phi_q, b2 = phi_b * phi_b, w2 = phi_w * phi_w;
    ChiSet c;
    c.qq = E_J * q2 * q2 / 2.0;
    c.bb = E_J * b2 * b2 / 2.0;
    c.ww = E_J * w2 * w2 / 2.0;
    c.qb = E_J * q2 * b2;
    c.qw = E_J * q2 * w2;
    c.bw = E_J * b2 * w2;
    return c;
}

ChiSet complete_chis(double chi_qq, double chi_qb, double chi_qw) {
    if (!(chi_qq > 0.0)) throw ValidationError("complete_chis: chi_qq must be > 0");
    ChiSet c;
    c.qq = chi_qq;
    c.qb = chi_qb;
    c.qw = chi_qw;
    c.bb = chi_qb * chi_qb / (4.0 * chi_qq);
    c.ww = chi_qw * chi_qw / (4.0 * chi_qq);
    c.bw = chi_qb * chi_qw / (2.0 * chi_qq);
    return c;
}

cplx three_wave_rate(cplx xi_p, double chi_qb, double chi_qw) {
    if (chi_qb < 0.0 || chi_qw < 0.0) throw ValidationError("three_wave_rate: chi values must be >= 0");
    return -xi_p * std::sqrt(chi_qb * chi_qw);
}

NonlinearRates nonlinear_rate(cplx g3, double kappa_w, double Delta, double chi_qw) {
    if (!(kappa_w > 0.0)) throw ValidationError("nonlinear_rate: kappa_w must be > 0");
    const double x = (Delta - chi_qw) / kappa_w;
    NonlinearRates r;
    r.kappa_nl = 4.0 * std::norm(g3) / kappa_w / (1.0 + 4.0 * x * x);
    r.delta_nl = -r.kappa_nl * x;
    return r;
}

double efficiency(double kappa_nl, double kappa_b) {
    if (kappa_nl < 0.0 || kappa_b < 0.0) throw ValidationError("efficiency: rates must be >= 0");
    const double s = kappa_nl + kappa_b;
    if (s == 0.0) return 0.0;
    return 4.0 * kappa_nl * kappa_b / (s * s);
}

BareFrequencies bare_frequencies(const CircuitParams& p) {
    // Measured values are taken without pump, so only the waste carries a
    // qubit-state-dependent pull (it was measured with the qubit in |e>).
    return {p.omega_q, p.omega_b_g, p.omega_w_e + p.chi.qw};
}

PumpFrequency pump_frequency(const CircuitParams& p) {
    const BareFrequencies f = bare_frequencies(p);
    PumpFrequency r;
    r.slope = -(2.0 * p.chi.qq + p.chi.qw - p.chi.qb);
    r.omega_p0 = f.omega_q + f.omega_w - f.omega_b - p.chi.qw;
    r.omega_p = f.omega_q + f.omega_w - f.omega_b - p.detuning() + std::norm(p.xi_p) * r.slope;
    return r;
}

double spurious_pump_frequency(const CircuitParams& p) {
    const double xi2 = std::norm(p.xi_p);
    const double q_bar = p.omega_q - 2.0 * p.chi.qq * xi2;
    const double q_ef = q_bar - p.chi.qq;
    return (q_bar + q_ef + p.omega_b_g) / 3.0;
}

PurcellRates purcell_rates(double G_coupling, double kappa_P, double omega_P, double omega_w, double g_qw,
                           double omega_q) {
    if (!(kappa_P > 0.0)) throw ValidationError("purcell_rates: kappa_P must be > 0");
    auto filter = [&](double omega) {
        const double x = 2.0 * (omega_P - omega) / kappa_P;
        return 4.0 * G_coupling * G_coupling / kappa_P / (1.0 + x * x);
    };
    PurcellRates r;
    r.kappa_w_eff = filter(omega_w);
    const double dqw = omega_w - omega_q;
    r.kappa_q_w = dqw == 0.0 ? filter(omega_q) : g_qw * g_qw / (dqw * dqw) * filter(omega_q);
    return r;
}

double kappa_nl_in_use(const CircuitParams& p) {
    if (p.kappa_nl_override) return *p.kappa_nl_override;
    const cplx g3 = three_wave_rate(p.xi_p, p.chi.qb, p.chi.qw);
    return nonlinear_rate(g3, p.kappa_w, p.detuning(), p.chi.qw).kappa_nl;
}

cplx reset_drive(const CircuitParams& p, double epsilon_w) {
    if (!(epsilon_w >= 0.0) || !std::isfinite(epsilon_w)) {
        throw ValidationError("reset_drive: epsilon_w must be real and >= 0");
    }
    // kappa_nl/(2 g3) = 2 g3^* / (kappa_w (1 + 4x^2)) for the g3-derived rate;
    // with an override the modulus follows |g3|^2 = kappa_nl kappa_w (1 + 4x^2)/4.
    const double x = detuning_ratio(p);
    const double knl = kappa_nl_in_use(p);
    const double magnitude = epsilon_w * std::sqrt(knl / (p.kappa_w * (1.0 + 4.0 * x * x)));
    const cplx g3 = three_wave_rate(p.xi_p, p.chi.qb, p.chi.qw);
    const cplx phase = std::abs(g3) > 0.0 ? std::conj(g3) / std::abs(g3) : cplx{1.0, 0.0};
    return magnitude * phase;
}

double reset_rate(const CircuitParams& p, double epsilon_w) {
    const double knl = kappa_nl_in_use(p);
    const double s = p.kappa_b + knl;
    if (s == 0.0) return 0.0;
    return 4.0 * std::norm(reset_drive(p, epsilon_w)) * p.kappa_b / (s * s);
}

double reset_drive_for_rate(const CircuitParams& p, double kappa_reset) {
    if (!(kappa_reset >= 0.0)) throw ValidationError("reset_drive_for_rate: rate must be >= 0");
    const double unit = reset_rate(p, 1.0);
    if (!(unit > 0.0)) throw ValidationError("reset_drive_for_rate: reset rate vanishes for any drive");
    return std::sqrt(kappa_reset / unit);
}

DerivedRates derive_rates(const CircuitParams& p, std::optional<double> epsilon_w) {
    p.validate();
    DerivedRates d;
    d.g3 = three_wave_rate(p.xi_p, p.chi.qb, p.chi.qw);
    const NonlinearRates nl = nonlinear_rate(d.g3, p.kappa_w, p.detuning(), p.chi.qw);
    d.kappa_nl = nl.kappa_nl;
    d.delta_nl = nl.delta_nl;
    d.kappa_nl_used = p.kappa_nl_override.value_or(nl.kappa_nl);
    d.eta = efficiency(d.kappa_nl_used, p.kappa_b);
    const PumpFrequency pf = pump_frequency(p);
    d.omega_p = pf.omega_p;
    d.omega_p0 = pf.omega_p0;
    if (epsilon_w) d.kappa_reset = reset_rate(p, *epsilon_w);
    return d;
}

Envelope Pulse::envelope() const {
    if (std::isinf(t_on) && std::isinf(t_off)) return envelopes::constant(amplitude);
    return envelopes::smooth_rect(amplitude, t_on, t_off, ramp);
}

DetectorOperators detector_operators(const ModeLayout& layout) {
    const Operator b = annihilation(layout, "buffer");
    const Operator s = annihilation(layout, "qubit");
    const Operator e = s.adjoint() * s;
    const Operator id = Operator::identity(layout);
    return {b, s, e * cplx{2.0} - id, e, b.adjoint() * b};
}

LindbladGenerator build_full_model(const CircuitParams& p, const FullModelOptions& options) {
    p.validate();
    const ModeLayout layout = ModeLayout::detector(p.buffer_dim, p.waste_dim);
    const DetectorOperators ops = detector_operators(layout);
    const Operator w = annihilation(layout, "waste");
    const Operator nb = ops.buffer_number;
    const Operator nw = w.adjoint() * w;
    const Operator ne = ops.excited;

    const cplx g3 = three_wave_rate(p.xi_p, p.chi.qb, p.chi.qw);
    const double knl = nonlinear_rate(g3, p.kappa_w, p.detuning(), p.chi.qw).kappa_nl;

    if (options.buffer_input) {
        const double eps = std::sqrt(p.kappa_b) * std::abs(options.buffer_input->amplitude);
        const double beta = 2.0 * eps / (p.kappa_b + knl);
        check_drive_truncation(beta * beta, p.buffer_dim, "buffer");
    }
    if (options.waste_drive) {
        const double alpha = 2.0 * std::abs(options.waste_drive->amplitude) / p.kappa_w;
        check_drive_truncation(alpha * alpha, p.waste_dim, "waste");
    }

    Operator h = nw * cplx{p.detuning()};
    h = h - embed(layout, "buffer", kerr_local(p.buffer_dim)) * cplx{0.5 * p.chi.bb};
    h = h - embed(layout, "waste", kerr_local(p.waste_dim)) * cplx{0.5 * p.chi.ww};
    h = h - (nb * ne) * cplx{p.chi.qb};
    h = h - (nw * ne) * cplx{p.chi.qw};
    h = h - (nb * nw) * cplx{p.chi.bw};

    const Operator mix = ops.b * w.adjoint() * ops.sigma.adjoint();
    if (!options.pump) h = h + mix * g3 + mix.adjoint() * std::conj(g3);

    LindbladGenerator gen(h);
    if (options.pump) {
        const Envelope s = options.pump->envelope();
        gen.add_drive([s, g3](double t) { return g3 * s(t); }, mix, "pump");
    }
    if (options.buffer_input) {
        const Envelope b_in = options.buffer_input->envelope();
        const double rk = std::sqrt(p.kappa_b);
        gen.add_drive([b_in, rk](double t) { return rk * b_in(t); }, ops.b.adjoint() * (-kI), "buffer_input");
    }
    if (options.waste_drive) gen.add_drive(options.waste_drive->envelope(), w, "waste_drive");

    gen.add_collapse(p.kappa_w, w, "kappa_w");
    gen.add_collapse(p.kappa_b, ops.b, "kappa_b");
    gen.add_collapse(p.kappa_q, ops.sigma, "kappa_q");
    gen.add_collapse(0.5 * p.kappa_phi, ops.sigma_z, "kappa_phi");
    if (p.gamma_up > 0.0) gen.add_collapse(p.gamma_up, ops.sigma.adjoint(), "gamma_up");
    return gen;
}

LindbladGenerator build_reduced_model(const CircuitParams& p, const std::optional<Pulse>& buffer_input,
                                      const ReducedModelFlags& flags, const std::optional<Pulse>& pump) {
    p.validate();
    const ModeLayout layout = ModeLayout::buffer_qubit(p.buffer_dim);
    const DetectorOperators ops = detector_operators(layout);
    const double knl = kappa_nl_in_use(p);
    const double delta_nl = -knl * detuning_ratio(p);

    if (buffer_input) {
        const double eps = std::sqrt(p.kappa_b) * std::abs(buffer_input->amplitude);
        const double beta = 2.0 * eps / (p.kappa_b + knl);
        check_drive_truncation(beta * beta, p.buffer_dim, "buffer");
    }

    Operator h = Operator::zero(layout);
    if (flags.chi_bb) h = h - embed(layout, "buffer", kerr_local(p.buffer_dim)) * cplx{0.5 * p.chi.bb};
    if (flags.chi_qb) h = h - (ops.buffer_number * ops.excited) * cplx{p.chi.qb};
    const Operator shift = ops.buffer_number * (ops.sigma * ops.sigma.adjoint());
    if (flags.delta_nl && !pump) h = h + shift * cplx{delta_nl};

    LindbladGenerator gen(h);
    const Operator jump = ops.b * ops.sigma.adjoint();
    if (pump) {
        // Both kappa_nl and Delta_nl scale with |g3|^2, hence with s(t)^2.
        const Envelope s = pump->envelope();
        gen.add_collapse(knl, jump, "kappa_nl", [s](double t) { return std::norm(s(t)); });
        if (flags.delta_nl && delta_nl != 0.0) {
            gen.add_drive([s, delta_nl](double t) { return cplx{0.5 * delta_nl * std::norm(s(t))}; }, shift,
                          "delta_nl");
        }
    } else {
        gen.add_collapse(knl, jump, "kappa_nl");
    }
    if (buffer_input) {
        const Envelope b_in = buffer_input->envelope();
        const double rk = std::sqrt(p.kappa_b);
        gen.add_drive([b_in, rk](double t) { return rk * b_in(t); }, ops.b.adjoint() * (-kI), "buffer_input");
    }
    gen.add_collapse(p.kappa_b, ops.b, "kappa_b");
    if (flags.qubit_decay) gen.add_collapse(p.kappa_q, ops.sigma, "kappa_q");
    if (flags.dephasing) gen.add_collapse(0.5 * p.kappa_phi, ops.sigma_z, "kappa_phi");
    if (flags.thermal && p.gamma_up > 0.0) gen.add_collapse(p.gamma_up, ops.sigma.adjoint(), "gamma_up");
    return gen;
}

LindbladGenerator build_reset_model(const CircuitParams& p, double epsilon_w, const ResetModelFlags& flags) {
    p.validate();
    const ModeLayout layout = ModeLayout::buffer_qubit(p.buffer_dim);
    const DetectorOperators ops = detector_operators(layout);
    const Operator jump = ops.b * ops.sigma.adjoint();
    const cplx eps_nl = reset_drive(p, epsilon_w);

    LindbladGenerator gen(Operator::zero(layout));
    gen.add_collapse(kappa_nl_in_use(p), jump, "kappa_nl");
    gen.add_collapse(p.kappa_b, ops.b, "kappa_b");
    // eps_nl [X - X^dag, rho] with X = b sigma^dag is -i[H, rho] for H = i(eps_nl X - eps_nl^* X^dag).
    if (eps_nl != cplx{}) gen.add_drive(envelopes::constant(kI * eps_nl), jump, "reset_drive");
    if (flags.qubit_decay) gen.add_collapse(p.kappa_q, ops.sigma, "kappa_q");
    return gen;
}

AdiabaticReport adiabatic_equivalence_check(const CircuitParams& params, const Pulse& buffer_input,
                                            std::span<const double> t_grid, const StepControl& control) {
    CircuitParams p = params;
    p.kappa_nl_override.reset();
    p.validate();

    AdiabaticReport r;
    const cplx g3 = three_wave_rate(p.xi_p, p.chi.qb, p.chi.qw);
    r.g3_over_kappa_w = std::abs(g3) / p.kappa_w;
    r.weak_coupling_warning = 4.0 * r.g3_over_kappa_w > 0.5;

    const LindbladGenerator full = build_full_model(p, {.buffer_input = buffer_input, .waste_drive = std::nullopt, .pump = std::nullopt});
    const LindbladGenerator reduced = build_reduced_model(p, buffer_input);

    const DetectorOperators fo = detector_operators(full.layout());
    const DetectorOperators ro = detector_operators(reduced.layout());
    StepControl c = control;
    c.store_states = false;
    const Trajectory tf = evolve(full, DensityMatrix::fock(full.layout(), {0, 0, 0}), t_grid,
                                 {{"pe", fo.excited}, {"nb", fo.buffer_number}}, c);
    const Trajectory tr = evolve(reduced, DensityMatrix::fock(reduced.layout(), {0, 0}), t_grid,
                                 {{"pe", ro.excited}, {"nb", ro.buffer_number}}, c);

    r.times.assign(t_grid.begin(), t_grid.end());
    r.pe_full = tf.real_series("pe");
    r.pe_reduced = tr.real_series("pe");
    r.n_full = tf.real_series("nb");
    r.n_reduced = tr.real_series("nb");
    double spe = 0.0, sn = 0.0;
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        const double dpe = std::abs(r.pe_full[k] - r.pe_reduced[k]);
        const double dn = std::abs(r.n_full[k] - r.n_reduced[k]);
        r.max_dpe = std::max(r.max_dpe, dpe);
        r.max_dn = std::max(r.max_dn, dn);
        spe += dpe * dpe;
        sn += dn * dn;
    }
    const double n = static_cast<double>(r.times.size());
    r.rms_dpe = std::sqrt(spe / n);
    r.rms_dn = std::sqrt(sn / n);
    return r;
}

}  // namespace photodet
