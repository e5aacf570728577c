#include "photodet/experiments.hpp"

#include "photodet/metrics.hpp"
#include "photodet/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace photodet {

namespace {

double number(const Json& c, const char* key) { return c.at(key).get<double>(); }

std::vector<double> numbers(const Json& c, const char* key) { return c.at(key).get<std::vector<double>>(); }

double hz(double angular) { return angular / kTwoPi; }

void require_increasing(const std::vector<double>& v, const char* key, bool allow_zero) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0 || (allow_zero && v[i] == 0.0))) {
            throw ValidationError(std::string("config: ") + key + " entries must be " + (allow_zero ? ">= 0" : "> 0"));
        }
        if (i > 0 && !(v[i] > v[i - 1])) throw ValidationError(std::string("config: ") + key + " must increase");
    }
}

PulseSweepOptions sweep_options(const Json& c) {
    PulseSweepOptions o;
    o.n_bars = numbers(c, "pulse_n_bar");
    o.pump_ramp = number(c, "pump_ramp_s");
    o.readout_delay = number(c, "readout_delay_s");
    if (!(o.pump_ramp > 0.0)) throw ValidationError("config: pump_ramp_s must be > 0");
    if (!(o.readout_delay >= 0.0)) throw ValidationError("config: readout_delay_s must be >= 0");
    return o;
}

ExperimentOutput derive_params(const Json& c) {
    const CircuitParams p = params_from_config(c);
    const double eps_w = reset_drive_from_config(c, p);
    const DerivedRates d = derive_rates(p, eps_w);
    const PumpFrequency fp = pump_frequency(p);
    const BareFrequencies bare = bare_frequencies(p);
    const PurcellRates purcell =
        purcell_rates(kTwoPi * number(c, "purcell_G_hz"), kTwoPi * number(c, "purcell_kappa_hz"),
                      kTwoPi * number(c, "purcell_freq_hz"), bare.omega_w, kTwoPi * number(c, "g_qw_hz"), bare.omega_q);

    ExperimentOutput out;
    out.columns = {{"quantity", "", "derived quantity"}, {"value", "", "value in the unit column"},
                   {"unit", "", "unit of value"}};
    auto add = [&](const std::string& name, double value, const std::string& unit) {
        out.rows.push_back({name, value, unit});
        out.summary[name] = value;
    };
    add("g3_abs_hz", hz(std::abs(d.g3)), "Hz");
    add("g3_over_kappa_w", std::abs(d.g3) / p.kappa_w, "1");
    add("kappa_nl_derived_hz", hz(d.kappa_nl), "Hz");
    add("kappa_nl_used_hz", hz(d.kappa_nl_used), "Hz");
    add("delta_nl_hz", hz(d.delta_nl) + 0.0, "Hz");
    add("eta", d.eta, "1");
    add("eta_from_derived_kappa_nl", efficiency(d.kappa_nl, p.kappa_b), "1");
    add("pump_freq_hz", hz(fp.omega_p), "Hz");
    add("pump_freq_intercept_hz", hz(fp.omega_p0), "Hz");
    add("pump_freq_slope_hz", hz(fp.slope), "Hz");
    add("spurious_pump_freq_hz", hz(spurious_pump_frequency(p)), "Hz");
    add("chi_bb_hz", hz(p.chi.bb), "Hz");
    add("chi_ww_hz", hz(p.chi.ww), "Hz");
    add("chi_bw_hz", hz(p.chi.bw), "Hz");
    add("kappa_phi_per_s", p.kappa_phi, "1/s");
    add("kappa_w_purcell_hz", hz(purcell.kappa_w_eff), "Hz");
    add("kappa_q_purcell_per_s", purcell.kappa_q_w, "1/s");
    add("T1_purcell_limit_s", purcell.kappa_q_w > 0.0 ? 1.0 / purcell.kappa_q_w : INFINITY, "s");
    add("epsilon_w_hz", hz(eps_w), "Hz");
    add("kappa_reset_per_s", d.kappa_reset.value_or(0.0), "1/s");
    add("reset_time_s", d.kappa_reset.value_or(0.0) > 0.0 ? 1.0 / *d.kappa_reset : INFINITY, "s");
    if (4.0 * std::abs(d.g3) / p.kappa_w > 0.5) {
        out.warnings.push_back("4|g3|/kappa_w > 0.5: waste elimination is outside its weak-coupling regime");
    }
    return out;
}

ExperimentOutput efficiency_curve(const Json& c) {
    const CircuitParams p = params_from_config(c);
    const PulseSweepOptions o = sweep_options(c);
    const double t_b = number(c, "efficiency_t_b_s");
    if (!(t_b > 0.0)) throw ValidationError("config: efficiency_t_b_s must be > 0");
    std::vector<double> n_bars = numbers(c, "efficiency_n_bar");
    require_increasing(n_bars, "efficiency_n_bar", false);

    DetectionCurve curve;
    curve.kind = Abscissa::photon_number;
    curve.label = "measured";
    curve.config_hash = config_hash(c);
    for (double n : n_bars) {
        curve.x.push_back(n);
        curve.p_e.push_back(pulse_click_probability(p, Regime::measured, t_b, n, o));
    }
    curve.validate();
    const FitResult fit = fit_efficiency(curve);

    ExperimentOutput out;
    out.columns = {{"n_bar", "photons", "mean photon number of the buffer pulse"},
                   {"p_e", "1", "simulated click probability"},
                   {"p_e_fit", "1", "p0 + eta (1 - exp(-n_bar))"}};
    const double p0 = fit.value("p0"), eta = fit.value("eta");
    for (std::size_t i = 0; i < n_bars.size(); ++i) {
        out.rows.push_back({n_bars[i], curve.p_e[i], p0 + eta * (-std::expm1(-n_bars[i]))});
    }
    out.summary["t_b_s"] = t_b;
    out.summary["eta"] = eta;
    out.summary["eta_sigma"] = fit.sigma("eta");
    out.summary["p0"] = p0;
    out.summary["p0_sigma"] = fit.sigma("p0");
    out.summary["residual_rms"] = fit.residual_rms;
    out.summary["eta_formula"] = derive_rates(p).eta;
    out.summary["fit_flags"] = fit.flags;
    return out;
}

ExperimentOutput pulse_length_sweep(const Json& c) {
    const CircuitParams p = params_from_config(c);
    const PulseSweepOptions o = sweep_options(c);
    const std::vector<double> t_b = numbers(c, "pulse_t_b_s");
    require_increasing(t_b, "pulse_t_b_s", false);
    const std::vector<Regime> regimes{Regime::ideal, Regime::infinite_bandwidth, Regime::no_decay, Regime::measured};
    const std::vector<DetectionCurve> curves = efficiency_vs_pulse_length(p, regimes, t_b, o);

    ExperimentOutput out;
    out.columns.push_back({"t_b_s", "s", "buffer pulse length"});
    for (Regime r : regimes) out.columns.push_back({"eta_" + to_string(r), "1", "fitted efficiency, " + to_string(r)});
    for (std::size_t i = 0; i < t_b.size(); ++i) {
        std::vector<Cell> row{t_b[i]};
        for (const auto& curve : curves) row.push_back(curve.p_e[i]);
        out.rows.push_back(std::move(row));
    }
    // ideal >= infinite_bandwidth and ideal >= no_decay >= measured at every t_b.
    bool ordered = true;
    for (std::size_t i = 0; i < t_b.size(); ++i) {
        const double red = curves[0].p_e[i], orange = curves[1].p_e[i], green = curves[2].p_e[i], blue = curves[3].p_e[i];
        ordered = ordered && red >= orange - 1e-6 && red >= green - 1e-6 && green >= blue - 1e-6;
    }
    for (std::size_t r = 0; r < curves.size(); ++r) {
        const auto it = std::max_element(curves[r].p_e.begin(), curves[r].p_e.end());
        const std::string key = to_string(regimes[r]);
        out.summary["eta_max_" + key] = *it;
        out.summary["t_b_at_max_" + key + "_s"] = t_b[static_cast<std::size_t>(it - curves[r].p_e.begin())];
    }
    out.summary["regimes_ordered"] = ordered;
    out.summary["eta_formula"] = derive_rates(p).eta;
    return out;
}

ExperimentOutput dark_count(const Json& c) {
    CircuitParams p = params_from_config(c);
    const double p0 = number(c, "dark_p0"), p_inf = number(c, "dark_p_inf");
    if (!(p0 >= 0.0 && p0 < 1.0 && p_inf >= 0.0 && p_inf < 1.0)) {
        throw ValidationError("config: dark_p0 and dark_p_inf must lie in [0, 1)");
    }
    if (number(c, "gamma_up_per_s") <= 0.0) {
        if (!(p.kappa_q > 0.0)) throw ValidationError("dark-count: needs T1_s or gamma_up_per_s");
        p.gamma_up = p_inf / (1.0 - p_inf) * p.kappa_q;
    }
    std::vector<double> t = numbers(c, "dark_t_p_s");
    require_increasing(t, "dark_t_p_s", true);
    const double linear_max = number(c, "dark_linear_max_s");

    const LindbladGenerator gen = build_reduced_model(p, std::nullopt);
    const ModeLayout& layout = gen.layout();
    const DetectorOperators ops = detector_operators(layout);
    const Matrix mixed = (1.0 - p0) * DensityMatrix::fock(layout, {0, 0}).matrix() +
                         p0 * DensityMatrix::fock(layout, {0, 1}).matrix();
    std::vector<double> grid = t;
    if (grid.front() > 0.0) grid.insert(grid.begin(), 0.0);
    StepControl control;
    control.store_states = false;
    const Trajectory tr = evolve(gen, DensityMatrix(layout, mixed), grid, {{"pe", ops.excited}}, control);
    std::vector<double> pe = tr.real_series("pe");
    if (grid.size() != t.size()) pe.erase(pe.begin());

    DarkCountFit fit = fit_dark_count(t, pe);
    // Linear model only over the early window (at least four points).
    std::size_t n_early = 0;
    while (n_early < t.size() && t[n_early] <= linear_max) ++n_early;
    n_early = std::min(t.size(), std::max<std::size_t>(n_early, 4));
    fit.linear = fit_dark_count(std::span(t).first(n_early), std::span(pe).first(n_early)).linear;
    ExperimentOutput out;
    out.columns = {{"t_p_s", "s", "pump-on time"},
                   {"p_e", "1", "simulated excited-state probability"},
                   {"p_e_linear", "1", "linear fit p0 + gamma_dc t"},
                   {"p_e_exponential", "1", "exponential fit"}};
    const double lp0 = fit.linear.value("p0"), gdc = fit.linear.value("gamma_dc");
    for (std::size_t i = 0; i < t.size(); ++i) {
        double e = NAN;
        if (fit.exponential_valid) {
            e = fit.exponential.value("p_inf") +
                (fit.exponential.value("p0") - fit.exponential.value("p_inf")) * std::exp(-t[i] / fit.exponential.value("T1"));
        }
        out.rows.push_back({t[i], pe[i], lp0 + gdc * t[i], e});
    }
    out.summary["gamma_up_per_s"] = p.gamma_up;
    out.summary["gamma_dc_per_ms"] = gdc * 1e-3;
    out.summary["gamma_dc_sigma_per_ms"] = fit.linear.sigma("gamma_dc") * 1e-3;
    out.summary["p0_linear"] = lp0;
    out.summary["exponential_valid"] = fit.exponential_valid;
    if (fit.exponential_valid) {
        out.summary["p0_exponential"] = fit.exponential.value("p0");
        out.summary["p_inf_exponential"] = fit.exponential.value("p_inf");
        out.summary["T1_fit_s"] = fit.exponential.value("T1");
    } else {
        out.warnings.push_back("exponential dark-count fit did not converge");
    }
    out.summary["linear_window_s"] = linear_max;
    return out;
}

ExperimentOutput reset_decay(const Json& c) {
    const CircuitParams p = params_from_config(c);
    const double eps_w = reset_drive_from_config(c, p);
    const double duration = number(c, "reset_duration_s");
    if (!(duration > 0.0)) throw ValidationError("config: reset_duration_s must be > 0");
    const LindbladGenerator gen = build_reset_model(p, eps_w, {c.at("reset_include_t1").get<bool>()});
    const DetectorOperators ops = detector_operators(gen.layout());
    const std::vector<double> grid = linspace(0.0, duration, 501);
    StepControl control;
    control.store_states = false;
    const Trajectory tr = evolve(gen, DensityMatrix::fock(gen.layout(), {0, 1}), grid, {{"pe", ops.excited}}, control);
    const std::vector<double> pe = tr.real_series("pe");
    const FitResult fit = fit_decay_rate(grid, pe);
    const double k_formula = reset_rate(p, eps_w);
    const double k_fit = fit.value("rate");

    ExperimentOutput out;
    out.columns = {{"time_s", "s", "time since the reset drive turned on"},
                   {"p_e_reset", "1", "excited-state probability with the reset drive"},
                   {"p_e_free", "1", "free decay exp(-t/T1)"}};
    for (std::size_t i = 0; i < grid.size(); ++i) out.rows.push_back({grid[i], pe[i], std::exp(-p.kappa_q * grid[i])});
    out.summary["epsilon_w_hz"] = hz(eps_w);
    out.summary["epsilon_nl_hz"] = hz(std::abs(reset_drive(p, eps_w)));
    out.summary["kappa_reset_formula_per_s"] = k_formula;
    out.summary["kappa_reset_fit_per_s"] = k_fit;
    out.summary["kappa_reset_fit_sigma_per_s"] = fit.sigma("rate");
    out.summary["tau_formula_s"] = 1.0 / k_formula;
    out.summary["tau_fit_s"] = 1.0 / k_fit;
    out.summary["relative_deviation"] = k_fit / k_formula - 1.0;
    out.summary["fit_flags"] = fit.flags;
    return out;
}

ExperimentOutput adiabatic_check(const Json& c) {
    const CircuitParams p = params_from_config(c);
    const double n_bar = number(c, "adiabatic_n_bar"), duration = number(c, "adiabatic_duration_s");
    const double scale = number(c, "adiabatic_kappa_w_scale");
    if (!(n_bar >= 0.0 && duration > 0.0 && scale > 0.0)) {
        throw ValidationError("config: adiabatic_n_bar >= 0, adiabatic_duration_s > 0, adiabatic_kappa_w_scale > 0");
    }
    const Pulse input = Pulse::constant(std::sqrt(n_bar / duration));
    const std::vector<double> grid = linspace(0.0, duration, 201);
    const AdiabaticReport base = adiabatic_equivalence_check(p, input, grid);
    CircuitParams wide = p;
    wide.kappa_w *= scale;
    const AdiabaticReport scaled = adiabatic_equivalence_check(wide, input, grid);

    ExperimentOutput out;
    out.columns = {{"time_s", "s", "time"},
                   {"pe_full", "1", "P_e, three-mode model"},
                   {"pe_reduced", "1", "P_e, waste-eliminated model"},
                   {"n_full", "photons", "buffer occupation, three-mode model"},
                   {"n_reduced", "photons", "buffer occupation, waste-eliminated model"},
                   {"pe_full_scaled", "1", "P_e, three-mode model with kappa_w scaled"},
                   {"pe_reduced_scaled", "1", "P_e, waste-eliminated model with kappa_w scaled"}};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out.rows.push_back({grid[i], base.pe_full[i], base.pe_reduced[i], base.n_full[i], base.n_reduced[i],
                            scaled.pe_full[i], scaled.pe_reduced[i]});
    }
    out.summary["g3_over_kappa_w"] = base.g3_over_kappa_w;
    out.summary["max_dpe"] = base.max_dpe;
    out.summary["rms_dpe"] = base.rms_dpe;
    out.summary["max_dn"] = base.max_dn;
    out.summary["rms_dn"] = base.rms_dn;
    out.summary["kappa_w_scale"] = scale;
    out.summary["max_dpe_scaled"] = scaled.max_dpe;
    out.summary["max_dn_scaled"] = scaled.max_dn;
    out.summary["discrepancy_shrinks"] = scaled.max_dpe < base.max_dpe;
    out.summary["weak_coupling_warning"] = base.weak_coupling_warning;
    if (base.weak_coupling_warning) {
        out.warnings.push_back("4|g3|/kappa_w > 0.5: the waste is not adiabatically eliminable at these parameters");
    }
    return out;
}

TraceOptions trace_options(const Json& c, int threads) {
    TraceOptions t;
    t.gain = number(c, "tomography_gain");
    t.noise_quanta = number(c, "tomography_noise_quanta");
    t.n_traces = c.at("tomography_n_traces").get<int>();
    t.sample_period = number(c, "tomography_sample_period_s");
    t.seed = c.at("seed").get<std::uint64_t>();
    t.threads = threads;
    if (!(t.gain > 0.0 && t.noise_quanta >= 0.0 && t.n_traces >= 100 && t.sample_period > 0.0)) {
        throw ValidationError("config: tomography_gain > 0, noise_quanta >= 0, n_traces >= 100, sample_period > 0");
    }
    return t;
}

RoundtripOptions roundtrip_options(const Json& c, int threads) {
    RoundtripOptions o;
    o.traces = trace_options(c, threads);
    o.n_samples = c.at("tomography_n_samples").get<int>();
    o.n_fock = c.at("tomography_n_fock").get<int>();
    o.calibration_amplitudes = numbers(c, "gain_amplitudes");
    if (o.n_samples < 2 || o.n_fock < 2) throw ValidationError("config: tomography_n_samples, n_fock must be >= 2");
    return o;
}

std::string sanitize(std::string s) {
    for (char& ch : s) {
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-')) ch = '_';
    }
    return s;
}

ExperimentOutput tomography(const Json& c, int threads) {
    const RoundtripOptions o = roundtrip_options(c, threads);
    const std::string which = c.at("tomography_state").get<std::string>();
    std::vector<std::string> states;
    if (which == "all") {
        states = {"vacuum", "fock1", "coherent:0.6", "thermal:0.5"};
    } else {
        named_state(which, o.n_fock);  // validates the name early
        states = {which};
    }
    const RoundtripResult r = tomography_roundtrip(states, o);

    ExperimentOutput out;
    out.columns = {{"state", "", "prepared state"},
                   {"fidelity", "1", "Uhlmann fidelity of the reconstruction with the prepared state"},
                   {"moment_distance", "1", "squared moment mismatch at the MLE optimum"},
                   {"n_mean", "photons", "<a^dag a> from the inverted moments"},
                   {"n_mean_sigma", "photons", "jackknife standard error of n_mean"},
                   {"g2_numerator", "1", "<a^dag^2 a^2> from the inverted moments"},
                   {"a_re", "1", "Re <a>"},
                   {"a_im", "1", "Im <a>"},
                   {"own_mode_overlap", "1", "overlap of the mode extracted from this ensemble with the true mode"},
                   {"mle_converged", "bool", "1 when the reconstruction converged"}};
    Json fids = Json::object();
    std::vector<cplx> points;
    for (int i = 0; i <= 40; ++i) {
        for (int j = 0; j <= 40; ++j) points.emplace_back(-3.0 + 0.15 * i, -3.0 + 0.15 * j);
    }
    for (const StateRoundtrip& s : r.states) {
        out.rows.push_back({s.name, s.fidelity, s.reconstruction.distance, s.signal.at(1, 1).real(),
                            s.signal.sigma(1, 1), s.signal.at(2, 2).real(), s.signal.at(0, 1).real(),
                            s.signal.at(0, 1).imag(), s.own_mode_overlap,
                            static_cast<long long>(s.reconstruction.converged)});
        fids[s.name] = s.fidelity;
        const std::string tag = sanitize(s.name);
        out.extras.emplace_back(tag + "_rho.json", density_matrix_json(s.reconstruction.rho));
        out.extras.emplace_back(tag + "_signal_moments.json", moment_table_json(s.signal));
        const DensityMatrix target = named_state(s.name, o.n_fock);
        const std::vector<double> w_rec = wigner(s.reconstruction.rho, points);
        const std::vector<double> w_true = wigner(target, points);
        std::ostringstream csv;
        csv << "re_alpha,im_alpha,wigner_reconstructed,wigner_prepared\n";
        for (std::size_t k = 0; k < points.size(); ++k) {
            csv << format_double(points[k].real()) << ',' << format_double(points[k].imag()) << ','
                << format_double(w_rec[k]) << ',' << format_double(w_true[k]) << '\n';
        }
        out.extras.emplace_back(tag + "_wigner.csv", csv.str());
        if (wigner_truncation_warning(s.reconstruction.rho, points)) {
            out.warnings.push_back("wigner grid for " + s.name + " extends past |alpha|^2 = n_fock/4");
        }
    }
    out.extras.emplace_back("noise_moments.json", moment_table_json(r.noise));
    out.summary["mode_overlap"] = r.mode_overlap;
    out.summary["mode_top_excess"] = r.herald.top_excess;
    out.summary["gain_estimate"] = r.gain.gain;
    out.summary["gain_sigma"] = r.gain.sigma;
    out.summary["gain_true"] = o.traces.gain;
    out.summary["gain_relative_error"] = r.gain.gain / o.traces.gain - 1.0;
    out.summary["fidelities"] = fids;
    out.summary["wigner_convention"] = "W(alpha) = (2/pi) Tr[D(-alpha) rho D(alpha) P]; vacuum peak 2/pi";
    out.summary["moment_convention"] = "entry (n, m) = <(a^dag)^n a^m>";
    return out;
}

ExperimentOutput gain_calibration(const Json& c, int threads) {
    const RoundtripOptions o = roundtrip_options(c, threads);
    const TemporalMode truth = emission_mode(o.n_samples, o.traces.sample_period, o.mode_kappa, o.mode_detuning);
    const int gdim = o.generation_dim;
    auto run = [&](const DensityMatrix& rho, std::uint64_t salt) {
        TraceOptions t = o.traces;
        t.seed = splitmix64(o.traces.seed + salt);
        return generate_traces(rho, truth, t);
    };
    // Same seeds as the round trip so both experiments agree on the gain.
    const ModeExtraction herald = extract_mode(run(fock_state(gdim, 1), 1));
    std::vector<MomentTable> tables;
    std::vector<cplx> amps;
    for (std::size_t k = 0; k < o.calibration_amplitudes.size(); ++k) {
        const double a = o.calibration_amplitudes[k];
        if (!(a > 0.0 && a * a <= gdim / 4.0)) throw ValidationError("config: gain_amplitudes must lie in (0, 2]");
        tables.push_back(raw_moments(project(run(field_coherent_state(gdim, a), 10 + k), herald.mode)));
        amps.push_back(a);
    }
    const GainCalibration g = calibrate_gain(tables, amps);

    ExperimentOutput out;
    out.columns = {{"amplitude", "sqrt(photons)", "coherent amplitude of the calibration state"},
                   {"s_mean_re", "sqrt(G photons)", "Re <S>"},
                   {"s_mean_im", "sqrt(G photons)", "Im <S>"},
                   {"s_mean_sigma", "sqrt(G photons)", "jackknife standard error of <S>"}};
    for (std::size_t k = 0; k < tables.size(); ++k) {
        out.rows.push_back({o.calibration_amplitudes[k], tables[k].at(0, 1).real(), tables[k].at(0, 1).imag(),
                            tables[k].sigma(0, 1)});
    }
    out.summary["gain_estimate"] = g.gain;
    out.summary["gain_sigma"] = g.sigma;
    out.summary["gain_true"] = o.traces.gain;
    out.summary["gain_relative_error"] = g.gain / o.traces.gain - 1.0;
    out.summary["slope_phase_rad"] = std::arg(g.slope);
    out.summary["mode_overlap"] = mode_overlap(herald.mode, truth);
    return out;
}

using Runner = std::function<ExperimentOutput(const Json&, int)>;

const std::map<std::string, Runner>& registry() {
    static const std::map<std::string, Runner> r{
        {"derive-params", [](const Json& c, int) { return derive_params(c); }},
        {"efficiency-curve", [](const Json& c, int) { return efficiency_curve(c); }},
        {"pulse-length-sweep", [](const Json& c, int) { return pulse_length_sweep(c); }},
        {"dark-count", [](const Json& c, int) { return dark_count(c); }},
        {"reset-decay", [](const Json& c, int) { return reset_decay(c); }},
        {"adiabatic-check", [](const Json& c, int) { return adiabatic_check(c); }},
        {"tomography-roundtrip", tomography},
        {"gain-calibration", gain_calibration},
    };
    return r;
}

std::string cell_text(const Cell& cell) {
    if (const double* d = std::get_if<double>(&cell)) return format_double(*d);
    if (const long long* i = std::get_if<long long>(&cell)) return std::to_string(*i);
    const std::string& s = std::get<std::string>(cell);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char ch : s) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    return quoted + '"';
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + path.string());
    os << content;
    if (!os) throw NumericalError("write failed: " + path.string());
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, _] : registry()) v.push_back(k);
        return v;
    }();
    return names;
}

ExperimentOutput run_experiment(const std::string& name, const Json& config, int threads) {
    const auto it = registry().find(name);
    if (it == registry().end()) throw ValidationError("unknown experiment '" + name + "'");
    params_from_config(config);
    TruncationMonitor monitor;
    ExperimentOutput out = it->second(config, threads);
    out.summary["max_top_level_population"] = monitor.max_population();
    if (monitor.exceeded()) {
        out.warnings.push_back("Fock truncation: top level of mode '" + monitor.worst_mode() + "' reached population " +
                               format_double(monitor.max_population()) + "; increase its dimension");
    }
    return out;
}

RunArtifacts write_artifacts(const std::filesystem::path& out_dir, const std::string& experiment, const Json& config,
                             const ExperimentOutput& output) {
    std::filesystem::create_directories(out_dir);
    RunArtifacts a;
    a.hash = config_hash(config);
    a.config_file = out_dir / ("config_" + a.hash + ".json");
    a.csv_file = out_dir / (experiment + "_" + a.hash + ".csv");
    a.columns_file = out_dir / (experiment + "_" + a.hash + ".columns.json");
    a.summary_file = out_dir / ("summary_" + experiment + "_" + a.hash + ".json");

    Json snapshot = Json::object();
    snapshot["_config_hash"] = a.hash;
    for (const auto& [k, v] : config.items()) snapshot[k] = v;
    write_file(a.config_file, snapshot.dump(2) + "\n");

    std::ostringstream csv;
    csv << "# config_hash: " << a.hash << "\n# experiment: " << experiment << "\n";
    for (std::size_t i = 0; i < output.columns.size(); ++i) csv << (i ? "," : "") << output.columns[i].name;
    csv << '\n';
    for (const auto& row : output.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << cell_text(row[i]);
        csv << '\n';
    }
    write_file(a.csv_file, csv.str());

    Json cols = Json::array();
    for (const Column& col : output.columns) {
        cols.push_back({{"name", col.name}, {"unit", col.unit}, {"description", col.description}});
    }
    write_file(a.columns_file, Json{{"config_hash", a.hash}, {"experiment", experiment}, {"columns", cols}}.dump(2) + "\n");

    a.summary = Json{{"config_hash", a.hash}, {"experiment", experiment}, {"summary", output.summary},
                     {"warnings", output.warnings}};
    write_file(a.summary_file, a.summary.dump(2) + "\n");

    for (const auto& [suffix, content] : output.extras) {
        const std::filesystem::path path = out_dir / (experiment + "_" + a.hash + "_" + suffix);
        std::string body = content;
        if (suffix.ends_with(".csv")) {
            body = "# config_hash: " + a.hash + "\n" + content;
        } else if (suffix.ends_with(".json")) {
            Json j = Json::parse(content);
            if (j.is_object()) {
                Json wrapped = Json{{"config_hash", a.hash}};
                for (const auto& [k, v] : j.items()) wrapped[k] = v;
                j = wrapped;
            }
            body = j.dump() + "\n";
        }
        write_file(path, body);
    }
    return a;
}

}  // namespace photodet
