#include "photodet/experiments.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace photodet {

namespace {

bool compatible(const Json& def, const Json& value) {
    if (def.is_null()) return value.is_null() || value.is_number();
    if (def.is_number_integer()) return value.is_number_integer();
    if (def.is_number()) return value.is_number();
    if (def.is_string()) return value.is_string();
    if (def.is_boolean()) return value.is_boolean();
    if (def.is_array()) {
        if (!value.is_array() || value.empty()) return false;
        for (const auto& v : value) {
            if (!v.is_number()) return false;
        }
        return true;
    }
    return false;
}

std::string type_hint(const Json& def) {
    if (def.is_null()) return "a number or null";
    if (def.is_number_integer()) return "an integer";
    if (def.is_number()) return "a number";
    if (def.is_string()) return "a string";
    if (def.is_boolean()) return "a boolean";
    return "a non-empty array of numbers";
}

void merge_key(Json& config, const std::string& key, const Json& value, const std::string& origin) {
    if (!config.contains(key)) throw ValidationError(origin + ": unknown config key '" + key + "'");
    const Json def = default_config().at(key);
    if (!compatible(def, value)) {
        throw ValidationError(origin + ": key '" + key + "' must be " + type_hint(def) + " (got " + value.dump() + ")");
    }
    config[key] = value;
}

std::optional<double> opt_number(const Json& c, const char* key) {
    const Json& v = c.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

double number(const Json& c, const char* key) { return c.at(key).get<double>(); }

}  // namespace

Json default_config() {
    return Json{
        {"seed", 1},
        {"buffer_dim", 6},
        {"waste_dim", 6},
        {"omega_q_hz", 4.532e9},
        {"omega_b_g_hz", 5.495e9},
        {"omega_w_e_hz", 5.770e9},
        {"chi_qq_hz", 146e6},
        {"chi_qb_hz", 1.02e6},
        {"chi_qw_hz", 2.73e6},
        {"chi_bb_hz", nullptr},
        {"chi_ww_hz", nullptr},
        {"chi_bw_hz", nullptr},
        {"E_J_hz", nullptr},
        {"phi_q", nullptr},
        {"phi_b", nullptr},
        {"phi_w", nullptr},
        {"kappa_b_hz", 1.0e6},
        {"kappa_w_hz", 2.4e6},
        {"T1_s", 7.7e-6},
        {"T2star_s", 10e-6},
        {"gamma_up_per_s", 0.0},
        {"xi_p_sq", 0.076},
        {"xi_p_phase_rad", 0.0},
        {"Delta_hz", nullptr},
        {"kappa_nl_hz", nullptr},
        {"purcell_G_hz", 5.6e6},
        {"purcell_kappa_hz", 36e6},
        {"purcell_freq_hz", 5.786e9},
        {"g_qw_hz", 41e6},
        {"epsilon_w_hz", nullptr},
        {"reset_time_s", 370e-9},
        {"reset_duration_s", 2.5e-6},
        {"reset_include_t1", false},
        {"pump_ramp_s", 500e-9},
        {"readout_delay_s", 500e-9},
        {"efficiency_t_b_s", 2e-6},
        {"efficiency_n_bar", {0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0}},
        {"pulse_t_b_s", {0.25e-6, 0.5e-6, 1e-6, 1.5e-6, 2e-6, 3e-6, 4e-6, 6e-6}},
        {"pulse_n_bar", {0.05, 0.1, 0.2}},
        {"dark_p0", 0.003},
        {"dark_p_inf", 0.015},
        {"dark_t_p_s", {0.0, 1e-6, 2e-6, 3e-6, 5e-6, 7.5e-6, 10e-6, 15e-6, 20e-6, 30e-6, 40e-6}},
        {"dark_linear_max_s", 3e-6},
        {"adiabatic_n_bar", 0.5},
        {"adiabatic_duration_s", 4e-6},
        {"adiabatic_kappa_w_scale", 10.0},
        {"tomography_state", "all"},
        {"tomography_gain", 100.0},
        {"tomography_noise_quanta", 2.0},
        {"tomography_n_traces", 50000},
        {"tomography_n_samples", 40},
        {"tomography_sample_period_s", 20e-9},
        {"tomography_n_fock", 6},
        {"gain_amplitudes", {0.5, 1.0, 2.0}},
    };
}

Json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    Json parsed;
    try {
        parsed = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    if (!parsed.is_object()) throw ValidationError("config " + path.string() + ": expected a JSON object");
    Json config = default_config();
    for (const auto& [key, value] : parsed.items()) {
        if (key.starts_with("_")) continue;  // comments
        merge_key(config, key, value, "config " + path.string());
    }
    return config;
}

Json resolve_config(const std::optional<std::filesystem::path>& file,
                    const std::vector<std::pair<std::string, std::string>>& overrides) {
    Json config = file ? load_config_file(*file) : default_config();
    for (const auto& [key, text] : overrides) {
        Json value;
        try {
            value = Json::parse(text);
        } catch (const Json::exception&) {
            value = text;
        }
        merge_key(config, key, value, "--set");
    }
    params_from_config(config);  // validates
    return config;
}

std::string canonical_config(const Json& config) { return nlohmann::json::parse(config.dump()).dump(); }

std::string config_hash(const Json& config) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical_config(config)) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

CircuitParams params_from_config(const Json& c) {
    CircuitParams p;
    try {
        p.omega_q = kTwoPi * number(c, "omega_q_hz");
        p.omega_b_g = kTwoPi * number(c, "omega_b_g_hz");
        p.omega_w_e = kTwoPi * number(c, "omega_w_e_hz");

        const double chi_qq = kTwoPi * number(c, "chi_qq_hz");
        const double chi_qb = kTwoPi * number(c, "chi_qb_hz");
        const double chi_qw = kTwoPi * number(c, "chi_qw_hz");
        const auto E_J = opt_number(c, "E_J_hz");
        const auto phi_q = opt_number(c, "phi_q"), phi_b = opt_number(c, "phi_b"), phi_w = opt_number(c, "phi_w");
        ChiSet derived = complete_chis(chi_qq, chi_qb, chi_qw);
        if (E_J || phi_q || phi_b || phi_w) {
            if (!(E_J && phi_q && phi_b && phi_w)) {
                throw ValidationError("config: E_J_hz, phi_q, phi_b, phi_w must be given together");
            }
            p.micro = MicroscopicParams{kTwoPi * *E_J, *phi_q, *phi_b, *phi_w};
            const ChiSet micro = chi_from_circuit(p.micro->E_J, *phi_q, *phi_b, *phi_w);
            derived.bb = micro.bb;
            derived.ww = micro.ww;
            derived.bw = micro.bw;
        }
        p.chi = derived;
        if (auto v = opt_number(c, "chi_bb_hz")) p.chi.bb = kTwoPi * *v;
        if (auto v = opt_number(c, "chi_ww_hz")) p.chi.ww = kTwoPi * *v;
        if (auto v = opt_number(c, "chi_bw_hz")) p.chi.bw = kTwoPi * *v;

        p.kappa_b = kTwoPi * number(c, "kappa_b_hz");
        p.kappa_w = kTwoPi * number(c, "kappa_w_hz");
        const auto T1 = opt_number(c, "T1_s");
        if (T1 && !(*T1 > 0.0)) throw ValidationError("config: T1_s must be > 0 or null");
        p.kappa_q = T1 ? 1.0 / *T1 : 0.0;
        if (auto T2 = opt_number(c, "T2star_s")) {
            p.kappa_phi = dephasing_from_t2star(T1.value_or(std::numeric_limits<double>::infinity()), *T2);
        }
        p.gamma_up = number(c, "gamma_up_per_s");

        const double xi2 = number(c, "xi_p_sq");
        if (!(xi2 >= 0.0)) throw ValidationError("config: xi_p_sq must be >= 0");
        p.xi_p = std::polar(std::sqrt(xi2), number(c, "xi_p_phase_rad"));
        if (auto v = opt_number(c, "Delta_hz")) p.Delta = kTwoPi * *v;
        if (auto v = opt_number(c, "kappa_nl_hz")) p.kappa_nl_override = kTwoPi * *v;
        p.buffer_dim = c.at("buffer_dim").get<int>();
        p.waste_dim = c.at("waste_dim").get<int>();
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    p.validate();
    return p;
}

double reset_drive_from_config(const Json& config, const CircuitParams& p) {
    if (auto eps = opt_number(config, "epsilon_w_hz")) {
        if (!(*eps >= 0.0)) throw ValidationError("config: epsilon_w_hz must be >= 0");
        return kTwoPi * *eps;
    }
    const double tau = number(config, "reset_time_s");
    if (!(tau > 0.0)) throw ValidationError("config: reset_time_s must be > 0");
    return reset_drive_for_rate(p, 1.0 / tau);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace photodet
