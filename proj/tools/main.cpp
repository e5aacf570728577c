#include "photodet/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSweepFailure = 4;

struct Common {
    std::string experiment;
    std::string config_positional;
    std::string config_flag;
    std::string out = "out";
    std::optional<long long> seed;
    std::vector<std::string> sets;
    int threads = 0;
    std::optional<std::string> state;
};

void add_common(CLI::App& cmd, Common& c) {
    cmd.add_option("experiment", c.experiment, "experiment name")
        ->required()
        ->check(CLI::IsMember(photodet::experiment_names()));
    cmd.add_option("config_file", c.config_positional, "device config JSON");
    cmd.add_option("--config,-c", c.config_flag, "device config JSON");
    cmd.add_option("--out,-o", c.out, "output directory")->capture_default_str();
    cmd.add_option("--seed", c.seed, "random seed (stored in the config)");
    cmd.add_option("--set", c.sets, "override key=value (repeatable)");
    cmd.add_option("--threads", c.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    cmd.add_option("--state", c.state, "tomography state: all, vacuum, fock<n>, coherent:<a>, thermal:<n>");
}

photodet::Json resolve(const Common& c) {
    if (!c.config_positional.empty() && !c.config_flag.empty() && c.config_positional != c.config_flag) {
        throw photodet::ValidationError("config given both positionally and with --config");
    }
    const std::string path = c.config_flag.empty() ? c.config_positional : c.config_flag;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw photodet::ValidationError("--set expects key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) overrides.emplace_back("seed", std::to_string(*c.seed));
    if (c.state) overrides.emplace_back("tomography_state", photodet::Json(*c.state).dump());
    return photodet::resolve_config(path.empty() ? std::nullopt : std::optional<std::filesystem::path>(path), overrides);
}

int threads_or_all(int t) { return t > 0 ? t : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const photodet::ValidationError& e) {
        std::cerr << "photodet: invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const photodet::NumericalError& e) {
        std::cerr << "photodet: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const photodet::Json::exception& e) {
        std::cerr << "photodet: invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "photodet: error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

int run_command(const Common& c) {
    return guarded([&] {
        const photodet::Json config = resolve(c);
        const auto output = photodet::run_experiment(c.experiment, config, threads_or_all(c.threads));
        const auto art = photodet::write_artifacts(c.out, c.experiment, config, output);
        for (const std::string& w : output.warnings) std::cerr << "photodet: warning: " << w << '\n';
        std::cout << art.csv_file.string() << '\n' << art.summary_file.string() << '\n';
        return 0;
    });
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw photodet::ValidationError("--values: not a number: '" + item + "'");
        v.push_back(x);
    }
    if (v.empty()) throw photodet::ValidationError("--values: empty value list");
    return v;
}

struct PointResult {
    std::string hash;
    std::string status = "ok";
    std::string message;
    photodet::Json summary;
};

int sweep_command(const Common& c, const std::string& param, const std::string& values_text) {
    std::vector<double> values;
    photodet::Json base;
    int rc = guarded([&] {
        values = parse_values(values_text);
        base = resolve(c);
        if (!base.contains(param)) throw photodet::ValidationError("--param: unknown config key '" + param + "'");
        const photodet::Json defaults = photodet::default_config();
        const photodet::Json& def = defaults.at(param);
        if (!(def.is_number() || def.is_null())) {
            throw photodet::ValidationError("--param: '" + param + "' is not a numeric key");
        }
        return 0;
    });
    if (rc != 0) return rc;

    const bool integral = photodet::default_config().at(param).is_number_integer();
    std::vector<PointResult> results(values.size());
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(threads_or_all(c.threads), static_cast<int>(values.size()));
    auto work = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            PointResult& r = results[i];
            const int code = guarded([&] {
                photodet::Json config = base;
                if (integral) {
                    if (values[i] != std::floor(values[i])) throw photodet::ValidationError(param + " must be an integer");
                    config[param] = static_cast<long long>(values[i]);
                } else {
                    config[param] = values[i];
                }
                photodet::params_from_config(config);
                r.hash = photodet::config_hash(config);
                const auto output = photodet::run_experiment(c.experiment, config, 1);
                r.summary = photodet::write_artifacts(c.out, c.experiment, config, output).summary.at("summary");
                return 0;
            });
            if (code != 0) r.status = code == kExitValidation ? "validation_error" : "numerical_error";
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    // Index columns: the scalar summary keys, in first-seen order.
    std::vector<std::string> keys;
    for (const auto& r : results) {
        if (!r.summary.is_object()) continue;
        for (const auto& [k, v] : r.summary.items()) {
            if ((v.is_number() || v.is_boolean()) && std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
        }
    }
    const std::string base_hash = photodet::config_hash(base);
    const std::filesystem::path index =
        std::filesystem::path(c.out) / ("sweep_" + c.experiment + "_" + param + "_" + base_hash + ".csv");
    std::filesystem::create_directories(c.out);
    std::ofstream os(index, std::ios::binary);
    os << "# config_hash: " << base_hash << "\n# sweep: " << c.experiment << " over " << param << '\n';
    os << param << ",config_hash,status";
    for (const auto& k : keys) os << ',' << k;
    os << '\n';
    bool failed = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const PointResult& r = results[i];
        failed = failed || r.status != "ok";
        os << photodet::format_double(values[i]) << ',' << r.hash << ',' << r.status;
        for (const auto& k : keys) {
            os << ',';
            if (r.summary.is_object() && r.summary.contains(k)) {
                const auto& v = r.summary.at(k);
                if (v.is_boolean()) os << (v.get<bool>() ? 1 : 0);
                else os << photodet::format_double(v.get<double>());
            }
        }
        os << '\n';
    }
    std::cout << index.string() << '\n';
    if (failed) std::cerr << "photodet: one or more sweep points failed\n";
    return failed ? kExitSweepFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photodet: itinerant microwave photon detector simulations"};
    app.require_subcommand(1);

    Common run_opts;
    CLI::App* run = app.add_subcommand("run", "run one experiment and write its artifacts");
    add_common(*run, run_opts);

    Common sweep_opts;
    std::string param, values;
    CLI::App* sweep = app.add_subcommand("sweep", "run an experiment once per value of a numeric config key");
    add_common(*sweep, sweep_opts);
    sweep->add_option("--param,-p", param, "numeric config key")->required();
    sweep->add_option("--values,-v", values, "comma-separated values")->required();

    app.add_subcommand("list", "list experiment names")->callback([] {
        for (const auto& n : photodet::experiment_names()) std::cout << n << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    if (*run) return run_command(run_opts);
    if (*sweep) return sweep_command(sweep_opts, param, values);
    return 0;
}
