#include "photodet/tomography.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace photodet {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "photodet-trace-ensemble";

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        return r;
    }
}

void put_double(std::ostream& os, double x) {
    const std::uint64_t v = to_little(std::bit_cast<std::uint64_t>(x));
    char buf[8];
    std::memcpy(buf, &v, 8);
    os.write(buf, 8);
}

double get_double(std::istream& is) {
    char buf[8];
    if (!is.read(buf, 8)) throw ValidationError("read_ensemble: truncated body");
    std::uint64_t v = 0;
    std::memcpy(&v, buf, 8);
    return std::bit_cast<double>(to_little(v));
}

json pair(cplx z) { return json::array({z.real(), z.imag()}); }

}  // namespace

void write_ensemble(const TraceEnsemble& ensemble, std::ostream& os) {
    const json header = {{"format", kFormat},
                         {"version", 1},
                         {"sample_period", ensemble.sample_period},
                         {"n_traces", ensemble.n_traces()},
                         {"n_samples", ensemble.n_samples()},
                         {"seed", ensemble.seed},
                         {"labels", ensemble.labels}};
    os << header.dump() << '\n';
    for (Eigen::Index k = 0; k < ensemble.n_traces(); ++k) {
        for (Eigen::Index j = 0; j < ensemble.n_samples(); ++j) {
            put_double(os, ensemble.traces(k, j).real());
            put_double(os, ensemble.traces(k, j).imag());
        }
    }
    if (!os) throw ValidationError("write_ensemble: stream error");
}

TraceEnsemble read_ensemble(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("read_ensemble: missing header");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("read_ensemble: bad header: ") + e.what());
    }
    if (header.value("format", "") != kFormat) throw ValidationError("read_ensemble: unrecognized format");
    TraceEnsemble ens;
    try {
        ens.sample_period = header.at("sample_period").get<double>();
        ens.seed = header.at("seed").get<std::uint64_t>();
        ens.labels = header.at("labels").get<std::vector<int>>();
        const auto n = header.at("n_traces").get<Eigen::Index>();
        const auto m = header.at("n_samples").get<Eigen::Index>();
        if (n < 0 || m < 0) throw ValidationError("read_ensemble: negative dimensions");
        ens.traces.resize(n, m);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("read_ensemble: bad header: ") + e.what());
    }
    if (!ens.labels.empty() && static_cast<Eigen::Index>(ens.labels.size()) != ens.n_traces()) {
        throw ValidationError("read_ensemble: label count differs from trace count");
    }
    for (Eigen::Index k = 0; k < ens.n_traces(); ++k) {
        for (Eigen::Index j = 0; j < ens.n_samples(); ++j) {
            const double re = get_double(is);
            const double im = get_double(is);
            ens.traces(k, j) = {re, im};
        }
    }
    return ens;
}

std::string moment_table_json(const MomentTable& table) {
    json entries = json::array();
    for (int n = 0; n <= MomentTable::kOrder; ++n) {
        for (int m = 0; n + m <= MomentTable::kOrder; ++m) {
            entries.push_back({{"n", n}, {"m", m}, {"value", pair(table.at(n, m))}, {"sigma", table.sigma(n, m)}});
        }
    }
    const json j = {{"stage", to_string(table.stage)}, {"gain", table.gain}, {"moments", entries}};
    return j.dump(2);
}

std::string density_matrix_json(const DensityMatrix& rho) {
    json rows = json::array();
    const Matrix& m = rho.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(pair(m(i, k)));
        rows.push_back(row);
    }
    const json j = {{"dim", m.rows()}, {"rho", rows}};
    return j.dump(2);
}

}  // namespace photodet
