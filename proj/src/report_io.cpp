#include "freecap/report_io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace freecap {

using nlohmann::json;

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

json to_json(const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["argv"] = m.argv;
    j["params"] = m.params;
    j["rng_seed"] = m.rng_seed ? json(*m.rng_seed) : json(nullptr);
    j["version"] = m.version;
    j["timestamp"] = m.timestamp;
    return j;
}

RunManifest manifest_from_json(const json& j) {
    try {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.params = j.value("params", json::object());
        if (j.contains("rng_seed") && !j.at("rng_seed").is_null())
            m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        m.version = j.value("version", std::string(kToolVersion));
        m.timestamp = j.value("timestamp", std::string());
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed run manifest: ") + e.what());
    }
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    write_text_file(path, dump_json(to_json(manifest)));
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest " + path);
    try {
        return manifest_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError("manifest " + path + " is not valid JSON: " + e.what());
    }
}

json to_json(const EffectiveScales& s) {
    return json{{"qtilde", s.qtilde}, {"ptilde", s.ptilde}, {"beta", s.beta.value()},
                {"gamma", s.gamma.value()}, {"interference_free", s.interference_free()}};
}

json to_json(const EmpiricalHistogram& h) {
    json atoms = json::array();
    for (const Atom& a : h.atoms) atoms.push_back({{"location", a.location}, {"mass", a.mass}});
    return json{{"edges", h.edges}, {"density", h.density}, {"atoms", atoms}};
}

json to_json(const MCReport& r) {
    json j;
    j["target"] = to_string(r.target);
    j["iterations"] = r.iterations;
    j["rng_seed"] = r.rng_seed;
    j["capacity_nats_per_rx_dim"] = r.capacity_nats_per_rx_dim;
    j["capacity_alt_form"] = r.capacity_alt_form;
    j["max_form_discrepancy"] = r.max_form_discrepancy;
    j["closed_form_capacity"] = r.closed_form_capacity ? json(*r.closed_form_capacity) : json(nullptr);
    j["capacity_rel_err"] = r.capacity_rel_err;
    j["l1_distance"] = r.l1_distance;
    j["ks_distance"] = r.ks_distance;
    j["histogram"] = to_json(r.histogram);
    return j;
}

json to_json(const CapacityResult& c) {
    json j{{"nats", c.nats}, {"bits", c.bits}, {"quadrature_abs_err", c.quadrature_abs_err}};
    if (c.scales) j["scales"] = to_json(*c.scales);
    return j;
}

void write_density_csv(std::ostream& out, const SpectralDensity& d) {
    out << "x,density,kind\n" << std::setprecision(17);
    for (std::size_t i = 0; i < d.grid().size(); ++i) out << d.grid()[i] << ',' << d.bulk()[i] << ",bulk\n";
    for (const Atom& a : d.atoms()) out << a.location << ',' << a.mass << ",atom\n";
}

void write_histogram_csv(std::ostream& out, const EmpiricalHistogram& h) {
    out << "bin_left,bin_right,density\n" << std::setprecision(17);
    for (std::size_t b = 0; b < h.density.size(); ++b)
        out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.density[b] << '\n';
}

std::string dump_json(const json& j) {
    // nlohmann writes the shortest decimal form that reads back to the same double.
    return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << text;
    if (!out) throw ValidationError("write failed for " + path);
}

}  // namespace freecap
