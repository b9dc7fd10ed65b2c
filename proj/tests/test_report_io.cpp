#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "freecap/report_io.hpp"

using namespace freecap;
using nlohmann::json;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("freecap_test_" + name)).string();
}

MCReport sample_report() {
    const auto model = model_for_scales(ones_profile(8, 16), ones_profile(8, 8), 2.0, 1.0);
    const auto run = simulate(model, 5, SeededStreams(17));
    return build_report(run, TargetMatrix::K, aepdf_K(model.scales()), 0.5);
}

}  // namespace

TEST_CASE("timestamp format") {
    const std::string ts = utc_timestamp();
    REQUIRE(ts.size() == 20u);
    CHECK(ts[4] == '-');
    CHECK(ts[10] == 'T');
    CHECK(ts.back() == 'Z');
}

TEST_CASE("manifest round trip") {
    RunManifest m;
    m.command = "verify";
    m.argv = {"freecap", "verify", "--seed", "12"};
    m.params = {{"qtilde", 0.1 + 0.2}, {"cluster", 3}};
    m.rng_seed = 18446744073709551615ULL;
    m.timestamp = utc_timestamp();

    const json j = to_json(m);
    for (const char* key : {"command", "argv", "params", "rng_seed", "version", "timestamp"})
        CHECK(j.contains(key));
    CHECK(j["version"] == kToolVersion);

    const std::string path = temp_path("manifest.json");
    write_manifest(path, m);
    const RunManifest back = read_manifest(path);
    CHECK(back.command == m.command);
    CHECK(back.argv == m.argv);
    CHECK(back.params == m.params);
    CHECK(back.params["qtilde"].get<double>() == 0.1 + 0.2);
    CHECK(back.rng_seed == m.rng_seed);
    CHECK(back.timestamp == m.timestamp);
    std::filesystem::remove(path);

    RunManifest unseeded = m;
    unseeded.rng_seed.reset();
    CHECK(to_json(unseeded)["rng_seed"].is_null());
    CHECK_FALSE(manifest_from_json(to_json(unseeded)).rng_seed.has_value());
}

TEST_CASE("malformed manifests") {
    CHECK_THROWS_AS(manifest_from_json(json{{"argv", json::array()}}), ValidationError);
    CHECK_THROWS_AS(manifest_from_json(json{{"command", 3}, {"argv", json::array()}}), ValidationError);
    CHECK_THROWS_AS(read_manifest("/nonexistent/manifest.json"), ValidationError);
    const std::string path = temp_path("broken.json");
    write_text_file(path, "{ not json");
    CHECK_THROWS_AS(read_manifest(path), ValidationError);
    std::filesystem::remove(path);
}

TEST_CASE("report json fields") {
    const MCReport r = sample_report();
    const json j = to_json(r);
    for (const char* key : {"target", "iterations", "rng_seed", "capacity_nats_per_rx_dim", "capacity_alt_form",
                            "max_form_discrepancy", "closed_form_capacity", "capacity_rel_err", "l1_distance",
                            "ks_distance", "histogram"})
        CHECK(j.contains(key));
    CHECK(j["target"] == "K");
    CHECK(j["iterations"] == 5);
    CHECK(j["rng_seed"] == 17);
    CHECK(j["closed_form_capacity"] == 0.5);
    CHECK(j["capacity_nats_per_rx_dim"].get<double>() == r.capacity_nats_per_rx_dim);
    CHECK(j["histogram"]["edges"].size() == r.histogram.edges.size());
    CHECK(j["histogram"]["density"].size() == r.histogram.density.size());
    CHECK(j["histogram"]["atoms"].is_array());

    MCReport bare = r;
    bare.closed_form_capacity.reset();
    CHECK(to_json(bare)["closed_form_capacity"].is_null());
}

TEST_CASE("json numbers read back exactly") {
    const double awkward = 0.1 + 0.2;
    const json j = json::parse(dump_json(json{{"x", awkward}, {"y", 1.0 / 3.0}, {"z", 6.02214076e23}}));
    CHECK(j["x"].get<double>() == awkward);
    CHECK(j["y"].get<double>() == 1.0 / 3.0);
    CHECK(j["z"].get<double>() == 6.02214076e23);
    const std::string text = dump_json(json{{"a", 1}});
    CHECK(text.back() == '\n');
    CHECK(text.find("\n  \"a\"") != std::string::npos);
}

TEST_CASE("scales and capacity json") {
    const EffectiveScales s(2.5, 0.0, AspectRatio(3.0), AspectRatio(1.0));
    const json js = to_json(s);
    CHECK(js["qtilde"] == 2.5);
    CHECK(js["ptilde"] == 0.0);
    CHECK(js["beta"] == 3.0);
    CHECK(js["interference_free"] == true);

    CapacityResult c;
    c.nats = 1.25;
    c.bits = 1.25 / std::numbers::ln2;
    c.scales = s;
    const json jc = to_json(c);
    CHECK(jc["nats"] == 1.25);
    CHECK(jc["scales"]["qtilde"] == 2.5);
    CapacityResult no_scales;
    CHECK_FALSE(to_json(no_scales).contains("scales"));
}

TEST_CASE("density csv") {
    const EffectiveScales s(1.0, 0.0, AspectRatio(0.5), AspectRatio(1.0));
    const auto d = aepdf_N(s, linear_grid(0.0, 3.0, 7));
    std::ostringstream out;
    write_density_csv(out, d);
    const auto lines = lines_of(out.str());
    REQUIRE(lines.size() == 1u + 7u + 1u);
    CHECK(lines[0] == "x,density,kind");
    for (std::size_t i = 1; i <= 7; ++i) CHECK(lines[i].substr(lines[i].size() - 5) == ",bulk");
    CHECK(lines.back() == "0,0.5,atom");

    // 17 significant digits survive a text round trip.
    double x = 0.0, f = 0.0;
    REQUIRE(std::sscanf(lines[3].c_str(), "%lf,%lf", &x, &f) == 2);
    CHECK(x == d.grid()[2]);
    CHECK(f == d.bulk()[2]);
}

TEST_CASE("histogram csv") {
    const auto h = make_histogram({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 0.9}, 0.0, 3);
    std::ostringstream out;
    write_histogram_csv(out, h);
    const auto lines = lines_of(out.str());
    REQUIRE(lines.size() == 4u);
    CHECK(lines[0] == "bin_left,bin_right,density");
    double l = 0.0, r = 0.0, dens = 0.0;
    REQUIRE(std::sscanf(lines[1].c_str(), "%lf,%lf,%lf", &l, &r, &dens) == 3);
    CHECK(l == h.edges[0]);
    CHECK(r == h.edges[1]);
    CHECK(dens == h.density[0]);
}

TEST_CASE("writing to an unwritable path fails") {
    CHECK_THROWS_AS(write_text_file("/nonexistent/dir/file.txt", "x"), ValidationError);
}
