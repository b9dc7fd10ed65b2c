#pragma once

// JSON and CSV serialization of reports, densities, sweeps and run manifests.
// Numbers are written so that they read back to the same double.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "freecap/capacity.hpp"

namespace freecap {

inline constexpr const char* kToolVersion = "1.0.0";

/// Everything needed to re-run a command: its argv, the resolved parameters and the seed.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json params = nlohmann::json::object();
    std::optional<std::uint64_t> rng_seed;
    std::string version = kToolVersion;
    std::string timestamp;  ///< UTC, ISO 8601
};

std::string utc_timestamp();

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

nlohmann::json to_json(const EffectiveScales& scales);
nlohmann::json to_json(const EmpiricalHistogram& hist);
/// Field names: target, iterations, rng_seed, capacity_nats_per_rx_dim, capacity_alt_form,
/// max_form_discrepancy, closed_form_capacity, capacity_rel_err, l1_distance, ks_distance,
/// histogram {edges, density, atoms}.
nlohmann::json to_json(const MCReport& report);
nlohmann::json to_json(const CapacityResult& result);

/// Columns x, density, kind. Bulk rows carry kind "bulk"; each atom adds a row with its mass
/// in the density column and kind "atom".
void write_density_csv(std::ostream& out, const SpectralDensity& density);

/// Columns bin_left, bin_right, density.
void write_histogram_csv(std::ostream& out, const EmpiricalHistogram& hist);

/// JSON text with round-trip exact numbers, 2-space indentation and a trailing newline.
std::string dump_json(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace freecap
