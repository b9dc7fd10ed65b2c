#pragma once

// Ergodic capacity per receive dimension, C = E[log(1 + lambda_K)], and the cellular sweep
// over cooperating-cluster sizes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "freecap/montecarlo.hpp"

namespace freecap {

struct CapacityResult {
    double nats = 0.0;  ///< per receive dimension
    double bits = 0.0;
    std::optional<EffectiveScales> scales;
    double quadrature_abs_err = 0.0;
};

inline constexpr double kCapacityNormalizationTol = 1e-2;

/// Integral of log(1 + x) against the law. Uses the density's evaluator when it has one,
/// split at the support edges detected on the grid; the sampled bulk otherwise.
CapacityResult capacity_from_density(const SpectralDensity& density,
                                     double normalization_tol = kCapacityNormalizationTol);

/// Large-system capacity from the law of K (of N when there is no interference).
CapacityResult capacity_closed_form(const EffectiveScales& scales);
/// Zero when mu * q is zero.
CapacityResult capacity_closed_form(const ChannelDims& dims, const PowerProfile& powers);

struct SweepPoint {
    int cluster_size = 0;
    EffectiveScales scales;
    bool interference_free = false;
    CapacityResult closed_form;
    std::optional<MCReport> monte_carlo;
    double rel_err = 0.0;  ///< |mc - closed| / closed, 0 without a Monte Carlo run
};

struct SweepOptions {
    int mc_iterations = 0;  ///< 0 skips the simulation
    std::uint64_t seed = 0;
};

/// One closed-form (and optionally simulated) capacity per cluster size of the linear array.
std::vector<SweepPoint> capacity_sweep(const CellularConfig& base, const std::vector<int>& cluster_sizes,
                                       const SweepOptions& options = {});

/// Columns: cluster_size, capacity_nats, capacity_bits, mc_capacity, rel_err.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep);

}  // namespace freecap
