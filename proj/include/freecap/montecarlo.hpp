#pragma once

// Finite-dimensional channel simulator: variance-profiled complex Gaussian channels,
// empirical eigenvalue laws of N, M and K, and the empirical ergodic capacity.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "freecap/scenarios.hpp"

namespace freecap {

using ComplexMatrix = Eigen::MatrixXcd;
using Rng = std::mt19937_64;

/// Independent, reproducible generator per iteration index, derived from one master seed.
class SeededStreams {
public:
    explicit SeededStreams(std::uint64_t master_seed) : master_(master_seed) {}

    std::uint64_t master_seed() const noexcept { return master_; }
    Rng stream(std::uint64_t index) const;
    /// Streams for a sub-experiment (e.g. one point of a sweep).
    SeededStreams derive(std::uint64_t tag) const;

private:
    std::uint64_t master_;
};

/// i.i.d. CN(0, 1) entries: real and imaginary parts each N(0, 1/2).
ComplexMatrix sample_gaussian(int rows, int cols, Rng& rng);

/// H = Sigma (Hadamard) G.
ComplexMatrix sample_channel(const VarianceProfile& sigma, Rng& rng);

/// Ascending eigenvalues of a Hermitian matrix. Throws ValidationError if A deviates from
/// Hermitian by more than 1e-12 relative to its norm.
std::vector<double> hermitian_eigenvalues(const ComplexMatrix& a);

enum class TargetMatrix { N, M, K };
std::string to_string(TargetMatrix target);
TargetMatrix parse_target(const std::string& text);

/// Everything needed to draw channel realizations.
struct ChannelModel {
    ChannelModel(VarianceProfile sigma, VarianceProfile sigma_i, PowerProfile powers);

    VarianceProfile sigma;
    VarianceProfile sigma_i;  ///< may have zero columns (no interferer)
    PowerProfile powers;      ///< q and p are filled in from the profiles
    ChannelDims dims;

    EffectiveScales scales() const { return effective_scales(dims, powers); }
};

/// Powers mu = qtilde / (K q), nu = ptilde / (K p) that realise the requested effective
/// scales for the given profiles.
ChannelModel model_for_scales(VarianceProfile sigma, VarianceProfile sigma_i, double qtilde,
                              double ptilde);

/// One fading draw: spectra of N, M, K and both capacity forms (nats per receive dimension).
struct Realization {
    std::vector<double> eig_n;
    std::vector<double> eig_m;
    std::vector<double> eig_k;
    double capacity = 0.0;      ///< (1/K) log det(I + N M)
    double capacity_alt = 0.0;  ///< (1/K) [log det(I + N + Ntilde) - log det(I + Ntilde)]
};

/// K's spectrum comes from the Hermitian congruence M^{1/2} N M^{1/2}; M is assembled from the
/// eigen-decomposition of Ntilde.
Realization realize(const ChannelModel& model, Rng& rng);

/// Normalized histogram with point masses split off.
struct EmpiricalHistogram {
    std::vector<double> edges;    ///< bins + 1 increasing edges
    std::vector<double> density;  ///< per bin, counts / (total * width); excludes atoms
    std::vector<Atom> atoms;

    /// Bin centres as grid, bin heights as bulk.
    SpectralDensity as_density() const;
};

/// Freedman-Diaconis bins over the pooled sample. A bin at `atom_location` holding more than
/// 5x the density of its neighbour is reported as an atom made of the samples within
/// 1e-9 (relative) of the location. `bins` > 0 overrides the rule.
EmpiricalHistogram make_histogram(std::vector<double> samples,
                                  std::optional<double> atom_location, int bins = 0);

struct DistributionDistance {
    double l1 = 0.0;  ///< sum over bins of |empirical mass - closed-form mass|, plus outside mass
    double ks = 0.0;  ///< sup |F_empirical - F_closed|
};

/// Distances between pooled samples (binned on `hist.edges`) and a closed-form law.
DistributionDistance compare_to_closed_form(const std::vector<double>& sorted_samples,
                                            const EmpiricalHistogram& hist,
                                            const SpectralDensity& closed_form);

struct MCReport {
    TargetMatrix target = TargetMatrix::K;
    EmpiricalHistogram histogram;
    double capacity_nats_per_rx_dim = 0.0;
    double capacity_alt_form = 0.0;
    double max_form_discrepancy = 0.0;  ///< max per-realization relative gap between the forms
    std::optional<double> closed_form_capacity;
    double l1_distance = 0.0;
    double ks_distance = 0.0;
    double capacity_rel_err = 0.0;
    int iterations = 0;
    std::uint64_t rng_seed = 0;
};

struct EmpiricalRun {
    std::vector<double> eig_n, eig_m, eig_k;  ///< pooled over iterations, sorted
    double capacity = 0.0;
    double capacity_alt = 0.0;
    double max_form_discrepancy = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
};

/// Runs `iterations` independent realizations on per-iteration substreams.
EmpiricalRun simulate(const ChannelModel& model, int iterations, const SeededStreams& streams);

const std::vector<double>& pooled(const EmpiricalRun& run, TargetMatrix target);

/// Histogram of the target's pooled eigenvalues (atoms at 0 for N and K, at 1 for M).
EmpiricalHistogram empirical_density(const EmpiricalRun& run, TargetMatrix target, int bins = 0);

/// Capacity-only report: averages of both capacity forms.
MCReport empirical_capacity(const ChannelModel& model, int iterations, const SeededStreams& streams);

/// Full comparison of a run against a closed-form law and optional closed-form capacity.
MCReport build_report(const EmpiricalRun& run, TargetMatrix target,
                      const SpectralDensity& closed_form, std::optional<double> closed_capacity,
                      int bins = 0);

}  // namespace freecap
