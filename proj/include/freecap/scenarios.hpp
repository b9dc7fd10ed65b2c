#pragma once

// Variance profiles for the interference scenarios, profile norms, link budgets and the
// row-regularity diagnostic.

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "freecap/closedform.hpp"

namespace freecap {

/// Nonnegative matrix of path-loss amplitudes sigma_{i,j}; rows are receive dimensions.
class VarianceProfile {
public:
    explicit VarianceProfile(Eigen::MatrixXd entries);

    const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    Eigen::Index rows() const noexcept { return entries_.rows(); }
    Eigen::Index cols() const noexcept { return entries_.cols(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
    Eigen::MatrixXd entries_;
};

/// Receive dimension count K and transmit counts M (desired) and N (interference).
/// N == 0 is allowed and means there is no interferer.
struct ChannelDims {
    ChannelDims(int k, int m, int n);

    int K;
    int M;
    int N;

    AspectRatio beta() const { return AspectRatio(static_cast<double>(M) / K); }
    /// Only defined when N > 0.
    AspectRatio gamma() const;
};

/// Per-dimension powers and the profile norms they combine with.
struct PowerProfile {
    double mu = 0.0;  ///< TSNR per transmit dimension, linear
    double nu = 0.0;  ///< TINR per transmit dimension, linear
    double q = 0.0;
    double p = 0.0;

    double qtilde(const ChannelDims& dims) const { return dims.K * mu * q; }
    double ptilde(const ChannelDims& dims) const { return dims.K * nu * p; }
};

/// Effective scales of a finite channel. With no interferer (N == 0 or nu * p == 0)
/// ptilde is 0 and gamma is set to 1 as a placeholder.
EffectiveScales effective_scales(const ChannelDims& dims, const PowerProfile& powers);

/// Linear cellular array parameters; field names follow the usual link-budget table.
struct CellularConfig {
    double cell_radius_m = 1000.0;
    double ref_distance_m = 1.0;
    double ref_pathloss_db = 34.5;
    double pathloss_exponent = 3.5;
    int uts_per_cell = 10;
    int cluster_size = 1;
    int total_cells = 50;
    double ut_tx_power_w = 0.2;
    double noise_density_dbm_hz = -169.0;
    double bandwidth_hz = 5e6;

    void validate() const;
};

/// Reads `key = value` lines ('#' starts a comment) with the CellularConfig field names.
/// Unknown keys and malformed values throw ValidationError.
CellularConfig parse_cellular_config(std::istream& in);
CellularConfig load_cellular_config(const std::string& path);
void write_cellular_config(std::ostream& out, const CellularConfig& cfg);

VarianceProfile ones_profile(int rows, int cols);

/// Row i equals `sigma` for all K rows (identical receive elements).
VarianceProfile kron_profile(std::span<const double> sigma, int rows);

/// sigma_{i,j} = 1 / sqrt(1 + |i - j|).
VarianceProfile diminishing_profile(int rows, int cols);

struct CellularProfiles {
    VarianceProfile sigma;
    VarianceProfile sigma_i;  ///< zero columns when the cluster covers the whole array
    ChannelDims dims;
};

/// Single-antenna base stations at the cell centres of a linear array of cells of width 2R,
/// uts_per_cell terminals per cell on a regular grid symmetric about each base station, and
/// the cluster of cooperating cells centred in the array. Every terminal outside the cluster
/// interferes.
CellularProfiles cellular_linear_profile(const CellularConfig& cfg);

/// Amplitude sqrt(10^(-P0/10)) (1 + d / d0)^(-n / 2) for distance d in metres.
double pathloss_amplitude(const CellularConfig& cfg, double distance_m);

/// mu = nu = P_T / (N0 B), linear.
std::pair<double, double> link_budget(const CellularConfig& cfg);

/// Squared Frobenius norm over rows * cols.
double profile_norm(const VarianceProfile& sigma);
/// Same, checking that the profile shape is K x M.
double profile_norm_q(const VarianceProfile& sigma, const ChannelDims& dims);
/// Same, checking that the profile shape is K x N.
double profile_norm_p(const VarianceProfile& sigma_i, const ChannelDims& dims);

/// max over alpha of (max_i F_i(alpha) - min_i F_i(alpha)), F_i(alpha) = share of row i's
/// entries <= alpha. An empty grid selects 64 quantiles of the pooled entries.
double row_regularity_deviation(const VarianceProfile& sigma, std::vector<double> alpha_grid = {});

/// CSV with a `# rows=R cols=C` header line followed by row-major values.
void write_profile_csv(std::ostream& out, const VarianceProfile& sigma);
VarianceProfile read_profile_csv(std::istream& in);

}  // namespace freecap
