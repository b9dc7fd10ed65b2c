#include "freecap/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace freecap {

VarianceProfile::VarianceProfile(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 1) throw ValidationError("variance profile needs at least one row");
    if (!entries_.allFinite() || (entries_.size() > 0 && entries_.minCoeff() < 0.0))
        throw ValidationError("variance profile entries must be finite and nonnegative");
}

ChannelDims::ChannelDims(int k, int m, int n) : K(k), M(m), N(n) {
    if (K < 1 || M < 1 || N < 0) throw ValidationError("channel dimensions must be positive");
}

AspectRatio ChannelDims::gamma() const {
    if (N == 0) throw DomainError("gamma undefined without interfering dimensions");
    return AspectRatio(static_cast<double>(N) / K);
}

EffectiveScales effective_scales(const ChannelDims& dims, const PowerProfile& powers) {
    const double pt = dims.N == 0 ? 0.0 : powers.ptilde(dims);
    const AspectRatio gamma = pt > 0.0 ? dims.gamma() : AspectRatio(1.0);
    return EffectiveScales(powers.qtilde(dims), pt, dims.beta(), gamma);
}

void CellularConfig::validate() const {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError(std::string(name) + " must be positive");
    };
    positive(cell_radius_m, "cell_radius_m");
    positive(ref_distance_m, "ref_distance_m");
    positive(pathloss_exponent, "pathloss_exponent");
    positive(ut_tx_power_w, "ut_tx_power_w");
    positive(bandwidth_hz, "bandwidth_hz");
    if (!std::isfinite(ref_pathloss_db)) throw ValidationError("ref_pathloss_db must be finite");
    if (!std::isfinite(noise_density_dbm_hz))
        throw ValidationError("noise_density_dbm_hz must be finite");
    if (uts_per_cell < 1) throw ValidationError("uts_per_cell must be positive");
    if (cluster_size < 1) throw ValidationError("cluster_size must be positive");
    if (total_cells < 1) throw ValidationError("total_cells must be positive");
    if (cluster_size > total_cells)
        throw ValidationError("cluster_size cannot exceed total_cells");
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError("bad numeric value for " + key + ": '" + text + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& text) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ValidationError("bad integer value for " + key + ": '" + text + "'");
    return v;
}

}  // namespace

CellularConfig parse_cellular_config(std::istream& in) {
    CellularConfig cfg;
    const std::map<std::string, double CellularConfig::*> reals{
        {"cell_radius_m", &CellularConfig::cell_radius_m},
        {"ref_distance_m", &CellularConfig::ref_distance_m},
        {"ref_pathloss_db", &CellularConfig::ref_pathloss_db},
        {"pathloss_exponent", &CellularConfig::pathloss_exponent},
        {"ut_tx_power_w", &CellularConfig::ut_tx_power_w},
        {"noise_density_dbm_hz", &CellularConfig::noise_density_dbm_hz},
        {"bandwidth_hz", &CellularConfig::bandwidth_hz},
    };
    const std::map<std::string, int CellularConfig::*> ints{
        {"uts_per_cell", &CellularConfig::uts_per_cell},
        {"cluster_size", &CellularConfig::cluster_size},
        {"total_cells", &CellularConfig::total_cells},
    };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (auto it = reals.find(key); it != reals.end())
            cfg.*(it->second) = parse_double(key, value);
        else if (auto jt = ints.find(key); jt != ints.end())
            cfg.*(jt->second) = parse_int(key, value);
        else
            throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

CellularConfig load_cellular_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    return parse_cellular_config(in);
}

void write_cellular_config(std::ostream& out, const CellularConfig& cfg) {
    out << std::setprecision(17);
    out << "cell_radius_m = " << cfg.cell_radius_m << '\n'
        << "ref_distance_m = " << cfg.ref_distance_m << '\n'
        << "ref_pathloss_db = " << cfg.ref_pathloss_db << '\n'
        << "pathloss_exponent = " << cfg.pathloss_exponent << '\n'
        << "uts_per_cell = " << cfg.uts_per_cell << '\n'
        << "cluster_size = " << cfg.cluster_size << '\n'
        << "total_cells = " << cfg.total_cells << '\n'
        << "ut_tx_power_w = " << cfg.ut_tx_power_w << '\n'
        << "noise_density_dbm_hz = " << cfg.noise_density_dbm_hz << '\n'
        << "bandwidth_hz = " << cfg.bandwidth_hz << '\n';
}

VarianceProfile ones_profile(int rows, int cols) {
    if (rows < 1 || cols < 1) throw ValidationError("ones_profile: dimensions must be positive");
    return VarianceProfile(Eigen::MatrixXd::Ones(rows, cols));
}

VarianceProfile kron_profile(std::span<const double> sigma, int rows) {
    if (sigma.empty()) throw ValidationError("kron_profile: empty path-loss vector");
    if (rows < 1) throw ValidationError("kron_profile: rows must be positive");
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(sigma.size()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j).setConstant(sigma[static_cast<std::size_t>(j)]);
    return VarianceProfile(std::move(m));
}

VarianceProfile diminishing_profile(int rows, int cols) {
    if (rows < 1 || cols < 1) throw ValidationError("diminishing_profile: dimensions must be positive");
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = 1.0 / std::sqrt(1.0 + std::abs(i - j));
    return VarianceProfile(std::move(m));
}

double pathloss_amplitude(const CellularConfig& cfg, double distance_m) {
    const double gain = std::pow(10.0, -cfg.ref_pathloss_db / 10.0);
    return std::sqrt(gain) * std::pow(1.0 + distance_m / cfg.ref_distance_m, -cfg.pathloss_exponent / 2.0);
}

CellularProfiles cellular_linear_profile(const CellularConfig& cfg) {
    cfg.validate();
    const int cells = cfg.total_cells;
    const int cluster = cfg.cluster_size;
    const int per_cell = cfg.uts_per_cell;
    const double width = 2.0 * cfg.cell_radius_m;
    const int first = (cells - cluster) / 2;

    std::vector<double> bs(static_cast<std::size_t>(cluster));
    for (int c = 0; c < cluster; ++c) bs[static_cast<std::size_t>(c)] = (first + c + 0.5) * width;

    std::vector<double> desired, interferers;
    for (int c = 0; c < cells; ++c) {
        const bool in_cluster = c >= first && c < first + cluster;
        for (int j = 0; j < per_cell; ++j) {
            const double x = c * width + (width / per_cell) * (j + 0.5);
            (in_cluster ? desired : interferers).push_back(x);
        }
    }
    const auto build = [&](const std::vector<double>& uts) {
        Eigen::MatrixXd m(cluster, static_cast<Eigen::Index>(uts.size()));
        for (int i = 0; i < cluster; ++i)
            for (std::size_t j = 0; j < uts.size(); ++j)
                m(i, static_cast<Eigen::Index>(j)) =
                    pathloss_amplitude(cfg, std::abs(bs[static_cast<std::size_t>(i)] - uts[j]));
        return VarianceProfile(std::move(m));
    };
    return CellularProfiles{build(desired), build(interferers),
                            ChannelDims(cluster, static_cast<int>(desired.size()),
                                        static_cast<int>(interferers.size()))};
}

std::pair<double, double> link_budget(const CellularConfig& cfg) {
    if (!(cfg.ut_tx_power_w >= 0.0)) throw ValidationError("transmit power must be nonnegative");
    if (!(cfg.bandwidth_hz > 0.0)) throw ValidationError("bandwidth must be positive");
    const double noise_w_per_hz = std::pow(10.0, (cfg.noise_density_dbm_hz - 30.0) / 10.0);
    const double ratio = cfg.ut_tx_power_w / (noise_w_per_hz * cfg.bandwidth_hz);
    return {ratio, ratio};
}

double profile_norm(const VarianceProfile& sigma) {
    if (sigma.cols() == 0) return 0.0;
    return sigma.entries().squaredNorm() / static_cast<double>(sigma.rows() * sigma.cols());
}

double profile_norm_q(const VarianceProfile& sigma, const ChannelDims& dims) {
    if (sigma.rows() != dims.K || sigma.cols() != dims.M)
        throw ValidationError("profile_norm_q: profile shape does not match K x M");
    return profile_norm(sigma);
}

double profile_norm_p(const VarianceProfile& sigma_i, const ChannelDims& dims) {
    if (sigma_i.rows() != dims.K || sigma_i.cols() != dims.N)
        throw ValidationError("profile_norm_p: profile shape does not match K x N");
    return profile_norm(sigma_i);
}

double row_regularity_deviation(const VarianceProfile& sigma, std::vector<double> alpha_grid) {
    const auto& m = sigma.entries();
    if (m.cols() == 0) return 0.0;
    if (alpha_grid.empty()) {
        std::vector<double> pooled(m.data(), m.data() + m.size());
        std::sort(pooled.begin(), pooled.end());
        constexpr int quantiles = 64;
        for (int k = 1; k <= quantiles; ++k) {
            const auto idx = static_cast<std::size_t>(
                std::llround(static_cast<double>(k) / quantiles * static_cast<double>(pooled.size() - 1)));
            alpha_grid.push_back(pooled[idx]);
        }
    }
    const double cols = static_cast<double>(m.cols());
    double worst = 0.0;
    for (double alpha : alpha_grid) {
        double lo = 1.0, hi = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double share = static_cast<double>((m.row(i).array() <= alpha).count()) / cols;
            lo = std::min(lo, share);
            hi = std::max(hi, share);
        }
        worst = std::max(worst, hi - lo);
    }
    return worst;
}

void write_profile_csv(std::ostream& out, const VarianceProfile& sigma) {
    out << "# rows=" << sigma.rows() << " cols=" << sigma.cols() << '\n';
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
            if (j) out << ',';
            out << sigma(i, j);
        }
        out << '\n';
    }
}

VarianceProfile read_profile_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ValidationError("profile CSV: empty input");
    long rows = 0, cols = 0;
    if (std::sscanf(header.c_str(), "# rows=%ld cols=%ld", &rows, &cols) != 2 || rows < 1 || cols < 0)
        throw ValidationError("profile CSV: expected '# rows=R cols=C' header");
    Eigen::MatrixXd m(rows, cols);
    std::string line;
    for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw ValidationError("profile CSV: too few rows");
        std::stringstream ss(line);
        std::string cell;
        for (long j = 0; j < cols; ++j) {
            if (!std::getline(ss, cell, ',')) throw ValidationError("profile CSV: too few columns");
            m(i, j) = parse_double("profile entry", trim(cell));
        }
    }
    return VarianceProfile(std::move(m));
}

}  // namespace freecap
