// freecap: spectra, capacities and Monte Carlo checks for MIMO channels with cochannel
// interference. Exit codes: 0 success or pass, 1 verification failure or numerical failure,
// 2 usage error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "freecap/capacity.hpp"
#include "freecap/report_io.hpp"

using namespace freecap;
using nlohmann::json;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

// "a:b:n" with a < b and n >= 2.
GridSpec parse_grid(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    GridSpec g;
    try {
        if (parts.size() != 3) throw std::invalid_argument("parts");
        std::size_t used = 0;
        g.lo = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("lo");
        g.hi = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("hi");
        const long n = std::stol(parts[2], &used);
        if (used != parts[2].size() || n < 2) throw std::invalid_argument("n");
        g.count = static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw UsageError("malformed grid '" + text + "' (expected lo:hi:n with n >= 2)");
    }
    if (!(g.hi > g.lo) || !std::isfinite(g.lo) || !std::isfinite(g.hi))
        throw UsageError("grid '" + text + "' needs lo < hi");
    return g;
}

std::vector<double> to_grid(const GridSpec& g) { return linear_grid(g.lo, g.hi, g.count); }

// Range "a:b" or a single value "a".
std::vector<int> parse_range(const std::string& text) {
    const auto colon = text.find(':');
    try {
        std::size_t used = 0;
        const int a = std::stoi(text.substr(0, colon), &used);
        if (used != text.substr(0, colon).size()) throw std::invalid_argument("a");
        int b = a;
        if (colon != std::string::npos) {
            const std::string tail = text.substr(colon + 1);
            b = std::stoi(tail, &used);
            if (used != tail.size()) throw std::invalid_argument("b");
        }
        if (b < a) throw std::invalid_argument("order");
        std::vector<int> out;
        for (int c = a; c <= b; ++c) out.push_back(c);
        return out;
    } catch (const std::exception&) {
        throw UsageError("malformed range '" + text + "' (expected a or a:b with a <= b)");
    }
}

std::string manifest_path_for(const std::string& out) {
    std::filesystem::path p(out);
    p.replace_extension(".manifest.json");
    return p.string();
}

// Data goes to `out` when given, to stdout otherwise.
void emit(const std::string& out, const std::string& text) {
    if (out.empty()) std::cout << text;
    else write_text_file(out, text);
}

void record(const std::string& out, const std::string& command, const std::vector<std::string>& argv,
            json params, std::optional<std::uint64_t> seed) {
    if (out.empty()) return;
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.params = std::move(params);
    m.rng_seed = seed;
    m.timestamp = utc_timestamp();
    write_manifest(manifest_path_for(out), m);
}

// Progress lines go to stderr whenever stdout carries the data.
std::ostream& info(const std::string& out) { return out.empty() ? std::cerr : std::cout; }

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& given) {
    if (given) return *given;
    std::random_device rd;
    const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "no --seed given; using " << seed << '\n';
    return seed;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// --- mp -------------------------------------------------------------------------------

struct MpArgs {
    double beta = 0.0;
    std::string grid;
    std::string out;
};

int cmd_mp(const MpArgs& a, const std::vector<std::string>& argv) {
    if (!(a.beta > 0.0) || !std::isfinite(a.beta)) throw UsageError("--beta must be positive and finite");
    const AspectRatio beta(a.beta);
    GridSpec g;
    if (a.grid.empty()) g = {0.0, mp_support(beta).second, 401};
    else g = parse_grid(a.grid);

    std::ostringstream csv;
    csv << "x,density,eta,s_transform,kind\n";
    for (double x : to_grid(g)) {
        csv << fmt(x) << ',' << fmt(mp_density(x, beta)) << ',';
        if (x >= 0.0) csv << fmt(mp_eta(x, beta));
        csv << ',';
        if (beta.value() + x != 0.0) csv << fmt(mp_s_transform(x, beta));
        csv << ",bulk\n";
    }
    if (mp_atom(beta) > 0.0) csv << "0," << fmt(mp_atom(beta)) << ",,,atom\n";
    emit(a.out, csv.str());
    record(a.out, "mp", argv, {{"beta", a.beta}, {"grid", {g.lo, g.hi, g.count}}}, std::nullopt);
    return 0;
}

// --- aepdf ----------------------------------------------------------------------------

struct AepdfArgs {
    double beta = 1.0;
    double gamma = 1.0;
    double qtilde = 1.0;
    double ptilde = 0.0;
    std::vector<std::string> targets{"K"};
    std::string grid;
    std::string out;
};

SpectralDensity law_of(TargetMatrix t, const EffectiveScales& s, std::vector<double> grid,
                       ExtractionReport* report = nullptr) {
    switch (t) {
        case TargetMatrix::N: return aepdf_N(s, std::move(grid));
        case TargetMatrix::M: return aepdf_M(s, std::move(grid), report);
        case TargetMatrix::K: break;
    }
    return aepdf_K(s, std::move(grid), report);
}

std::string output_for_target(const std::string& out, TargetMatrix t, bool several) {
    if (out.empty() || !several) return out;
    std::filesystem::path p(out);
    const std::string ext = p.extension().string();
    p.replace_filename(p.stem().string() + "_" + to_string(t) + ext);
    return p.string();
}

EffectiveScales scales_from(double qtilde, double ptilde, double beta, double gamma) {
    try {
        return EffectiveScales(qtilde, ptilde, AspectRatio(beta), AspectRatio(gamma));
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
}

int cmd_aepdf(const AepdfArgs& a, const std::vector<std::string>& argv) {
    const EffectiveScales s = scales_from(a.qtilde, a.ptilde, a.beta, a.gamma);
    std::vector<TargetMatrix> targets;
    for (const auto& t : a.targets) {
        try {
            targets.push_back(parse_target(t));
        } catch (const ValidationError& e) {
            throw UsageError(e.what());
        }
    }
    std::vector<double> grid;
    if (!a.grid.empty()) grid = to_grid(parse_grid(a.grid));
    info(a.out) << "scales: qtilde " << s.qtilde << ", ptilde " << s.ptilde << ", beta " << s.beta.value()
                  << ", gamma " << s.gamma.value() << (s.interference_free() ? " (interference free)" : "")
                  << '\n';

    json outputs = json::array();
    for (TargetMatrix t : targets) {
        ExtractionReport rep;
        const SpectralDensity d = law_of(t, s, grid, &rep);
        std::ostringstream csv;
        write_density_csv(csv, d);
        const std::string path = output_for_target(a.out, t, targets.size() > 1);
        emit(path, csv.str());
        info(a.out) << to_string(t) << ": normalization deviation " << d.normalization_deviation()
            << (rep.flagged_points ? ", flagged points " + std::to_string(rep.flagged_points) : std::string())
            << (path.empty() ? std::string() : " -> " + path) << '\n';
        outputs.push_back(path);
    }
    json params{{"beta", a.beta},     {"gamma", a.gamma}, {"qtilde", a.qtilde}, {"ptilde", a.ptilde},
                {"targets", a.targets}, {"grid", a.grid},   {"outputs", outputs}};
    record(a.out, "aepdf", argv, params, std::nullopt);
    return 0;
}

// --- verify ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string profile = "diminishing";
    std::string sigma_csv;
    std::string sigma_i_csv;
    int k = 60;
    double beta = 5.0;
    double gamma = 10.0;
    double qtilde = 10.0;
    double ptilde = 5.0;
    std::vector<std::string> targets{"N", "M", "K"};
    int iterations = 1000;
    std::optional<std::uint64_t> seed;
    double l1_tol = 0.05;
    double capacity_tol = 0.03;
    std::string histogram_prefix;
    std::string out;
};

VarianceProfile read_profile_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open profile " + path);
    return read_profile_csv(in);
}

int count_of(double ratio, int k, const char* name) {
    const double n = ratio * k;
    if (std::abs(n - std::round(n)) > 1e-9 || n < 1.0)
        throw UsageError(std::string("--") + name + " times --K must be a positive integer");
    return static_cast<int>(std::lround(n));
}

int cmd_verify(const VerifyArgs& a, const std::vector<std::string>& argv) {
    if (a.iterations < 1) throw UsageError("--iterations must be at least 1");
    if (a.k < 1) throw UsageError("--K must be at least 1");
    const std::uint64_t seed = resolve_seed(a.seed);

    std::optional<VarianceProfile> sigma, sigma_i;
    if (!a.sigma_csv.empty() || !a.sigma_i_csv.empty()) {
        if (a.sigma_csv.empty() || a.sigma_i_csv.empty())
            throw UsageError("--sigma-csv and --sigma-i-csv go together");
        sigma = read_profile_file(a.sigma_csv);
        sigma_i = read_profile_file(a.sigma_i_csv);
    } else {
        const int m = count_of(a.beta, a.k, "beta");
        const int n = count_of(a.gamma, a.k, "gamma");
        if (a.profile == "ones") {
            sigma = ones_profile(a.k, m);
            sigma_i = ones_profile(a.k, n);
        } else if (a.profile == "diminishing") {
            sigma = diminishing_profile(a.k, m);
            sigma_i = diminishing_profile(a.k, n);
        } else {
            throw UsageError("unknown --profile '" + a.profile + "' (expected ones or diminishing)");
        }
    }
    ChannelModel model = [&] {
        try {
            return model_for_scales(*sigma, *sigma_i, a.qtilde, a.ptilde);
        } catch (const ValidationError& e) {
            throw UsageError(e.what());
        }
    }();
    std::vector<TargetMatrix> targets;
    for (const auto& t : a.targets) {
        try {
            targets.push_back(parse_target(t));
        } catch (const ValidationError& e) {
            throw UsageError(e.what());
        }
    }

    const EffectiveScales scales = model.scales();
    info(a.out) << "dims K " << model.dims.K << ", M " << model.dims.M << ", N " << model.dims.N << "; "
              << a.iterations << " iterations, seed " << seed << '\n';
    const EmpiricalRun run = simulate(model, a.iterations, SeededStreams(seed));
    const double closed_capacity = capacity_closed_form(scales).nats;

    json reports = json::array();
    bool pass = true;
    for (TargetMatrix t : targets) {
        const SpectralDensity law = law_of(t, scales, {});
        const MCReport rep = build_report(run, t, law, t == TargetMatrix::K ? std::optional(closed_capacity) : std::nullopt);
        bool ok = rep.l1_distance <= a.l1_tol;
        if (t == TargetMatrix::K) ok = ok && rep.capacity_rel_err <= a.capacity_tol;
        pass = pass && ok;
        json j = to_json(rep);
        j["pass"] = ok;
        reports.push_back(j);
        info(a.out) << to_string(t) << ": L1 " << rep.l1_distance << ", KS " << rep.ks_distance;
        if (t == TargetMatrix::K)
            info(a.out) << ", capacity " << rep.capacity_nats_per_rx_dim << " vs " << closed_capacity
                      << " nats (rel err " << rep.capacity_rel_err << ")";
        info(a.out) << (ok ? "  PASS" : "  FAIL") << '\n';
        if (!a.histogram_prefix.empty()) {
            std::ostringstream csv;
            write_histogram_csv(csv, rep.histogram);
            write_text_file(a.histogram_prefix + "_" + to_string(t) + ".csv", csv.str());
        }
    }
    pass = pass && run.max_form_discrepancy <= 1e-9;

    json params{{"profile", a.sigma_csv.empty() ? a.profile : "csv"},
                {"sigma_csv", a.sigma_csv},
                {"sigma_i_csv", a.sigma_i_csv},
                {"K", model.dims.K},
                {"M", model.dims.M},
                {"N", model.dims.N},
                {"qtilde", a.qtilde},
                {"ptilde", a.ptilde},
                {"targets", a.targets},
                {"iterations", a.iterations},
                {"l1_tol", a.l1_tol},
                {"capacity_tol", a.capacity_tol}};
    json doc{{"params", params},
             {"scales", to_json(scales)},
             {"rng_seed", seed},
             {"closed_form_capacity", closed_capacity},
             {"max_form_discrepancy", run.max_form_discrepancy},
             {"reports", reports},
             {"pass", pass}};
    emit(a.out, dump_json(doc));
    record(a.out, "verify", argv, params, seed);
    info(a.out) << (pass ? "verification passed" : "verification FAILED") << '\n';
    return pass ? 0 : kExitFail;
}

// --- cellular -------------------------------------------------------------------------

struct CellularArgs {
    std::string config;
    std::optional<double> cell_radius_m, ref_distance_m, ref_pathloss_db, pathloss_exponent;
    std::optional<int> uts_per_cell, total_cells;
    std::optional<double> ut_tx_power_w, noise_density_dbm_hz, bandwidth_hz;
    std::string clusters = "1:10";
    int iterations = 100;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_cellular(const CellularArgs& a, const std::vector<std::string>& argv) {
    if (a.iterations < 0) throw UsageError("--iterations must be nonnegative");
    CellularConfig cfg;
    if (!a.config.empty()) {
        try {
            cfg = load_cellular_config(a.config);
        } catch (const ValidationError& e) {
            throw UsageError(e.what());
        }
    }
    if (a.cell_radius_m) cfg.cell_radius_m = *a.cell_radius_m;
    if (a.ref_distance_m) cfg.ref_distance_m = *a.ref_distance_m;
    if (a.ref_pathloss_db) cfg.ref_pathloss_db = *a.ref_pathloss_db;
    if (a.pathloss_exponent) cfg.pathloss_exponent = *a.pathloss_exponent;
    if (a.uts_per_cell) cfg.uts_per_cell = *a.uts_per_cell;
    if (a.total_cells) cfg.total_cells = *a.total_cells;
    if (a.ut_tx_power_w) cfg.ut_tx_power_w = *a.ut_tx_power_w;
    if (a.noise_density_dbm_hz) cfg.noise_density_dbm_hz = *a.noise_density_dbm_hz;
    if (a.bandwidth_hz) cfg.bandwidth_hz = *a.bandwidth_hz;

    const std::vector<int> clusters = parse_range(a.clusters);
    for (int c : clusters) {
        CellularConfig probe = cfg;
        probe.cluster_size = c;
        try {
            probe.validate();
        } catch (const ValidationError& e) {
            throw UsageError("cluster size " + std::to_string(c) + ": " + e.what());
        }
    }
    SweepOptions opt;
    opt.mc_iterations = a.iterations;
    std::optional<std::uint64_t> seed;
    if (a.iterations > 0) seed = opt.seed = resolve_seed(a.seed);

    const auto sweep = capacity_sweep(cfg, clusters, opt);
    for (const SweepPoint& p : sweep) {
        info(a.out) << "cluster " << p.cluster_size << ": " << p.closed_form.nats << " nats ("
                  << p.closed_form.bits << " bits) per receive dimension";
        if (p.monte_carlo)
            info(a.out) << ", simulated " << p.monte_carlo->capacity_nats_per_rx_dim << " (rel err " << p.rel_err << ")";
        info(a.out) << '\n';
        if (p.interference_free)
            info(a.out) << "cluster " << p.cluster_size
                      << ": no interferers remain, interference-free branch (ptilde = 0)\n";
    }
    std::ostringstream csv;
    write_sweep_csv(csv, sweep);
    emit(a.out, csv.str());

    std::ostringstream cfg_text;
    write_cellular_config(cfg_text, cfg);
    json params{{"config", cfg_text.str()}, {"clusters", clusters}, {"iterations", a.iterations}};
    record(a.out, "cellular", argv, params, seed);
    return 0;
}

// --- dispatch -------------------------------------------------------------------------

int run(std::vector<std::string> argv);

int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
    RunManifest m;
    try {
        m = read_manifest(manifest_path);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    if (m.argv.empty() || m.command == "replay") throw UsageError("manifest holds no replayable command");
    std::vector<std::string> argv = m.argv;
    const bool has_seed = std::find(argv.begin(), argv.end(), "--seed") != argv.end();
    if (m.rng_seed && !has_seed) {
        argv.push_back("--seed");
        argv.push_back(std::to_string(*m.rng_seed));
    }
    if (!out_override.empty()) {
        const auto it = std::find(argv.begin(), argv.end(), "--out");
        if (it != argv.end() && it + 1 != argv.end()) *(it + 1) = out_override;
        else {
            argv.push_back("--out");
            argv.push_back(out_override);
        }
    }
    std::cerr << "replaying " << m.command << " (recorded " << m.timestamp << ", version " << m.version << ")\n";
    return run(argv);
}

int run(std::vector<std::string> argv) {
    CLI::App app{"Spectra and ergodic capacity of MIMO channels with cochannel interference"};
    app.name(argv.empty() ? "freecap" : argv.front());
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    MpArgs mp;
    auto* mp_cmd = app.add_subcommand("mp", "Marcenko-Pastur density, eta and S-transform on a grid");
    mp_cmd->add_option("--beta", mp.beta, "aspect ratio beta > 0")->required();
    mp_cmd->add_option("--grid", mp.grid, "lo:hi:n (default: 401 points over [0, (1+sqrt(beta))^2])");
    mp_cmd->add_option("--out", mp.out, "CSV path (stdout when omitted)");

    AepdfArgs ae;
    auto* ae_cmd = app.add_subcommand("aepdf", "asymptotic eigenvalue density of N, M or K");
    ae_cmd->add_option("--beta", ae.beta, "M/K")->required();
    ae_cmd->add_option("--gamma", ae.gamma, "N/K (ignored when ptilde is 0)");
    ae_cmd->add_option("--qtilde", ae.qtilde, "effective signal scale")->required();
    ae_cmd->add_option("--ptilde", ae.ptilde, "effective interference scale (0: none)");
    ae_cmd->add_option("--target", ae.targets, "N, M or K; comma separated for several")->delimiter(',');
    ae_cmd->add_option("--grid", ae.grid, "lo:hi:n (default: automatic)");
    ae_cmd->add_option("--out", ae.out, "CSV path; with several targets _N, _M, _K are appended");

    VerifyArgs ve;
    auto* ve_cmd = app.add_subcommand("verify", "closed form against Monte Carlo");
    ve_cmd->add_option("--profile", ve.profile, "ones or diminishing");
    ve_cmd->add_option("--sigma-csv", ve.sigma_csv, "signal profile CSV (overrides --profile)");
    ve_cmd->add_option("--sigma-i-csv", ve.sigma_i_csv, "interference profile CSV");
    ve_cmd->add_option("--K", ve.k, "receive dimensions");
    ve_cmd->add_option("--beta", ve.beta, "M/K");
    ve_cmd->add_option("--gamma", ve.gamma, "N/K");
    ve_cmd->add_option("--qtilde", ve.qtilde, "effective signal scale");
    ve_cmd->add_option("--ptilde", ve.ptilde, "effective interference scale");
    ve_cmd->add_option("--target", ve.targets, "subset of N,M,K")->delimiter(',');
    ve_cmd->add_option("--iterations", ve.iterations, "fading realizations");
    ve_cmd->add_option("--seed", ve.seed, "master seed (drawn and recorded when omitted)");
    ve_cmd->add_option("--l1-tol", ve.l1_tol, "L1 tolerance per target");
    ve_cmd->add_option("--capacity-tol", ve.capacity_tol, "relative capacity tolerance");
    ve_cmd->add_option("--histogram-prefix", ve.histogram_prefix, "write <prefix>_<target>.csv histograms");
    ve_cmd->add_option("--out", ve.out, "report JSON path (stdout when omitted)");

    CellularArgs ce;
    auto* ce_cmd = app.add_subcommand("cellular", "capacity against cooperating-cluster size");
    ce_cmd->add_option("--config", ce.config, "key = value file with the cellular parameters");
    ce_cmd->add_option("--cell-radius-m", ce.cell_radius_m);
    ce_cmd->add_option("--ref-distance-m", ce.ref_distance_m);
    ce_cmd->add_option("--ref-pathloss-db", ce.ref_pathloss_db, "attenuation at the reference distance");
    ce_cmd->add_option("--pathloss-exponent", ce.pathloss_exponent);
    ce_cmd->add_option("--uts-per-cell", ce.uts_per_cell);
    ce_cmd->add_option("--total-cells", ce.total_cells);
    ce_cmd->add_option("--ut-tx-power-w", ce.ut_tx_power_w);
    ce_cmd->add_option("--noise-density-dbm-hz", ce.noise_density_dbm_hz);
    ce_cmd->add_option("--bandwidth-hz", ce.bandwidth_hz);
    ce_cmd->add_option("--cluster,--clusters", ce.clusters, "cluster size or range a:b");
    ce_cmd->add_option("--iterations", ce.iterations, "Monte Carlo realizations per point (0: closed form only)");
    ce_cmd->add_option("--seed", ce.seed, "master seed (drawn and recorded when omitted)");
    ce_cmd->add_option("--out", ce.out, "sweep CSV path (stdout when omitted)");

    std::string manifest, replay_out;
    auto* re_cmd = app.add_subcommand("replay", "re-run a command from its manifest");
    re_cmd->add_option("manifest", manifest, "manifest JSON")->required();
    re_cmd->add_option("--out", replay_out, "write to this path instead of the recorded one");

    std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*mp_cmd) return cmd_mp(mp, argv);
        if (*ae_cmd) return cmd_aepdf(ae, argv);
        if (*ve_cmd) return cmd_verify(ve, argv);
        if (*ce_cmd) return cmd_cellular(ce, argv);
        if (*re_cmd) return cmd_replay(manifest, replay_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
        return kExitFail;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(std::vector<std::string>(argv, argv + argc));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFail;
    }
}
