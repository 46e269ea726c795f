// cdsense: Cramer-Rao bounds and Monte-Carlo saturation experiments for
// transmittance-difference (circular dichroism) sensing with coherent,
// Fock and twin-beam probes.
//
// Subcommands: bounds, ratio, sweep, simulate, validate.
// Exit codes: 0 success, 1 validation failure, 2 usage error.

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cdsense/sweep.hpp"

namespace {

// Flat key=value config file; '#' starts a comment. Keys are the long
// flag names with dashes or underscores interchangeably.
std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        for (auto& c : key)
            if (c == '-') c = '_';
        if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

struct Options {
    cdsense::SweepConfig cfg;
    std::string probe_name = "fock";
    std::string ratio_mode = "classical";
    std::string config_path;
};

void apply_config_file(Options& opt) {
    if (opt.config_path.empty()) return;
    const auto kv = load_config(opt.config_path);
    const auto get_d = [&](const char* k, double& dst) {
        if (auto it = kv.find(k); it != kv.end()) dst = std::stod(it->second);
    };
    get_d("tl", opt.cfg.t_l);
    get_d("tr", opt.cfg.t_r);
    get_d("eta_l", opt.cfg.eta_l);
    get_d("eta_r", opt.cfg.eta_r);
    get_d("n_tot", opt.cfg.n_tot);
    get_d("ratio", opt.cfg.ratio);
    get_d("grid_min", opt.cfg.grid_min);
    get_d("grid_max", opt.cfg.grid_max);
    get_d("x_min", opt.cfg.x_min);
    get_d("x_max", opt.cfg.x_max);
    if (auto it = kv.find("grid"); it != kv.end()) opt.cfg.grid_points = std::stoi(it->second);
    if (auto it = kv.find("points"); it != kv.end()) opt.cfg.x_points = std::stoi(it->second);
    if (auto it = kv.find("seed"); it != kv.end()) opt.cfg.seed = std::stoull(it->second);
    if (auto it = kv.find("nu"); it != kv.end())
        opt.cfg.nu = static_cast<std::size_t>(std::stoull(it->second));
    if (auto it = kv.find("seeds"); it != kv.end()) opt.cfg.n_seeds = std::stoi(it->second);
    if (auto it = kv.find("cutoff"); it != kv.end()) opt.cfg.cutoff = std::stoi(it->second);
    if (auto it = kv.find("out"); it != kv.end()) opt.cfg.out = it->second;
    if (auto it = kv.find("probe"); it != kv.end()) opt.probe_name = it->second;
    if (auto it = kv.find("mode"); it != kv.end()) opt.ratio_mode = it->second;
}

cdsense::Probe parse_probe(const std::string& name) {
    if (name == "coherent") return cdsense::Probe::Coherent;
    if (name == "fock") return cdsense::Probe::Fock;
    if (name == "tmsv") return cdsense::Probe::Tmsv;
    throw std::invalid_argument("--probe must be one of coherent|fock|tmsv, got '" + name + "'");
}

// Writes to --out when given, stdout otherwise.
class OutputSink {
public:
    explicit OutputSink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw std::runtime_error("cannot open output file: " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void add_common_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--tl", opt.cfg.t_l, "analyte transmittance of the L arm");
    cmd->add_option("--tr", opt.cfg.t_r, "analyte transmittance of the R arm");
    cmd->add_option("--eta-l", opt.cfg.eta_l, "excess-loss transmittance of the L arm");
    cmd->add_option("--eta-r", opt.cfg.eta_r, "excess-loss transmittance of the R arm");
    cmd->add_option("--n-tot", opt.cfg.n_tot, "total mean photon number per shot");
    cmd->add_option("--ratio", opt.cfg.ratio, "energy fraction N_L/N_tot");
    cmd->add_option("--probe", opt.probe_name, "probe state: coherent|fock|tmsv");
    cmd->add_option("--grid", opt.cfg.grid_points, "grid points per axis");
    cmd->add_option("--out", opt.cfg.out, "output CSV path (default stdout)");
    cmd->add_option("--seed", opt.cfg.seed, "base RNG seed");
    cmd->add_option("--nu", opt.cfg.nu, "repetitions per seed");
    cmd->add_option("--seeds", opt.cfg.n_seeds, "number of seeds");
    cmd->add_option("--cutoff", opt.cfg.cutoff, "photon-number cutoff (-1: automatic)");
    cmd->add_option("--config", opt.config_path, "flat key=value config file");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cramer-Rao bounds for circular-dichroism sensing with quantum light"};
    app.require_subcommand(1);

    Options opt;
    auto* bounds = app.add_subcommand("bounds", "closed-form bound report at one scenario");
    auto* ratio = app.add_subcommand("ratio", "optimal energy split as a function of log10(x)");
    ratio->add_option("--mode", opt.ratio_mode, "x definition: classical|uql");
    ratio->add_option("--x-min", opt.cfg.x_min, "log10(x) lower end");
    ratio->add_option("--x-max", opt.cfg.x_max, "log10(x) upper end");
    ratio->add_option("--points", opt.cfg.x_points, "number of samples");
    auto* sweep = app.add_subcommand("sweep", "(T_L, T_R) grid of all bounds as CSV");
    sweep->add_option("--grid-min", opt.cfg.grid_min, "grid lower bound");
    sweep->add_option("--grid-max", opt.cfg.grid_max, "grid upper bound");
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo MLE saturation run");
    auto* validate = app.add_subcommand("validate", "run the full oracle cross-check suite");
    for (auto* cmd : {bounds, ratio, sweep, simulate}) add_common_flags(cmd, opt);
    validate->add_option("--config", opt.config_path, "flat key=value config file");

    try {
        // Config-file values are applied before reparsing so that explicit
        // command-line flags win.
        app.parse(argc, argv);
        if (!opt.config_path.empty()) {
            Options defaults;
            defaults.config_path = opt.config_path;
            apply_config_file(defaults);
            opt = defaults;
            app.clear();
            app.parse(argc, argv);
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        opt.cfg.probe = parse_probe(opt.probe_name);
        OutputSink sink(opt.cfg.out);
        if (bounds->parsed()) {
            cdsense::run_bounds(opt.cfg, sink.stream());
        } else if (ratio->parsed()) {
            cdsense::RatioMode mode;
            if (opt.ratio_mode == "classical")
                mode = cdsense::RatioMode::Classical;
            else if (opt.ratio_mode == "uql")
                mode = cdsense::RatioMode::Uql;
            else
                throw std::invalid_argument("--mode must be classical or uql");
            cdsense::run_ratio(opt.cfg, mode, sink.stream());
        } else if (sweep->parsed()) {
            cdsense::run_sweep(opt.cfg, sink.stream());
        } else if (simulate->parsed()) {
            cdsense::run_simulate(opt.cfg, sink.stream());
        } else if (validate->parsed()) {
            if (!cdsense::run_validate(sink.stream())) return 1;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "cdsense: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "cdsense: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "cdsense: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
