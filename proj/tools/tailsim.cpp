#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tailsim/experiment.hpp"

namespace {

using namespace tailsim;

// policy values may arrive space- or semicolon-joined from a config file
std::vector<std::string> split_policy_values(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& chunk : raw) {
        std::string cur;
        for (char ch : chunk) {
            if (ch == ' ' || ch == '\t' || ch == ';') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

struct RunFlags {
    std::string config;
    std::string preset;
    int n = 3;
    double rho = 0.5;
    std::string dist = "pareto:alpha=1.5,xmin=1";
    std::vector<std::string> policies;
    long long arrivals = 10000000;
    double warmup_frac = 0.01;
    std::uint64_t seed = 1;
    int reps = 1;
    std::string out = "out";
    int grid_points = 400;
    std::string probe;

    // which fields were stated explicitly, by flag or config file
    bool has_preset = false, has_n = false, has_rho = false, has_dist = false;
};

long long config_int(const std::string& key, const std::string& value) {
    double v = parse_number(value, key.c_str());
    long long r = std::llround(v);
    if (static_cast<double>(r) != v)
        throw std::invalid_argument("config: " + key + " must be an integer, got '" + value + "'");
    return r;
}

// plain key=value lines mirroring the run flags; '#' starts a comment.
// Values given as command-line flags take precedence over the file.
void apply_config_file(const CLI::App& cmd, RunFlags& f) {
    std::ifstream in(f.config);
    if (!in) throw IoError("cannot read config file " + f.config);

    auto flag_given = [&](const char* name) { return cmd.count(name) > 0; };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value: '" + line + "'");
        std::string key = line.substr(0, line.find_last_not_of(" \t", eq - 1) + 1);
        auto vstart = line.find_first_not_of(" \t", eq + 1);
        std::string value = vstart == std::string::npos ? "" : line.substr(vstart);

        if (key == "preset") {
            if (!flag_given("--preset")) { f.preset = value; f.has_preset = true; }
        } else if (key == "n") {
            if (!flag_given("--n")) { f.n = static_cast<int>(config_int(key, value)); f.has_n = true; }
        } else if (key == "rho") {
            if (!flag_given("--rho")) { f.rho = parse_number(value, "rho"); f.has_rho = true; }
        } else if (key == "dist") {
            if (!flag_given("--dist")) { f.dist = value; f.has_dist = true; }
        } else if (key == "policy") {
            if (!flag_given("--policy")) f.policies.push_back(value);
        } else if (key == "arrivals") {
            if (!flag_given("--arrivals")) f.arrivals = config_int(key, value);
        } else if (key == "warmup-frac") {
            if (!flag_given("--warmup-frac")) f.warmup_frac = parse_number(value, "warmup-frac");
        } else if (key == "seed") {
            if (!flag_given("--seed")) f.seed = static_cast<std::uint64_t>(config_int(key, value));
        } else if (key == "reps") {
            if (!flag_given("--reps")) f.reps = static_cast<int>(config_int(key, value));
        } else if (key == "out") {
            if (!flag_given("--out")) f.out = value;
        } else if (key == "grid-points") {
            if (!flag_given("--grid-points")) f.grid_points = static_cast<int>(config_int(key, value));
        } else if (key == "probe") {
            if (!flag_given("--probe")) f.probe = value;
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "' on line " +
                                        std::to_string(lineno));
        }
    }
}

int do_run(const CLI::App& cmd, RunFlags& f) {
    f.has_preset |= cmd.count("--preset") > 0;
    f.has_n |= cmd.count("--n") > 0;
    f.has_rho |= cmd.count("--rho") > 0;
    f.has_dist |= cmd.count("--dist") > 0;
    if (!f.config.empty()) apply_config_file(cmd, f);
    if (f.has_preset && !f.policies.empty())
        throw std::invalid_argument("--preset and --policy are mutually exclusive");

    std::vector<ExperimentConfig> configs;
    if (f.has_preset) {
        const Preset* p = find_preset(f.preset);
        if (!p) {
            std::string names;
            for (const auto& q : presets()) names += (names.empty() ? "" : ", ") + q.name;
            throw std::invalid_argument("unknown preset '" + f.preset + "' (have: " + names + ")");
        }
        configs = p->entries;
        for (auto& c : configs) {
            if (f.has_n) c.n = f.n;
            if (f.has_rho) c.rho = f.rho;
            if (f.has_dist) c.dist = f.dist;
        }
    } else {
        if (f.policies.empty())
            throw std::invalid_argument("either --preset or --policy is required");
        ExperimentConfig c;
        c.n = f.n;
        c.rho = f.rho;
        c.dist = f.dist;
        for (const auto& s : split_policy_values(f.policies))
            c.policies.push_back(policy_literal(s));
        configs.push_back(std::move(c));
    }

    for (auto& c : configs) {
        c.arrivals = f.arrivals;
        c.warmup_frac = f.warmup_frac;
        c.seed = f.seed;
        c.reps = f.reps;
        c.grid_points = f.grid_points;
        c.probe = f.probe;
    }

    std::vector<ResolvedEntry> entries;
    for (const auto& c : configs) entries.push_back(resolve_entry(c));
    run_experiment(entries, f.out, std::cerr);

    std::size_t runs = 0;
    for (const auto& e : entries) runs += e.policies.size() * static_cast<std::size_t>(e.reps);
    std::printf("wrote %zu run(s) to %s\n", runs, f.out.c_str());
    return 0;
}

int do_presets() {
    for (const auto& p : presets()) std::printf("%-22s %s\n", p.name.c_str(), p.description.c_str());
    return 0;
}

int do_threshold(int n, double rho, const std::string& dist_spec, const std::string& mode,
                 double target) {
    auto dist = parse_distribution(dist_spec);
    SystemParams sp(n, rho);
    double d = threshold_helper(sp, dist, parse_threshold_mode(mode), target);
    std::printf("%s\n", format_number(d).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"M/G/n queueing simulator for response-time tails"};
    app.require_subcommand(1);

    RunFlags f;
    auto* run = app.add_subcommand("run", "simulate a preset or a custom policy set");
    run->add_option("--config", f.config, "key=value file mirroring the flags below; flags win");
    run->add_option("--preset", f.preset, "named experiment from `presets`");
    run->add_option("--n", f.n, "server count")->check(CLI::PositiveNumber);
    run->add_option("--rho", f.rho, "per-server load, in (0,1)");
    run->add_option("--dist", f.dist, "size distribution spec")->capture_default_str();
    run->add_option("--policy", f.policies,
                    "policy spec (repeatable), e.g. srpt or splitthresh:d=36,small=srpt,steal=true");
    run->add_option("--arrivals", f.arrivals, "arrivals per run")->capture_default_str();
    run->add_option("--warmup-frac", f.warmup_frac, "fraction of arrivals excluded from stats")
        ->capture_default_str();
    run->add_option("--seed", f.seed, "base seed; rep k runs with seed+k")->capture_default_str();
    run->add_option("--reps", f.reps, "replications per policy")->check(CLI::PositiveNumber);
    run->add_option("--out", f.out, "output directory")->capture_default_str();
    run->add_option("--grid-points", f.grid_points, "log-grid resolution")
        ->check(CLI::PositiveNumber);
    run->add_option("--probe", f.probe, "extra instrumentation")
        ->check(CLI::IsMember({"pidle", "ljf"}));

    auto* pres = app.add_subcommand("presets", "list the named experiments");

    int tn = 3;
    double trho = 0.5, ttarget = 0.0;
    std::string tdist = "pareto:alpha=1.5,xmin=1", tmode;
    auto* thr = app.add_subcommand("threshold", "resolve a size cutoff from a rule");
    thr->add_option("--n", tn, "server count")->check(CLI::PositiveNumber);
    thr->add_option("--rho", trho, "per-server load, in (0,1)");
    thr->add_option("--dist", tdist, "size distribution spec")->capture_default_str();
    thr->add_option("--mode", tmode, "quantile, big_load, or tags_load")->required();
    thr->add_option("--target", ttarget, "quantile level or load target")->required();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return do_run(*run, f);
        if (pres->parsed()) return do_presets();
        return do_threshold(tn, trho, tdist, tmode, ttarget);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const tailsim::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
