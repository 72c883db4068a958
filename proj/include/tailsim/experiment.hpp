#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tailsim/distributions.hpp"
#include "tailsim/engine.hpp"
#include "tailsim/policies.hpp"
#include "tailsim/probes.hpp"
#include "tailsim/tail_stats.hpp"

namespace tailsim {

// ---------------------------------------------------------------------------
// threshold selection

enum class ThresholdMode { kQuantile, kBigLoad, kTagsLoad };

inline const char* threshold_mode_name(ThresholdMode m) {
    switch (m) {
        case ThresholdMode::kQuantile: return "quantile";
        case ThresholdMode::kBigLoad: return "big_load";
        case ThresholdMode::kTagsLoad: return "tags_load";
    }
    throw std::logic_error("unreachable");
}

inline ThresholdMode parse_threshold_mode(const std::string& s) {
    std::string v = to_lower(s);
    if (v == "quantile") return ThresholdMode::kQuantile;
    if (v == "big_load") return ThresholdMode::kBigLoad;
    if (v == "tags_load") return ThresholdMode::kTagsLoad;
    throw std::invalid_argument("threshold mode: expected quantile/big_load/tags_load, got '" + s + "'");
}

// Size cutoff d achieving the requested target: a size quantile, a dedicated
// big-server load r_{>d}, or a post-cutoff overflow load. Load targets at or
// below n*rho - (n-1) would starve the small servers of capacity; the cutoff
// where that happens is reported in the error.
inline double threshold_helper(const SystemParams& sp, const SizeDistribution& dist,
                               ThresholdMode mode, double target) {
    if (mode == ThresholdMode::kQuantile) return quantile(dist, target);

    double critical = sp.n * sp.rho - (sp.n - 1);
    if (target < critical) {
        auto dstar = mode == ThresholdMode::kBigLoad ? solve_dstar(sp, dist)
                                                     : solve_tags_dstar(sp, dist);
        throw std::invalid_argument(
            std::string(threshold_mode_name(mode)) + " target " + format_number(target) +
            " is below the stability floor " + format_number(critical) +
            "; the smallest feasible cutoff is d* = " +
            (dstar ? format_number(*dstar) : std::string("inf")));
    }
    if (mode == ThresholdMode::kBigLoad)
        return bisect_decreasing([&](double x) { return resource_above(sp, dist, x); },
                                 target, "big_load threshold");
    return bisect_decreasing([&](double x) { return tags_large_load(sp, dist, x); },
                             target, "tags_load threshold");
}

// ---------------------------------------------------------------------------
// experiment configuration

// Policy entry whose cutoff may be stated as a rule ("the 0.999 size
// quantile") rather than a number; rules are resolved against the final
// system parameters so overriding n/rho/dist re-derives the cutoffs.
struct PolicyTemplate {
    PolicySpec spec;
    std::optional<ThresholdMode> rule;
    double target = 0.0;
};

inline PolicyTemplate policy_literal(const std::string& spec) {
    return {parse_policy(spec), std::nullopt, 0.0};
}

inline PolicyTemplate policy_with_rule(const std::string& spec, ThresholdMode mode,
                                       double target) {
    return {parse_policy(spec), mode, target};
}

struct ExperimentConfig {
    std::string name;                     // filename prefix; empty for single-setting runs
    int n = 3;
    double rho = 0.5;
    std::string dist = "pareto:alpha=1.5,xmin=1";
    std::vector<PolicyTemplate> policies;
    long long arrivals = 10000000;
    double warmup_frac = 0.01;
    std::uint64_t seed = 1;
    int reps = 1;
    int grid_points = 400;
    std::string probe;                    // "", "pidle", "ljf"
};

struct Preset {
    std::string name;
    std::string description;
    std::vector<ExperimentConfig> entries;
};

namespace presetdetail {

inline ExperimentConfig setting(std::string name, int n, double rho, const std::string& dist) {
    ExperimentConfig c;
    c.name = std::move(name);
    c.n = n;
    c.rho = rho;
    c.dist = dist;
    return c;
}

inline void add_quantile_splitthresh(ExperimentConfig& c, const std::string& small, bool steal) {
    for (double p : {0.99, 0.999, 0.9999})
        c.policies.push_back(policy_with_rule(
            "splitthresh:d=1,small=" + small + ",steal=" + (steal ? "true" : "false"),
            ThresholdMode::kQuantile, p));
}

inline void add_load_splitthresh(ExperimentConfig& c, const std::string& small, bool steal) {
    for (double r : {0.45, 0.5, 0.6})
        c.policies.push_back(policy_with_rule(
            "splitthresh:d=1,small=" + small + ",steal=" + (steal ? "true" : "false"),
            ThresholdMode::kBigLoad, r));
}

inline void add_baselines(ExperimentConfig& c) {
    c.policies.push_back(policy_literal("fcfs"));
    c.policies.push_back(policy_literal("srpt"));
    c.policies.push_back(policy_literal("sek:eps=200"));
}

inline void add_sek_sweep(ExperimentConfig& c) {
    c.policies.push_back(policy_literal("srpt"));
    for (double eps : {1.0, 10.0, 50.0, 200.0})
        c.policies.push_back(policy_literal("sek:eps=" + format_number(eps)));
}

} // namespace presetdetail

inline const std::vector<Preset>& presets() {
    using namespace presetdetail;
    static const std::vector<Preset> table = [] {
        const std::string pareto15 = "pareto:alpha=1.5,xmin=1";
        std::vector<Preset> t;

        {
            auto c = setting("", 3, 0.5, pareto15);
            add_baselines(c);
            c.policies.push_back(policy_literal("split"));
            add_quantile_splitthresh(c, "fcfs", true);
            t.push_back({"exp1",
                         "low load (n=3, rho=0.5, alpha=1.5): baselines, split, and "
                         "splitthresh at the 0.99/0.999/0.9999 size quantiles",
                         {c}});
        }
        {
            auto c = setting("", 3, 0.5, pareto15);
            add_quantile_splitthresh(c, "fcfs", true);
            t.push_back({"exp1-thresh",
                         "low load (n=3, rho=0.5, alpha=1.5): the splitthresh sweep alone",
                         {c}});
        }
        {
            auto c = setting("", 3, 0.8, pareto15);
            add_baselines(c);
            add_load_splitthresh(c, "srpt", true);
            t.push_back({"exp2",
                         "high load (n=3, rho=0.8, alpha=1.5): baselines and splitthresh "
                         "at big-server load 0.45/0.5/0.6, srpt smalls",
                         {c}});
        }
        {
            auto c = setting("", 10, 0.94, pareto15);
            add_baselines(c);
            add_load_splitthresh(c, "srpt", true);
            t.push_back({"exp3",
                         "high load (n=10, rho=0.94, alpha=1.5): baselines and splitthresh "
                         "at big-server load 0.45/0.5/0.6, srpt smalls",
                         {c}});
        }
        {
            auto c = setting("", 3, 0.5, "pareto:alpha=1.4,xmin=1");
            add_baselines(c);
            c.policies.push_back(policy_literal("split"));
            t.push_back({"alpha14",
                         "heavier tail (n=3, rho=0.5, alpha=1.4): split and baselines",
                         {c}});
        }
        {
            auto c = setting("", 3, 0.5, "pareto:alpha=2.0,xmin=1");
            add_baselines(c);
            c.policies.push_back(policy_literal("split"));
            t.push_back({"alpha20",
                         "lighter tail (n=3, rho=0.5, alpha=2.0): split and baselines",
                         {c}});
        }
        {
            auto c = setting("", 3, 0.5, pareto15);
            for (double p : {0.99, 0.999, 0.9999})
                c.policies.push_back(
                    policy_with_rule("tagsplit:d=1", ThresholdMode::kQuantile, p));
            t.push_back({"tags-low",
                         "low load (n=3, rho=0.5, alpha=1.5): tagsplit at the "
                         "0.99/0.999/0.9999 size quantiles",
                         {c}});
        }
        {
            auto c = setting("", 3, 0.8, pareto15);
            for (double r : {0.45, 0.5, 0.6})
                c.policies.push_back(
                    policy_with_rule("tagsplit:d=1", ThresholdMode::kTagsLoad, r));
            t.push_back({"tags-high",
                         "high load (n=3, rho=0.8, alpha=1.5): tagsplit at overflow "
                         "load 0.45/0.5/0.6",
                         {c}});
        }
        {
            auto low = setting("low", 3, 0.5, pareto15);
            add_quantile_splitthresh(low, "fcfs", true);
            add_quantile_splitthresh(low, "srpt", true);
            auto high3 = setting("high-n3", 3, 0.8, pareto15);
            add_load_splitthresh(high3, "fcfs", true);
            add_load_splitthresh(high3, "srpt", true);
            auto high10 = setting("high-n10", 10, 0.94, pareto15);
            add_load_splitthresh(high10, "fcfs", true);
            add_load_splitthresh(high10, "srpt", true);
            t.push_back({"appendix-fcfs-vs-srpt",
                         "splitthresh with fcfs vs srpt smalls, side by side in all "
                         "three settings",
                         {low, high3, high10}});
        }
        {
            auto low = setting("low", 3, 0.5, pareto15);
            add_sek_sweep(low);
            auto high3 = setting("high-n3", 3, 0.8, pareto15);
            add_sek_sweep(high3);
            auto high10 = setting("high-n10", 10, 0.94, pareto15);
            add_sek_sweep(high10);
            auto a14 = setting("alpha14", 3, 0.5, "pareto:alpha=1.4,xmin=1");
            add_sek_sweep(a14);
            auto a20 = setting("alpha20", 3, 0.5, "pareto:alpha=2.0,xmin=1");
            add_sek_sweep(a20);
            t.push_back({"appendix-sek-sweep",
                         "sek for eps in {1,10,50,200} against srpt, in every setting",
                         {low, high3, high10, a14, a20}});
        }
        return t;
    }();
    return table;
}

inline const Preset* find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return &p;
    return nullptr;
}

// ---------------------------------------------------------------------------
// resolution: rules -> concrete cutoffs, plus audit numbers for the sidecar

struct ResolvedPolicy {
    PolicySpec spec;
    std::string spec_string;
    std::string label;
    std::optional<ThresholdMode> rule;
    double target = 0.0;
    std::optional<double> big_load;   // r_{>d} for splitthresh
    std::optional<double> small_load; // n*rho - r_{>d}
    std::optional<double> tags_load;  // overflow load for tagsplit
    bool stability_warning = false;
};

struct ResolvedEntry {
    std::string name;
    int n = 0;
    double rho = 0.0;
    std::string dist_spec;
    SizeDistribution dist = ParetoDist(1.5, 1.0); // replaced on resolve
    double lambda = 0.0;
    long long arrivals = 0;
    std::uint64_t warmup_arrivals = 0;
    double warmup_frac = 0.0;
    std::uint64_t seed = 0;
    int reps = 0;
    int grid_points = 0;
    std::string probe;
    std::vector<double> grid;
    std::vector<ResolvedPolicy> policies;
};

inline ResolvedEntry resolve_entry(const ExperimentConfig& c) {
    if (c.policies.empty()) throw std::invalid_argument("experiment: no policies given");
    if (c.arrivals <= 0) throw std::invalid_argument("experiment: arrivals must be > 0");
    if (!(c.warmup_frac >= 0.0 && c.warmup_frac < 1.0))
        throw std::invalid_argument("experiment: warmup-frac must be in [0, 1)");
    if (c.reps < 1) throw std::invalid_argument("experiment: reps must be >= 1");
    if (c.probe != "" && c.probe != "pidle" && c.probe != "ljf")
        throw std::invalid_argument("experiment: probe must be pidle or ljf");

    ResolvedEntry r;
    r.name = c.name;
    r.n = c.n;
    r.rho = c.rho;
    r.dist_spec = c.dist;
    r.dist = parse_distribution(c.dist);
    SystemParams sp(c.n, c.rho);
    r.lambda = sp.lambda(r.dist);
    r.arrivals = c.arrivals;
    r.warmup_frac = c.warmup_frac;
    r.warmup_arrivals =
        static_cast<std::uint64_t>(std::llround(c.warmup_frac * static_cast<double>(c.arrivals)));
    r.seed = c.seed;
    r.reps = c.reps;
    r.grid_points = c.grid_points;
    r.probe = c.probe;
    r.grid = default_grid(r.dist, c.grid_points);

    for (const auto& tpl : c.policies) {
        ResolvedPolicy rp;
        rp.spec = tpl.spec;
        rp.rule = tpl.rule;
        rp.target = tpl.target;
        if (tpl.rule)
            rp.spec.d = threshold_helper(sp, r.dist, *tpl.rule, tpl.target);
        rp.spec_string = to_spec_string(rp.spec);
        rp.label = policy_label(rp.spec);
        if (rp.spec.type == PolicyType::SplitThresh) {
            rp.big_load = resource_above(sp, r.dist, rp.spec.d);
            rp.small_load = c.n * c.rho - *rp.big_load;
            rp.stability_warning = *rp.small_load >= c.n - 1;
        } else if (rp.spec.type == PolicyType::TagSplit) {
            rp.tags_load = tags_large_load(sp, r.dist, rp.spec.d);
            rp.stability_warning = *rp.tags_load >= 1.0;
        }
        r.policies.push_back(std::move(rp));
    }
    return r;
}

// ---------------------------------------------------------------------------
// runner

struct RepOutcome {
    std::uint64_t seed = 0;
    RunStats stats;
    double wall_seconds = 0.0;
    std::string csv;
    std::optional<double> probe_pidle;
    std::optional<double> probe_pidle_tagged_time;
    std::optional<double> probe_ljf_fraction;
    std::optional<std::uint64_t> probe_ljf_tracked;
};

namespace rundetail {

inline void write_rows(const std::filesystem::path& path, const std::vector<NormalizedRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "t,ccdf_T,denominator,normalized\n";
    for (const auto& row : rows)
        out << format_number(row.t) << ',' << format_number(row.ccdf) << ','
            << format_number(row.yardstick) << ',' << format_number(row.normalized) << '\n';
    if (!out.flush()) throw IoError("cannot write " + path.string());
}

inline void write_policy_csvs(const std::filesystem::path& dir, const std::string& stem,
                              const TailStats& tail, const SystemParams& sp,
                              const SizeDistribution& dist, bool classes) {
    write_rows(dir / (stem + ".csv"), normalized_tail(tail.response_tail(), sp, dist));
    if (classes) {
        write_rows(dir / (stem + "_small.csv"),
                   normalized_tail(tail.response_tail_small(), sp, dist));
        write_rows(dir / (stem + "_big.csv"),
                   normalized_tail(tail.response_tail_big(), sp, dist));
    }
}

struct Task {
    const ResolvedEntry* entry;
    const ResolvedPolicy* policy;
    int rep;          // 1-based
    std::string stem; // file stem for this rep's csv
};

inline RepOutcome run_task(const Task& task, const std::filesystem::path& dir, TailStats& tail) {
    const ResolvedEntry& e = *task.entry;
    const ResolvedPolicy& p = *task.policy;
    RepOutcome out;
    out.seed = e.seed + static_cast<std::uint64_t>(task.rep);
    out.csv = task.stem + ".csv";

    auto policy = make_policy(p.spec);
    Engine eng(e.n, *policy);
    eng.add_sink(&tail);

    std::optional<TaggedIdleProbe> pidle;
    std::optional<LjfPromptnessProbe> ljf;
    if (e.probe == "pidle") {
        pidle.emplace(quantile(e.dist, 1.0 - 1e-4));
        eng.add_probe(&*pidle);
    } else if (e.probe == "ljf") {
        ljf.emplace(e.n - 1, quantile(e.dist, 0.9999));
        eng.add_probe(&*ljf);
    }

    auto t0 = std::chrono::steady_clock::now();
    out.stats = eng.run_poisson(e.dist, e.lambda, static_cast<std::uint64_t>(e.arrivals),
                                e.warmup_arrivals, out.seed);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (pidle) {
        out.probe_pidle = pidle->other_idle_fraction();
        out.probe_pidle_tagged_time = pidle->tagged_time();
    }
    if (ljf) {
        out.probe_ljf_fraction = ljf->prompt_fraction();
        out.probe_ljf_tracked = ljf->tracked();
    }

    SystemParams sp(e.n, e.rho);
    write_policy_csvs(dir, task.stem, tail, sp, e.dist, p.spec.size_threshold().has_value());
    return out;
}

inline nlohmann::ordered_json counters_json(const std::map<std::string, double>& c) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c) j[k] = v;
    return j;
}

} // namespace rundetail

// Runs every (entry, policy, rep) cell, writing one CSV per rep, a merged CSV
// per policy, and a metadata.json sidecar into out_dir. Reps of the same seed
// share arrival sample paths across policies. Cells run on a worker pool;
// each writes only its own files, and merging happens after all workers join.
inline void run_experiment(const std::vector<ResolvedEntry>& entries,
                           const std::filesystem::path& out_dir, std::ostream& warn) {
    namespace fs = std::filesystem;
    using rundetail::Task;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    for (const auto& e : entries)
        for (const auto& p : e.policies)
            if (p.stability_warning)
                warn << "warning: " << p.label << " leaves load "
                     << format_number(p.small_load ? *p.small_load : *p.tags_load)
                     << " on the non-dedicated stage; the run proceeds but will not settle\n";

    std::vector<Task> tasks;
    std::vector<TailStats> tails;
    for (const auto& e : entries) {
        std::string prefix = e.name.empty() ? "" : e.name + "-";
        for (const auto& p : e.policies)
            for (int rep = 1; rep <= e.reps; ++rep) {
                tasks.push_back({&e, &p, rep, prefix + p.label + "-rep" + std::to_string(rep)});
                tails.emplace_back(e.grid, p.spec.size_threshold());
            }
    }

    std::vector<RepOutcome> outcomes(tasks.size());
    std::vector<std::string> failures(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
            try {
                outcomes[i] = rundetail::run_task(tasks[i], out_dir, tails[i]);
            } catch (const std::exception& ex) {
                failures[i] = ex.what();
            }
        }
    };
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t pool = std::min<std::size_t>(tasks.size(), hw == 0 ? 1 : hw);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    for (const auto& f : failures)
        if (!f.empty()) throw std::runtime_error(f);

    nlohmann::ordered_json meta;
    meta["entries"] = nlohmann::ordered_json::array();

    std::size_t cursor = 0;
    for (const auto& e : entries) {
        std::string prefix = e.name.empty() ? "" : e.name + "-";
        nlohmann::ordered_json je;
        je["name"] = e.name;
        je["n"] = e.n;
        je["rho"] = e.rho;
        je["dist"] = e.dist_spec;
        je["lambda"] = e.lambda;
        je["arrivals"] = e.arrivals;
        je["warmup_frac"] = e.warmup_frac;
        je["warmup_arrivals"] = e.warmup_arrivals;
        je["seed"] = e.seed;
        je["reps"] = e.reps;
        je["grid_points"] = e.grid_points;
        je["grid_lo"] = e.grid.front();
        je["grid_hi"] = e.grid.back();
        if (!e.probe.empty()) je["probe"] = e.probe;
        je["policies"] = nlohmann::ordered_json::array();

        SystemParams sp(e.n, e.rho);
        for (const auto& p : e.policies) {
            nlohmann::ordered_json jp;
            jp["policy"] = p.spec_string;
            jp["label"] = p.label;
            if (p.rule) {
                jp["threshold_rule"] = threshold_mode_name(*p.rule);
                jp["threshold_target"] = p.target;
            }
            if (auto d = p.spec.size_threshold()) jp["threshold"] = *d;
            if (p.big_load) jp["big_load"] = *p.big_load;
            if (p.small_load) jp["small_load"] = *p.small_load;
            if (p.tags_load) jp["tags_load"] = *p.tags_load;
            if (p.stability_warning) jp["stability_warning"] = true;

            TailStats merged(e.grid, p.spec.size_threshold());
            jp["reps"] = nlohmann::ordered_json::array();
            for (int rep = 1; rep <= e.reps; ++rep, ++cursor) {
                merged.merge(tails[cursor]);
                const RepOutcome& o = outcomes[cursor];
                nlohmann::ordered_json jr;
                jr["rep"] = rep;
                jr["seed"] = o.seed;
                jr["csv"] = o.csv;
                jr["arrivals"] = o.stats.arrivals;
                jr["completions"] = o.stats.completions;
                jr["recorded"] = o.stats.recorded;
                jr["end_clock"] = o.stats.end_clock;
                jr["work_arrived"] = o.stats.work_arrived;
                jr["work_served"] = o.stats.work_served;
                if (!o.stats.policy_counters.empty())
                    jr["counters"] = rundetail::counters_json(o.stats.policy_counters);
                jr["wall_seconds"] = o.wall_seconds;
                if (o.probe_pidle) {
                    jr["pidle"] = *o.probe_pidle;
                    jr["pidle_tagged_time"] = *o.probe_pidle_tagged_time;
                }
                if (o.probe_ljf_fraction) {
                    jr["ljf_prompt_fraction"] = *o.probe_ljf_fraction;
                    jr["ljf_tracked"] = *o.probe_ljf_tracked;
                }
                jp["reps"].push_back(std::move(jr));
            }
            std::string stem = prefix + p.label;
            rundetail::write_policy_csvs(out_dir, stem, merged, sp, e.dist,
                                         p.spec.size_threshold().has_value());
            jp["merged_csv"] = stem + ".csv";
            je["policies"].push_back(std::move(jp));
        }
        meta["entries"].push_back(std::move(je));
    }

    std::ofstream mf(out_dir / "metadata.json");
    if (!mf) throw IoError("cannot write " + (out_dir / "metadata.json").string());
    mf << meta.dump(2) << '\n';
    if (!mf.flush()) throw IoError("cannot write " + (out_dir / "metadata.json").string());
}

} // namespace tailsim
