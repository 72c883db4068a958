#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "tailsim/engine.hpp"
#include "tailsim/policies.hpp"
#include "tailsim/reference_engine.hpp"

using namespace tailsim;

namespace {

struct MapSink : CompletionSink {
    std::map<JobId, double> responses;
    void record(const Job& job, double response) override { responses[job.id] = response; }
};

// arrival stream with deliberate tie stress: simultaneous arrivals, exact
// repeats of the previous size, and sizes sitting exactly on the numbers
// the policies compare against (d=3, eps=4)
Trace stress_trace(std::uint64_t seed, std::size_t count, double lambda) {
    RandomStream rng(seed, "stress");
    ParetoDist sizes{1.5, 1.0};
    Trace t;
    double clock = 0.0;
    double last = 1.0;
    for (std::size_t i = 0; i < count; ++i) {
        if (rng.uniform() >= 0.15) clock += rng.exponential(lambda);
        double s;
        double v = rng.uniform();
        if (v < 0.08)
            s = last;
        else if (v < 0.12)
            s = 3.0;
        else if (v < 0.16)
            s = 4.0;
        else
            s = sizes.quantile(rng.uniform());
        last = s;
        t.push_back({clock, s});
    }
    return t;
}

void check_equivalence(const std::string& spec_str, int n, const Trace& trace) {
    INFO("policy " << spec_str << " n=" << n);
    PolicySpec spec = parse_policy(spec_str);

    auto policy = make_policy(spec);
    Engine eng(n, *policy);
    eng.set_validate(true);
    MapSink sink;
    eng.add_sink(&sink);
    RunStats stats = eng.run_trace(trace);

    RefResult ref = reference_run(spec, n, trace);

    REQUIRE(stats.completions == trace.size());
    REQUIRE(ref.responses.size() == trace.size());
    CHECK(stats.end_clock == Catch::Approx(ref.end_clock).margin(1e-9));
    for (const auto& [id, resp] : ref.responses) {
        REQUIRE(sink.responses.count(id) == 1);
        CHECK(sink.responses.at(id) == Catch::Approx(resp).margin(1e-9));
    }
}

const std::vector<std::pair<std::string, std::vector<int>>> kConfigs = {
    {"fcfs", {1, 3}},
    {"srpt", {1, 3}},
    {"sek:eps=4", {2, 3}},
    {"sek:eps=4,size=original", {2, 3}},
    {"split", {2, 3}},
    {"splitthresh:d=3,small=fcfs,steal=false", {2, 3}},
    {"splitthresh:d=3,small=fcfs,steal=true", {2, 3}},
    {"splitthresh:d=3,small=srpt,steal=false", {3}},
    {"splitthresh:d=3,small=srpt,steal=true", {2, 3}},
    {"tagsplit:d=3", {2, 3}},
    {"ps", {1}},
};

} // namespace

TEST_CASE("engines agree on randomized tie-heavy traces") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Trace t = stress_trace(seed, 250, 0.9);
        for (const auto& [spec, ns] : kConfigs)
            for (int n : ns) check_equivalence(spec, n, t);
    }
}

TEST_CASE("engines agree on degenerate traces") {
    Trace burst;
    for (int i = 0; i < 12; ++i) burst.push_back({0.0, ParetoDist{1.5, 1.0}.quantile(i / 12.0)});
    Trace single{{2.0, 7.5}};
    Trace twins{{0.0, 3.0}, {0.0, 3.0}, {0.0, 3.0}};
    Trace at_thresholds{{0.0, 3.0}, {0.5, 4.0}, {0.5, 4.0}, {1.0, 2.9}, {1.5, 3.1}, {1.5, 100.0}};
    // trigger one ulp-of-clock away from the crossing point
    Trace late_graze{{200000.0, 300.0}, {200000.0, 200.00000000001}, {200000.0, 1.0}, {200000.0, 1.0}};
    for (const Trace* t : {&burst, &single, &twins, &at_thresholds, &late_graze})
        for (const auto& [spec, ns] : kConfigs)
            for (int n : ns) check_equivalence(spec, n, *t);
    check_equivalence("sek:eps=200", 3, late_graze);
}

TEST_CASE("engines agree under heavy overload bursts") {
    // overload forces deep queues: allocation churn, stealing, migrations
    for (std::uint64_t seed = 21; seed <= 24; ++seed) {
        Trace t = stress_trace(seed, 300, 3.0);
        for (const auto& [spec, ns] : kConfigs)
            for (int n : ns) check_equivalence(spec, n, t);
    }
}
