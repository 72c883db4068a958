#include <catch2/catch_amalgamated.hpp>

#include "tailsim/distributions.hpp"
#include "tailsim/rng.hpp"

#include "quadrature.hpp"

#include <cmath>
#include <vector>

using namespace tailsim;
using Catch::Approx;

namespace {

double tail_integral(const SizeDistribution& d, double a, double b) {
    return testutil::integrate([&](double t) { return tail(d, t); }, a, b);
}

// moment oracles driven only by the CCDF
double oracle_mean(const SizeDistribution& d, double upper) {
    return tail_integral(d, 0.0, upper);
}
double oracle_second_moment(const SizeDistribution& d, double upper) {
    return testutil::integrate([&](double t) { return 2.0 * t * tail(d, t); }, 0.0, upper);
}
double oracle_mean_above(const SizeDistribution& d, double x, double upper) {
    return x * tail(d, x) + tail_integral(d, x, upper);
}

} // namespace

TEST_CASE("pareto closed forms") {
    SizeDistribution d = ParetoDist(1.5, 1.0);

    CHECK(tail(d, 0.5) == 1.0);
    CHECK(tail(d, 1.0) == 1.0);
    CHECK(tail(d, 4.0) == Approx(0.125).epsilon(1e-13));

    CHECK(quantile(d, 0.0) == Approx(1.0));
    CHECK(quantile(d, 0.99) == Approx(std::pow(100.0, 2.0 / 3.0)).epsilon(1e-12));
    CHECK(quantile(d, 0.99) == Approx(21.5443469003).epsilon(1e-9));

    CHECK(mean(d) == Approx(3.0));
    CHECK(second_moment(d) == kInf);

    SizeDistribution d25 = ParetoDist(2.5, 1.0);
    CHECK(mean(d25) == Approx(5.0 / 3.0));
    CHECK(second_moment(d25) == Approx(5.0));
}

TEST_CASE("pareto moments match the ccdf integral") {
    SizeDistribution d15 = ParetoDist(1.5, 1.0);
    // alpha=1.5 converges slowly: truncate at q(1-1e-12) and allow the
    // leftover tail mass in the tolerance
    double upper = quantile(d15, 1.0 - 1e-12);
    CHECK(mean(d15) == Approx(oracle_mean(d15, upper)).epsilon(2e-3));
    CHECK(mean_above(d15, 36.0) == Approx(oracle_mean_above(d15, 36.0, upper)).epsilon(2e-3));

    SizeDistribution d25 = ParetoDist(2.5, 1.0);
    upper = quantile(d25, 1.0 - 1e-12);
    CHECK(mean(d25) == Approx(oracle_mean(d25, upper)).epsilon(1e-6));
    // E[S^2] has a t^-0.5 truncation remainder: integrate far out
    CHECK(second_moment(d25) == Approx(oracle_second_moment(d25, 1e9)).epsilon(1e-3));
    CHECK(mean_above(d25, 7.0) == Approx(oracle_mean_above(d25, 7.0, upper)).epsilon(1e-6));
}

TEST_CASE("bounded pareto") {
    SizeDistribution d = BoundedParetoDist(1.5, 1.0, 1e6);

    CHECK(tail(d, 0.1) == 1.0);
    CHECK(tail(d, 1e6) == 0.0);
    CHECK(tail(d, 2e6) == 0.0);
    CHECK(support_sup(d) == 1e6);

    // quantile inverts the ccdf across the support
    for (double p : {0.0, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-9}) {
        double t = quantile(d, p);
        CHECK(tail(d, t) == Approx(1.0 - p).margin(1e-12));
    }

    double upper = 1e6;
    CHECK(mean(d) == Approx(oracle_mean(d, upper)).epsilon(1e-4));
    CHECK(second_moment(d) == Approx(oracle_second_moment(d, upper)).epsilon(1e-4));
    CHECK(mean_above(d, 50.0) == Approx(oracle_mean_above(d, 50.0, upper)).epsilon(1e-4));

    // the log special case at alpha == 2
    SizeDistribution d2 = BoundedParetoDist(2.0, 1.0, 1e4);
    CHECK(second_moment(d2) == Approx(oracle_second_moment(d2, 1e4)).epsilon(1e-4));
}

TEST_CASE("exponential and deterministic") {
    SizeDistribution e = ExponentialDist(1.0);
    CHECK(mean(e) == Approx(1.0));
    CHECK(second_moment(e) == Approx(2.0));
    CHECK(quantile(e, 1.0 - std::exp(-2.0)) == Approx(2.0).epsilon(1e-12));
    CHECK(sample(e, 1.0 - std::exp(-2.0)) == Approx(2.0).epsilon(1e-12));
    CHECK(mean_above(e, 1.0) == Approx(oracle_mean_above(e, 1.0, 50.0)).epsilon(1e-6));

    SizeDistribution v = DeterministicDist(5.0);
    CHECK(tail(v, 4.999) == 1.0);
    CHECK(tail(v, 5.0) == 0.0);
    CHECK(quantile(v, 0.0) == 5.0);
    CHECK(quantile(v, 0.97) == 5.0);
    CHECK(mean(v) == 5.0);
    CHECK(second_moment(v) == 25.0);
    CHECK(mean_above(v, 2.0) == 5.0);
    CHECK(mean_above(v, 5.0) == 0.0);
}

TEST_CASE("tail is monotone and quantile round-trips") {
    std::vector<SizeDistribution> dists = {
        ParetoDist(1.5, 1.0), ParetoDist(2.5, 2.0), BoundedParetoDist(1.4, 1.0, 1e5),
        ExponentialDist(0.5)};
    for (const auto& d : dists) {
        double prev = 1.0;
        for (int i = 0; i <= 200; ++i) {
            double t = 1e-3 * std::pow(1.12, i);
            double ct = tail(d, t);
            CHECK(ct <= prev + 1e-15);
            CHECK(ct >= 0.0);
            prev = ct;
        }
        for (double p : {0.01, 0.3, 0.5, 0.9, 0.99, 0.9999, 1.0 - 1e-8}) {
            CHECK(tail(d, quantile(d, p)) == Approx(1.0 - p).epsilon(1e-10));
        }
    }
}

TEST_CASE("construction rejects bad parameters") {
    CHECK_THROWS_AS(ParetoDist(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ParetoDist(0.9, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ParetoDist(1.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BoundedParetoDist(1.5, 2.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(ExponentialDist(0.0), std::invalid_argument);
    CHECK_THROWS_AS(DeterministicDist(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(quantile(SizeDistribution(ParetoDist(1.5, 1.0)), 1.0),
                    std::invalid_argument);
}

TEST_CASE("spec string parsing") {
    auto d = parse_distribution("pareto:alpha=1.5,xmin=1");
    CHECK(std::holds_alternative<ParetoDist>(d));
    CHECK(mean(d) == Approx(3.0));

    // case-insensitive names and keys
    auto d2 = parse_distribution("PARETO:Alpha=1.5,XMIN=1");
    CHECK(to_spec_string(d2) == "pareto:alpha=1.5,xmin=1");

    auto b = parse_distribution("bpareto:alpha=1.5,xmin=1,xmax=1e6");
    CHECK(support_sup(b) == 1e6);
    CHECK(to_spec_string(b) == "bpareto:alpha=1.5,xmin=1,xmax=1000000");

    CHECK(mean(parse_distribution("exp:rate=2")) == Approx(0.5));
    CHECK(mean(parse_distribution("det:value=5")) == Approx(5.0));

    CHECK_THROWS_AS(parse_distribution("weibull:k=1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("pareto:alpha=1.5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("pareto:alpha=1.5,xmin=1,beta=2"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("pareto:alpha=1.5,alpha=2,xmin=1"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("pareto:alpha=abc,xmin=1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("pareto:alpha=1.5z,xmin=1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("exp:rate=1,"), std::invalid_argument);

    // round trip through the canonical string
    auto rt = parse_distribution(to_spec_string(parse_distribution("exp:rate=0.25")));
    CHECK(mean(rt) == Approx(4.0));
}

TEST_CASE("sampler matches the analytic ccdf") {
    RandomStream rs(1234, "sizes");
    std::vector<SizeDistribution> dists = {ParetoDist(1.5, 1.0), ParetoDist(2.5, 1.0),
                                           BoundedParetoDist(1.5, 1.0, 1e6),
                                           ExponentialDist(1.0)};
    const int N = 1000000;
    for (const auto& d : dists) {
        double probes[3] = {quantile(d, 0.5), quantile(d, 0.9), quantile(d, 0.99)};
        int exceed[3] = {0, 0, 0};
        double sum = 0.0;
        for (int i = 0; i < N; ++i) {
            double s = sample(d, rs.uniform());
            sum += s;
            for (int j = 0; j < 3; ++j)
                if (s > probes[j]) ++exceed[j];
        }
        for (int j = 0; j < 3; ++j) {
            double p = tail(d, probes[j]);
            double se = std::sqrt(p * (1.0 - p) / N);
            CHECK(std::abs(exceed[j] / double(N) - p) < 4.0 * se + 1e-9);
        }
        // sample mean converges when the variance is finite
        if (second_moment(d) < kInf)
            CHECK(sum / N == Approx(mean(d)).epsilon(0.05));
    }

    // deterministic sizes stay on the point mass
    SizeDistribution v = DeterministicDist(5.0);
    for (int i = 0; i < 100; ++i)
        CHECK(sample(v, rs.uniform()) == 5.0);
}

TEST_CASE("resource_above") {
    SystemParams sp(3, 0.8);
    SizeDistribution d = ParetoDist(1.5, 1.0);
    CHECK(sp.lambda(d) == Approx(0.8));
    CHECK(resource_above(sp, d, 0.5) == Approx(2.4).epsilon(1e-12));
    CHECK(resource_above(sp, d, 36.0) == Approx(0.4).epsilon(1e-12));

    SystemParams low(3, 0.5);
    CHECK(resource_above(low, d, 100.0) == Approx(0.15).epsilon(1e-12));

    // decreasing in x, total work rate at x = 0
    double prev = resource_above(sp, d, 0.0);
    CHECK(prev == Approx(3 * 0.8));
    for (double x : {1.0, 2.0, 10.0, 100.0, 1e4}) {
        double r = resource_above(sp, d, x);
        CHECK(r <= prev + 1e-15);
        prev = r;
    }
    CHECK_THROWS_AS(resource_above(sp, d, -1.0), std::invalid_argument);
}

TEST_CASE("tags_large_load") {
    SystemParams sp(3, 0.8);
    SizeDistribution d = ParetoDist(1.5, 1.0);
    CHECK(tags_large_load(sp, d, 1.0) == Approx(1.6).epsilon(1e-12));
    CHECK(tags_large_load(sp, d, 16.0) == Approx(0.4).epsilon(1e-12));
    // at d = 0 every job is "large" from the start: the full offered work
    CHECK(tags_large_load(sp, d, 0.0) == Approx(2.4).epsilon(1e-12));

    // below the support the residual is just lambda * (E[S] - d)
    SystemParams sp2(2, 0.9);
    SizeDistribution v = DeterministicDist(5.0);
    double lam = sp2.lambda(v);
    CHECK(tags_large_load(sp2, v, 2.0) == Approx(lam * 3.0).epsilon(1e-12));
    CHECK(tags_large_load(sp2, v, 5.0) == 0.0);

    // cross-check against the ccdf integral: lambda * E[(S-d)+]
    SizeDistribution p25 = ParetoDist(2.5, 1.0);
    double upper = quantile(p25, 1.0 - 1e-12);
    double want = sp.lambda(p25) *
                  testutil::integrate([&](double t) { return tail(p25, t); }, 3.0, upper);
    CHECK(tags_large_load(sp, p25, 3.0) == Approx(want).epsilon(1e-5));
}

TEST_CASE("solve_dstar") {
    SizeDistribution d = ParetoDist(1.5, 1.0);

    auto ds = solve_dstar(SystemParams(3, 0.8), d);
    REQUIRE(ds.has_value());
    CHECK(*ds == Approx(36.0).epsilon(1e-8));
    CHECK(resource_above(SystemParams(3, 0.8), d, *ds) == Approx(0.4).epsilon(1e-8));

    auto ds10 = solve_dstar(SystemParams(10, 0.94), d);
    REQUIRE(ds10.has_value());
    CHECK(*ds10 == Approx(552.25).epsilon(1e-8));

    // below the regime boundary every threshold keeps the small system stable
    CHECK_FALSE(solve_dstar(SystemParams(3, 0.6), d).has_value());

    // plug-back property on assorted systems
    for (auto sp : {SystemParams(2, 0.75), SystemParams(3, 0.9), SystemParams(5, 0.85)}) {
        auto r = solve_dstar(sp, d);
        REQUIRE(r.has_value());
        double target = sp.n * sp.rho - (sp.n - 1);
        CHECK(resource_above(sp, d, *r) == Approx(target).epsilon(1e-9));
    }
}

TEST_CASE("solve_tags_dstar") {
    SizeDistribution d = ParetoDist(1.5, 1.0);

    auto ts = solve_tags_dstar(SystemParams(3, 0.8), d);
    REQUIRE(ts.has_value());
    CHECK(*ts == Approx(16.0).epsilon(1e-8));

    auto t2 = solve_tags_dstar(SystemParams(2, 0.75), SizeDistribution(ParetoDist(2.5, 1.0)));
    REQUIRE(t2.has_value());
    CHECK(*t2 == Approx(std::pow(1.2, 2.0 / 3.0)).epsilon(1e-8));
    CHECK(*t2 == Approx(1.1292).epsilon(1e-4));

    CHECK_FALSE(solve_tags_dstar(SystemParams(3, 0.5), d).has_value());

    for (auto sp : {SystemParams(2, 0.8), SystemParams(4, 0.9)}) {
        auto r = solve_tags_dstar(sp, d);
        REQUIRE(r.has_value());
        double target = sp.n * sp.rho - (sp.n - 1);
        CHECK(tags_large_load(sp, d, *r) == Approx(target).epsilon(1e-9));
    }
}

TEST_CASE("system params validation") {
    CHECK_THROWS_AS(SystemParams(0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(SystemParams(3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(SystemParams(3, 1.0), std::invalid_argument);
    CHECK(SystemParams(3, 0.5).max_stability());
    CHECK_FALSE(SystemParams(3, 0.8).max_stability());
    CHECK_FALSE(SystemParams(3, 2.0 / 3.0).max_stability());
}

TEST_CASE("named substreams are decorrelated") {
    RandomStream a1(42, "inter-arrival");
    RandomStream a2(42, "inter-arrival");
    RandomStream s1(42, "sizes");
    CHECK(a1.uniform() == a2.uniform());
    RandomStream a3(42, "inter-arrival");
    CHECK(a3.uniform() != s1.uniform());

    // uniforms live in [0, 1)
    RandomStream u(7, "x");
    for (int i = 0; i < 10000; ++i) {
        double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}
