#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace tailsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Job size distributions. Each variant exposes:
//   tail(t)        P{S > t}, right-continuous, 1 below the support
//   quantile(p)    smallest t with P{S <= t} >= p, p in [0, 1)
//   mean()         E[S]
//   second_moment() E[S^2], +inf when the integral diverges
//   mean_above(x)  E[S * 1{S > x}]
//   support_sup()  supremum of the support (+inf if unbounded)
// Sampling is inverse-transform: sample(u) = quantile(u) for uniform u.

struct ParetoDist {
    double alpha; // tail index, > 1 so the mean is finite
    double xmin;  // left edge of support

    ParetoDist(double alpha_, double xmin_) : alpha(alpha_), xmin(xmin_) {
        if (!(alpha > 1.0))
            throw std::invalid_argument("pareto: alpha must be > 1");
        if (!(xmin > 0.0))
            throw std::invalid_argument("pareto: xmin must be > 0");
    }

    double tail(double t) const {
        return t < xmin ? 1.0 : std::pow(t / xmin, -alpha);
    }
    double quantile(double p) const {
        return xmin * std::pow(1.0 - p, -1.0 / alpha);
    }
    double mean() const { return alpha * xmin / (alpha - 1.0); }
    double second_moment() const {
        return alpha > 2.0 ? alpha * xmin * xmin / (alpha - 2.0) : kInf;
    }
    double mean_above(double x) const {
        if (x <= xmin) return mean();
        return mean() * std::pow(x / xmin, 1.0 - alpha);
    }
    double support_sup() const { return kInf; }
};

struct BoundedParetoDist {
    double alpha;
    double xmin;
    double xmax;

    BoundedParetoDist(double alpha_, double xmin_, double xmax_)
        : alpha(alpha_), xmin(xmin_), xmax(xmax_) {
        if (!(alpha > 1.0))
            throw std::invalid_argument("bpareto: alpha must be > 1");
        if (!(xmin > 0.0))
            throw std::invalid_argument("bpareto: xmin must be > 0");
        if (!(xmax > xmin))
            throw std::invalid_argument("bpareto: xmax must be > xmin");
    }

    // normalization: P{S > t} = (t^-a - xmax^-a) / (xmin^-a - xmax^-a)
    double norm() const {
        return std::pow(xmin, -alpha) - std::pow(xmax, -alpha);
    }
    double tail(double t) const {
        if (t < xmin) return 1.0;
        if (t >= xmax) return 0.0;
        return (std::pow(t, -alpha) - std::pow(xmax, -alpha)) / norm();
    }
    double quantile(double p) const {
        double m = (1.0 - p) * std::pow(xmin, -alpha) + p * std::pow(xmax, -alpha);
        return std::pow(m, -1.0 / alpha);
    }
    double mean() const { return partial_mean(xmin); }
    double second_moment() const {
        if (alpha == 2.0)
            return 2.0 * (std::log(xmax) - std::log(xmin)) / norm();
        return alpha / (alpha - 2.0) *
               (std::pow(xmin, 2.0 - alpha) - std::pow(xmax, 2.0 - alpha)) / norm();
    }
    double mean_above(double x) const {
        if (x <= xmin) return mean();
        if (x >= xmax) return 0.0;
        return partial_mean(x);
    }
    double support_sup() const { return xmax; }

private:
    // E[S * 1{S > x}] for x within the support
    double partial_mean(double x) const {
        return alpha / (alpha - 1.0) *
               (std::pow(x, 1.0 - alpha) - std::pow(xmax, 1.0 - alpha)) / norm();
    }
};

struct ExponentialDist {
    double rate; // E[S] = 1/rate

    explicit ExponentialDist(double rate_) : rate(rate_) {
        if (!(rate > 0.0))
            throw std::invalid_argument("exp: rate must be > 0");
    }

    double tail(double t) const { return t <= 0.0 ? 1.0 : std::exp(-rate * t); }
    double quantile(double p) const { return -std::log1p(-p) / rate; }
    double mean() const { return 1.0 / rate; }
    double second_moment() const { return 2.0 / (rate * rate); }
    double mean_above(double x) const {
        if (x <= 0.0) return mean();
        return (x + 1.0 / rate) * std::exp(-rate * x);
    }
    double support_sup() const { return kInf; }
};

struct DeterministicDist {
    double value;

    explicit DeterministicDist(double value_) : value(value_) {
        if (!(value > 0.0))
            throw std::invalid_argument("det: value must be > 0");
    }

    double tail(double t) const { return t < value ? 1.0 : 0.0; }
    double quantile(double) const { return value; }
    double mean() const { return value; }
    double second_moment() const { return value * value; }
    double mean_above(double x) const { return x < value ? value : 0.0; }
    double support_sup() const { return value; }
};

using SizeDistribution =
    std::variant<ParetoDist, BoundedParetoDist, ExponentialDist, DeterministicDist>;

inline double tail(const SizeDistribution& d, double t) {
    return std::visit([t](const auto& v) { return v.tail(t); }, d);
}
inline double quantile(const SizeDistribution& d, double p) {
    if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument("quantile: p must be in [0, 1)");
    return std::visit([p](const auto& v) { return v.quantile(p); }, d);
}
inline double mean(const SizeDistribution& d) {
    return std::visit([](const auto& v) { return v.mean(); }, d);
}
inline double second_moment(const SizeDistribution& d) {
    return std::visit([](const auto& v) { return v.second_moment(); }, d);
}
inline double mean_above(const SizeDistribution& d, double x) {
    return std::visit([x](const auto& v) { return v.mean_above(x); }, d);
}
inline double support_sup(const SizeDistribution& d) {
    return std::visit([](const auto& v) { return v.support_sup(); }, d);
}
// inverse-transform sample from a uniform draw u in [0, 1)
inline double sample(const SizeDistribution& d, double u) {
    return std::visit([u](const auto& v) { return v.quantile(u); }, d);
}

// ---- spec strings ----------------------------------------------------------
// "pareto:alpha=1.5,xmin=1"  "bpareto:alpha=1.5,xmin=1,xmax=1e6"
// "exp:rate=1"               "det:value=5"
// Names and keys are case-insensitive; unknown or missing keys are errors.

inline std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline double parse_number(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(what + ": bad number '" + s + "'");
    }
    if (pos != s.size())
        throw std::invalid_argument(what + ": bad number '" + s + "'");
    return v;
}

// key=value pairs after the spec name, comma separated
inline std::map<std::string, std::string> parse_kv(const std::string& body,
                                                   const std::string& what) {
    std::map<std::string, std::string> kv;
    if (!body.empty() && body.back() == ',')
        throw std::invalid_argument(what + ": trailing comma");
    std::size_t start = 0;
    while (start < body.size()) {
        std::size_t end = body.find(',', start);
        if (end == std::string::npos) end = body.size();
        std::string item = body.substr(start, end - start);
        std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
            throw std::invalid_argument(what + ": expected key=value, got '" + item + "'");
        std::string key = to_lower(item.substr(0, eq));
        if (kv.count(key))
            throw std::invalid_argument(what + ": duplicate key '" + key + "'");
        kv[key] = item.substr(eq + 1);
        start = end + 1;
    }
    return kv;
}

inline double take_number(std::map<std::string, std::string>& kv, const std::string& key,
                          const std::string& what) {
    auto it = kv.find(key);
    if (it == kv.end())
        throw std::invalid_argument(what + ": missing key '" + key + "'");
    double v = parse_number(it->second, what + "." + key);
    kv.erase(it);
    return v;
}

inline void reject_leftovers(const std::map<std::string, std::string>& kv,
                             const std::string& what) {
    if (!kv.empty())
        throw std::invalid_argument(what + ": unknown key '" + kv.begin()->first + "'");
}

inline SizeDistribution parse_distribution(const std::string& spec) {
    std::size_t colon = spec.find(':');
    std::string name = to_lower(spec.substr(0, colon));
    std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto kv = parse_kv(body, "dist '" + name + "'");
    if (name == "pareto") {
        double a = take_number(kv, "alpha", name);
        double m = take_number(kv, "xmin", name);
        reject_leftovers(kv, name);
        return ParetoDist(a, m);
    }
    if (name == "bpareto") {
        double a = take_number(kv, "alpha", name);
        double m = take_number(kv, "xmin", name);
        double M = take_number(kv, "xmax", name);
        reject_leftovers(kv, name);
        return BoundedParetoDist(a, m, M);
    }
    if (name == "exp") {
        double r = take_number(kv, "rate", name);
        reject_leftovers(kv, name);
        return ExponentialDist(r);
    }
    if (name == "det") {
        double v = take_number(kv, "value", name);
        reject_leftovers(kv, name);
        return DeterministicDist(v);
    }
    throw std::invalid_argument("unknown distribution '" + name + "'");
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string to_spec_string(const SizeDistribution& d) {
    struct V {
        std::string operator()(const ParetoDist& p) const {
            return "pareto:alpha=" + format_number(p.alpha) + ",xmin=" + format_number(p.xmin);
        }
        std::string operator()(const BoundedParetoDist& p) const {
            return "bpareto:alpha=" + format_number(p.alpha) + ",xmin=" + format_number(p.xmin) +
                   ",xmax=" + format_number(p.xmax);
        }
        std::string operator()(const ExponentialDist& e) const {
            return "exp:rate=" + format_number(e.rate);
        }
        std::string operator()(const DeterministicDist& v) const {
            return "det:value=" + format_number(v.value);
        }
    };
    return std::visit(V{}, d);
}

// ---- system parameters and threshold solvers -------------------------------

// n identical unit-speed servers at load rho; arrivals are Poisson with
// rate lambda = n * rho / E[S], so rho = lambda * E[S] / n.
struct SystemParams {
    int n;
    double rho;

    SystemParams(int n_, double rho_) : n(n_), rho(rho_) {
        if (n < 1) throw std::invalid_argument("n must be >= 1");
        if (!(rho > 0.0 && rho < 1.0))
            throw std::invalid_argument("rho must be in (0, 1)");
    }

    double lambda(const SizeDistribution& d) const { return n * rho / mean(d); }

    // below this load the fair comparison is against P{S > t};
    // at or above it, against P{S > n(1-rho)t}
    bool max_stability() const { return rho < double(n - 1) / n; }
};

// work arriving per unit time in jobs larger than x
inline double resource_above(const SystemParams& sp, const SizeDistribution& d, double x) {
    if (x < 0.0) throw std::invalid_argument("resource_above: x must be >= 0");
    return sp.lambda(d) * mean_above(d, x);
}

// load the one-server stage sees when jobs move there after d of service:
// lambda * E[(S - d)+] = lambda * P{S > d} * (E[S | S > d] - d)
inline double tags_large_load(const SystemParams& sp, const SizeDistribution& d, double x) {
    if (x < 0.0) throw std::invalid_argument("tags_large_load: d must be >= 0");
    return sp.lambda(d) * (mean_above(d, x) - x * tail(d, x));
}

// Smallest x with f(x) == target for a non-increasing f that starts above
// target. Converges to the sign change, so step discontinuities resolve to
// the jump point.
template <class F>
inline double bisect_decreasing(F f, double target, const char* what) {
    double lo = 0.0;
    if (f(lo) < target)
        throw std::runtime_error(std::string(what) + ": target above the achievable range");
    if (f(lo) == target) return 0.0;
    double hi = 1.0;
    while (f(hi) >= target) {
        hi *= 2.0;
        if (hi > 1e30)
            throw std::runtime_error(std::string(what) + ": no finite threshold reaches the target");
    }
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (f(mid) >= target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

// Cutoff d* with r_{>d*} = n*rho - (n-1): thresholds must stay below it to
// keep the n-1 small servers stable. Empty when rho < (n-1)/n, where any
// threshold works.
inline std::optional<double> solve_dstar(const SystemParams& sp, const SizeDistribution& d) {
    double target = sp.n * sp.rho - (sp.n - 1);
    if (target < 0.0) return std::nullopt;
    if (target == 0.0) {
        double sup = support_sup(d);
        return sup == kInf ? std::nullopt : std::optional<double>(sup);
    }
    return bisect_decreasing(
        [&](double x) { return resource_above(sp, d, x); }, target, "solve_dstar");
}

// Same cutoff for the attained-service variant: tags_large_load(d*) = n*rho - (n-1),
// and thresholds must stay above it.
inline std::optional<double> solve_tags_dstar(const SystemParams& sp, const SizeDistribution& d) {
    double target = sp.n * sp.rho - (sp.n - 1);
    if (target < 0.0) return std::nullopt;
    if (target == 0.0) {
        double sup = support_sup(d);
        return sup == kInf ? std::nullopt : std::optional<double>(sup);
    }
    return bisect_decreasing(
        [&](double x) { return tags_large_load(sp, d, x); }, target, "solve_tags_dstar");
}

} // namespace tailsim
