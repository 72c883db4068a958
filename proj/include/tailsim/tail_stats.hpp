#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tailsim/distributions.hpp"
#include "tailsim/sinks.hpp"
#include "tailsim/system_state.hpp"

namespace tailsim {

// log-spaced evaluation grid, strictly increasing
inline std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_grid: need 0 < lo < hi");
    if (points < 2) throw std::invalid_argument("log_grid: need at least 2 points");
    std::vector<double> g(points);
    double llo = std::log(lo), lhi = std::log(hi);
    for (int j = 0; j < points; ++j)
        g[j] = std::exp(llo + (lhi - llo) * j / (points - 1));
    g.front() = lo;
    g.back() = hi;
    for (int j = 1; j < points; ++j)
        if (g[j] <= g[j - 1]) g[j] = std::nextafter(g[j - 1], kInf);
    return g;
}

// spans the response-time range that matters for the tail study: from the
// median job size up to well past the size distribution's 1-1e-8 quantile
inline std::vector<double> default_grid(const SizeDistribution& dist, int points = 400) {
    double lo = quantile(dist, 0.5);
    double hi = quantile(dist, 1.0 - 1e-8) * 10.0;
    if (!(hi > lo)) hi = lo * 10.0;
    return log_grid(lo, hi, points);
}

// Exceedance counts of a sample over a fixed grid. A value lands in the
// bucket counting how many grid points lie strictly below it, so the
// number of values above t_j is an exact suffix sum, not an approximation.
class TailEstimate {
public:
    explicit TailEstimate(std::vector<double> grid) : grid_(std::move(grid)) {
        if (grid_.empty()) throw std::invalid_argument("tail estimate: empty grid");
        for (std::size_t j = 1; j < grid_.size(); ++j)
            if (!(grid_[j] > grid_[j - 1]))
                throw std::invalid_argument("tail estimate: grid must be strictly increasing");
        counts_.assign(grid_.size() + 1, 0);
    }

    void record(double v) {
        std::size_t b = std::lower_bound(grid_.begin(), grid_.end(), v) - grid_.begin();
        ++counts_[b];
        ++count_;
        sum_.add(v);
        sum2_.add(v * v);
        dirty_ = true;
    }

    std::uint64_t count() const { return count_; }

    double mean() const {
        require_data();
        return sum_.value() / static_cast<double>(count_);
    }

    double second_moment() const {
        require_data();
        return sum2_.value() / static_cast<double>(count_);
    }

    double total() const { return sum_.value(); }

    const std::vector<double>& grid() const { return grid_; }

    // number of recorded values strictly above grid point j
    std::uint64_t exceedances_at(std::size_t j) const {
        refresh();
        return exceed_[j];
    }

    double ccdf_at(std::size_t j) const {
        require_data();
        return static_cast<double>(exceedances_at(j)) / static_cast<double>(count_);
    }

    // exact lookup: t must be a grid point
    double ccdf(double t) const {
        auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
        if (it == grid_.end() || *it != t)
            throw std::invalid_argument("ccdf: not a grid point");
        return ccdf_at(it - grid_.begin());
    }

    // smallest grid point whose exceedance count drops below (1-p) * count;
    // disengaged when the sample cannot resolve level p on this grid
    std::optional<double> percentile(double p) const {
        require_data();
        if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("percentile: p in [0,1)");
        double need = (1.0 - p) * static_cast<double>(count_);
        // (1-p) carries representation error; a near-integer target is an
        // exact count and must compare as one
        double r = std::round(need);
        if (std::abs(need - r) < 1e-6) need = r;
        if (need < 1.0) return std::nullopt;
        refresh();
        for (std::size_t j = 0; j < grid_.size(); ++j)
            if (static_cast<double>(exceed_[j]) < need) return grid_[j];
        return std::nullopt;
    }

    void merge(const TailEstimate& o) {
        if (o.grid_ != grid_) throw std::logic_error("tail estimate: merging different grids");
        for (std::size_t b = 0; b < counts_.size(); ++b) counts_[b] += o.counts_[b];
        count_ += o.count_;
        sum_.add(o.sum_.value());
        sum2_.add(o.sum2_.value());
        dirty_ = true;
    }

private:
    void require_data() const {
        if (count_ == 0) throw std::logic_error("tail estimate: no recorded values");
    }

    void refresh() const {
        if (!dirty_) return;
        exceed_.assign(grid_.size(), 0);
        std::uint64_t suffix = 0;
        for (std::size_t j = grid_.size(); j-- > 0;) {
            suffix += counts_[j + 1];
            exceed_[j] = suffix;
        }
        dirty_ = false;
    }

    std::vector<double> grid_;
    std::vector<std::uint64_t> counts_; // bucket b: values with exactly b grid points below
    std::uint64_t count_ = 0;
    KahanSum sum_, sum2_;
    mutable std::vector<std::uint64_t> exceed_;
    mutable bool dirty_ = true;
};

// records response time and job size on one shared grid, optionally split
// into per-class estimates at a size threshold
class TailStats : public CompletionSink {
public:
    TailStats(std::vector<double> grid, std::optional<double> class_threshold = std::nullopt)
        : response_(grid), size_(grid), threshold_(class_threshold) {
        if (threshold_) {
            classes_.reserve(4);
            for (int i = 0; i < 4; ++i) classes_.emplace_back(grid);
        }
    }

    void record(const Job& job, double response) override {
        response_.record(response);
        size_.record(job.original_size);
        if (threshold_) {
            bool big = job.original_size > *threshold_;
            classes_[big ? 1 : 0].record(response);
            classes_[big ? 3 : 2].record(job.original_size);
        }
    }

    const TailEstimate& response_tail() const { return response_; }
    const TailEstimate& size_tail() const { return size_; }

    std::optional<double> class_threshold() const { return threshold_; }
    const TailEstimate& response_tail_small() const { return class_at(0); }
    const TailEstimate& response_tail_big() const { return class_at(1); }
    const TailEstimate& size_tail_small() const { return class_at(2); }
    const TailEstimate& size_tail_big() const { return class_at(3); }

    // mean time in queue: responses and sizes come from the same jobs
    double mean_wait() const {
        return (response_.total() - size_.total()) / static_cast<double>(response_.count());
    }

    void merge(const TailStats& o) {
        if (bool(threshold_) != bool(o.threshold_) ||
            (threshold_ && *threshold_ != *o.threshold_))
            throw std::logic_error("tail stats: merging different class thresholds");
        response_.merge(o.response_);
        size_.merge(o.size_);
        for (std::size_t i = 0; i < classes_.size(); ++i) classes_[i].merge(o.classes_[i]);
    }

private:
    const TailEstimate& class_at(std::size_t i) const {
        if (!threshold_) throw std::logic_error("tail stats: no class threshold set");
        return classes_[i];
    }

    TailEstimate response_;
    TailEstimate size_;
    std::optional<double> threshold_;
    std::vector<TailEstimate> classes_; // [small T, big T, small S, big S]
};

// response-time tail against the regime's yardstick: below the stability
// cutoff for losing a server the raw size tail P{S > t}, above it the
// slowdown-compensated tail P{S > n(1-rho) t}
struct NormalizedRow {
    double t;
    double ccdf;       // P{T > t}
    double yardstick;  // denominator at t
    double normalized; // ratio
};

inline std::vector<NormalizedRow> normalized_tail(const TailEstimate& response,
                                                  const SystemParams& sp,
                                                  const SizeDistribution& dist) {
    std::vector<NormalizedRow> rows;
    if (response.total() == 0) return rows;
    bool compensated = !sp.max_stability();
    double scale = sp.n * (1.0 - sp.rho);
    for (std::size_t j = 0; j < response.grid().size(); ++j) {
        double t = response.grid()[j];
        double ct = response.ccdf_at(j);
        if (!(ct > 0.0)) continue;
        double denom = tail(dist, compensated ? scale * t : t);
        if (!(denom >= 1e-300)) continue;
        rows.push_back({t, ct, denom, ct / denom});
    }
    return rows;
}

} // namespace tailsim
