#pragma once

#include <cmath>
#include <unordered_map>

#include "tailsim/allocation.hpp"
#include "tailsim/job.hpp"
#include "tailsim/sinks.hpp"
#include "tailsim/system_state.hpp"

namespace tailsim {

// Work conservation: over every positive-length interval the total service
// rate must equal min(live jobs, n). Exact for policies that only issue
// whole-server directives; shared servers need a small tolerance for the
// 1/m rate roundoff.
class RateAuditProbe : public Probe {
public:
    explicit RateAuditProbe(int n, double tolerance = 0.0) : n_(n), tolerance_(tolerance) {}

    void on_interval(const SystemState& st, const Allocation& alloc, double dt) override {
        double total = 0.0;
        for (const auto& dir : alloc.servers) {
            if (dir.kind == DirectiveKind::Serve)
                total += 1.0;
            else if (dir.kind == DirectiveKind::Share)
                total += static_cast<double>(dir.share.size()) *
                         (1.0 / static_cast<double>(dir.share.size()));
        }
        double expected = static_cast<double>(std::min<std::size_t>(st.live_count(), n_));
        double dev = std::abs(total - expected);
        if (dev > worst_) worst_ = dev;
        if (dev > tolerance_) ++violations_;
        ++intervals_;
        time_ += dt;
    }

    std::uint64_t violations() const { return violations_; }
    std::uint64_t intervals() const { return intervals_; }
    double worst_deviation() const { return worst_; }
    double observed_time() const { return time_; }

private:
    int n_;
    double tolerance_;
    std::uint64_t violations_ = 0;
    std::uint64_t intervals_ = 0;
    double worst_ = 0.0;
    double time_ = 0.0;
};

// How promptly the largest jobs reach a dedicated server: for each
// completed job at or above the size floor, did its first service on
// `server` begin within sqrt(size) of its arrival?
class LjfPromptnessProbe : public Probe {
public:
    LjfPromptnessProbe(int server, double size_floor) : server_(server), floor_(size_floor) {}

    void on_interval(const SystemState& st, const Allocation& alloc, double) override {
        const auto& dir = alloc.servers[static_cast<std::size_t>(server_)];
        if (dir.kind != DirectiveKind::Serve) return;
        first_start_.emplace(dir.job, st.clock); // keeps the earliest start
    }

    void on_completion(const Job& job, double) override {
        auto it = first_start_.find(job.id);
        if (job.original_size >= floor_) {
            ++tracked_;
            if (it != first_start_.end() &&
                it->second <= job.arrival_time + std::sqrt(job.original_size))
                ++prompt_;
        }
        if (it != first_start_.end()) first_start_.erase(it);
    }

    std::uint64_t tracked() const { return tracked_; }
    std::uint64_t prompt() const { return prompt_; }
    double prompt_fraction() const {
        return tracked_ ? static_cast<double>(prompt_) / static_cast<double>(tracked_) : 0.0;
    }

private:
    int server_;
    double floor_;
    std::unordered_map<JobId, double> first_start_;
    std::uint64_t tracked_ = 0;
    std::uint64_t prompt_ = 0;
};

// While one job at or above the size floor is in service, what fraction of
// the remaining servers' capacity sits idle? Intervals with zero or several
// such jobs in service are left out.
class TaggedIdleProbe : public Probe {
public:
    explicit TaggedIdleProbe(double size_floor) : floor_(size_floor) {}

    void on_interval(const SystemState& st, const Allocation& alloc, double dt) override {
        int tagged = 0;
        std::size_t idle = 0;
        bool tagged_here = false;
        for (const auto& dir : alloc.servers) {
            switch (dir.kind) {
                case DirectiveKind::Idle:
                    ++idle;
                    break;
                case DirectiveKind::Serve:
                    tagged_here = st.find(dir.job)->original_size >= floor_;
                    break;
                case DirectiveKind::Share:
                    tagged_here = false;
                    for (JobId id : dir.share)
                        if (st.find(id)->original_size >= floor_) tagged_here = true;
                    break;
            }
            if (dir.kind != DirectiveKind::Idle && tagged_here) ++tagged;
        }
        if (tagged != 1) return;
        std::size_t others = alloc.servers.size() - 1;
        if (others == 0) return;
        tagged_time_ += dt;
        idle_time_ += dt * static_cast<double>(idle) / static_cast<double>(others);
    }

    double tagged_time() const { return tagged_time_; }
    double other_idle_fraction() const {
        return tagged_time_ > 0.0 ? idle_time_ / tagged_time_ : 0.0;
    }

private:
    double floor_;
    double tagged_time_ = 0.0;
    double idle_time_ = 0.0;
};

// Audits the two-stage cutoff discipline: first-stage servers only ever
// serve jobs with at most d attained service and an unmigrated stage, the
// shared server only migrated jobs larger than d, and completions land in
// the stage their size dictates.
class StageDisciplineProbe : public Probe {
public:
    explicit StageDisciplineProbe(double d) : d_(d) {}

    void on_interval(const SystemState& st, const Allocation& alloc, double) override {
        ++intervals_;
        std::size_t last = alloc.servers.size() - 1;
        for (std::size_t s = 0; s < alloc.servers.size(); ++s) {
            const auto& dir = alloc.servers[s];
            if (dir.kind == DirectiveKind::Idle) continue;
            if (s < last) {
                if (dir.kind != DirectiveKind::Serve) {
                    ++violations_;
                    continue;
                }
                const Job* j = st.find(dir.job);
                if (j->stage == Stage::MigratedToPS || j->attained > d_ + 1e-9) ++violations_;
            } else {
                if (dir.kind != DirectiveKind::Share) {
                    ++violations_;
                    continue;
                }
                for (JobId id : dir.share) {
                    const Job* j = st.find(id);
                    if (j->stage != Stage::MigratedToPS || !(j->original_size > d_) ||
                        j->attained < d_ - 1e-9)
                        ++violations_;
                }
            }
        }
    }

    void on_completion(const Job& job, double) override {
        bool should_migrate = job.original_size > d_;
        if (should_migrate != (job.stage == Stage::MigratedToPS)) ++violations_;
    }

    std::uint64_t violations() const { return violations_; }
    std::uint64_t intervals() const { return intervals_; }

private:
    double d_;
    std::uint64_t violations_ = 0;
    std::uint64_t intervals_ = 0;
};

} // namespace tailsim
