#pragma once

#include <cstdint>
#include <unordered_map>

#include "tailsim/allocation.hpp"
#include "tailsim/job.hpp"

namespace tailsim {

// compensated accumulator; keeps work totals exact enough for the
// conservation audit over long runs
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// Everything a policy or probe may read: the clock, the live jobs, the
// allocation currently in force, and the run counters.
class SystemState {
public:
    double clock = 0.0;
    double next_arrival_time = 0.0;
    std::uint64_t arrivals = 0;
    std::uint64_t completions = 0;
    KahanSum work_arrived;
    KahanSum work_served;

    const Job* find(JobId id) const {
        auto it = jobs_.find(id);
        return it == jobs_.end() ? nullptr : &it->second;
    }
    Job* find(JobId id) {
        auto it = jobs_.find(id);
        return it == jobs_.end() ? nullptr : &it->second;
    }
    std::size_t live_count() const { return jobs_.size(); }

    template <class F>
    void for_each_job(F f) const {
        for (const auto& [id, job] : jobs_) f(job);
    }

    // per-server occupancy now in force (all idle before the first event);
    // points at the allocation the policy returned, no copy
    const Allocation& allocation() const { return *alloc_; }

    // engine side
    Job* insert(Job job) {
        auto [it, fresh] = jobs_.emplace(job.id, job);
        return fresh ? &it->second : nullptr;
    }
    void erase(JobId id) { jobs_.erase(id); }
    void set_allocation(const Allocation* a) { alloc_ = a ? a : &empty_alloc(); }
    void clear() {
        jobs_.clear();
        jobs_.reserve(1024);
        alloc_ = &empty_alloc();
        clock = 0.0;
        next_arrival_time = 0.0;
        arrivals = completions = 0;
        work_arrived = KahanSum{};
        work_served = KahanSum{};
    }

private:
    static const Allocation& empty_alloc() {
        static const Allocation a;
        return a;
    }

    std::unordered_map<JobId, Job> jobs_;
    const Allocation* alloc_ = &empty_alloc();
};

} // namespace tailsim
