#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailsim/distributions.hpp"
#include "tailsim/policy.hpp"
#include "tailsim/rng.hpp"
#include "tailsim/sinks.hpp"
#include "tailsim/trace.hpp"

namespace tailsim {

// Event-driven core. Three event kinds exist: completions (a served job's
// remaining work hits zero), service triggers (a served job's attained
// service reaches a level the policy declared), and arrivals. Simultaneous
// events process in that order, lower job id first among equals, and the
// policy is re-consulted after every single event. Between events service
// rates are constant, priority orders at equal rates cannot cross, so no
// other re-evaluation points are needed.

class ArrivalSource {
public:
    virtual ~ArrivalSource() = default;
    // produce the next arrival; false when the source is exhausted
    virtual bool next(double& time, double& size) = 0;
};

class PoissonSource : public ArrivalSource {
public:
    PoissonSource(const SizeDistribution& dist, double lambda, std::uint64_t count,
                  std::uint64_t seed)
        : dist_(dist), lambda_(lambda), left_(count),
          inter_(seed, "inter-arrival"), sizes_(seed, "sizes") {
        if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    }

    bool next(double& time, double& size) override {
        if (left_ == 0) return false;
        --left_;
        clock_ += inter_.exponential(lambda_);
        time = clock_;
        size = sample(dist_, sizes_.uniform());
        return true;
    }

private:
    SizeDistribution dist_;
    double lambda_;
    std::uint64_t left_;
    RandomStream inter_;
    RandomStream sizes_;
    double clock_ = 0.0;
};

class TraceSource : public ArrivalSource {
public:
    explicit TraceSource(const Trace& trace) : trace_(&trace) {}

    bool next(double& time, double& size) override {
        if (i_ >= trace_->size()) return false;
        time = (*trace_)[i_].arrival;
        size = (*trace_)[i_].size;
        ++i_;
        return true;
    }

private:
    const Trace* trace_;
    std::size_t i_ = 0;
};

struct RunStats {
    std::uint64_t arrivals = 0;
    std::uint64_t completions = 0;
    std::uint64_t recorded = 0; // completions past the warmup cut
    double end_clock = 0.0;
    double work_arrived = 0.0;
    double work_served = 0.0;
    std::map<std::string, double> policy_counters;
};

inline void validate_allocation(const SystemState& st, const Allocation& alloc, int n) {
    if (static_cast<int>(alloc.servers.size()) != n)
        throw std::logic_error("allocation: wrong server count");
    std::vector<JobId> seen;
    auto note = [&](JobId id) {
        if (!st.find(id)) throw std::logic_error("allocation: directive names a dead job");
        for (JobId s : seen)
            if (s == id) throw std::logic_error("allocation: job on two servers");
        seen.push_back(id);
    };
    for (const auto& dir : alloc.servers) {
        switch (dir.kind) {
            case DirectiveKind::Idle:
                break;
            case DirectiveKind::Serve:
                note(dir.job);
                break;
            case DirectiveKind::Share:
                if (dir.share.empty())
                    throw std::logic_error("allocation: empty share set");
                for (JobId id : dir.share) note(id);
                break;
        }
    }
}

class Engine {
public:
    Engine(int n, SchedulingPolicy& policy) : n_(n), policy_(policy) {
        if (n < 1) throw std::invalid_argument("engine: n must be >= 1");
    }

    void add_sink(CompletionSink* s) { sinks_.push_back(s); }
    void add_probe(Probe* p) { probes_.push_back(p); }
    void set_validate(bool v) { validate_ = v; }

    RunStats run_poisson(const SizeDistribution& dist, double lambda,
                         std::uint64_t arrivals, std::uint64_t warmup_arrivals,
                         std::uint64_t seed) {
        PoissonSource src(dist, lambda, arrivals, seed);
        return run(src, warmup_arrivals);
    }

    RunStats run_trace(const Trace& trace) {
        TraceSource src(trace);
        return run(src, 0);
    }

    // Injects every arrival the source yields, then drains the system.
    // Jobs with id < warmup_arrivals are simulated but not recorded.
    RunStats run(ArrivalSource& src, std::uint64_t warmup_arrivals) {
        state_.clear();
        policy_.bind(n_);
        refresh_allocation();

        double na_time = 0.0, na_size = 0.0;
        bool have_arrival = src.next(na_time, na_size);
        state_.next_arrival_time = have_arrival ? na_time : kInf;

        const bool triggers = policy_.uses_triggers();
        std::uint64_t recorded = 0;

        constexpr int kCompletion = 0, kTrigger = 1, kArrival = 2, kNone = 3;
        while (true) {
            double best_t = kInf;
            int best_kind = kNone;
            JobId best_id = kInvalidJob;
            Job* best_job = nullptr;
            double trig_attained = 0.0, trig_remaining = 0.0;

            if (have_arrival) {
                best_t = na_time;
                best_kind = kArrival;
                best_id = state_.arrivals;
            }
            double total_rate = 0.0;
            for (const auto& sr : served_) {
                total_rate += sr.rate;
                Job* j = sr.job;
                double tc = state_.clock + j->remaining / sr.rate;
                if (tc < best_t || (tc == best_t && (kCompletion < best_kind ||
                                                     (kCompletion == best_kind && j->id < best_id)))) {
                    best_t = tc;
                    best_kind = kCompletion;
                    best_id = j->id;
                    best_job = j;
                }
                if (triggers) {
                    double dist = policy_.trigger_distance(state_, *j);
                    if (dist < kInf) {
                        double tt = state_.clock + dist / sr.rate;
                        // a distance below ulp(clock) rounds tt onto the
                        // current instant; bump it so the event advances
                        // time and the trigger cannot re-arm in place
                        if (tt <= state_.clock) tt = std::nextafter(state_.clock, kInf);
                        if (tt < best_t || (tt == best_t && (kTrigger < best_kind ||
                                                             (kTrigger == best_kind && j->id < best_id)))) {
                            best_t = tt;
                            best_kind = kTrigger;
                            best_id = j->id;
                            best_job = j;
                            trig_attained = j->attained + dist;
                            trig_remaining = j->remaining - dist;
                        }
                    }
                }
            }
            if (best_kind == kNone) break; // drained, no arrivals left

            double dt = best_t - state_.clock;
            if (dt > 0.0) {
                for (Probe* p : probes_) p->on_interval(state_, *alloc_, dt);
                for (const auto& sr : served_) {
                    sr.job->remaining -= dt * sr.rate;
                    if (sr.job->remaining < 0.0) sr.job->remaining = 0.0;
                    sr.job->attained += dt * sr.rate;
                }
                state_.work_served.add(dt * total_rate);
                state_.clock = best_t;
            }

            switch (best_kind) {
                case kCompletion: {
                    Job snapshot = *best_job;
                    snapshot.remaining = 0.0;
                    snapshot.attained = snapshot.original_size;
                    double response = state_.clock - snapshot.arrival_time;
                    state_.erase(snapshot.id);
                    ++state_.completions;
                    policy_.on_completion(state_, snapshot);
                    if (snapshot.id >= warmup_arrivals) {
                        ++recorded;
                        for (CompletionSink* s : sinks_) s->record(snapshot, response);
                    }
                    for (Probe* p : probes_) p->on_completion(snapshot, response);
                    break;
                }
                case kTrigger: {
                    // dt*rate accumulation rounds at ulp(clock), which can
                    // overshoot the crossing by far more than the policies'
                    // tolerances late in a long run; land the job exactly
                    // where the announced distance said it would be
                    best_job->attained = trig_attained;
                    best_job->remaining = trig_remaining > 0.0 ? trig_remaining : 0.0;
                    if (policy_.on_trigger(state_, *best_job) == TriggerAction::MigrateToPS)
                        best_job->stage = Stage::MigratedToPS;
                    break;
                }
                case kArrival: {
                    if (na_time < state_.clock)
                        throw std::invalid_argument("arrivals must be non-decreasing in time");
                    if (!(na_size > 0.0))
                        throw std::invalid_argument("job sizes must be > 0");
                    Job job{state_.arrivals, na_time, na_size, na_size, 0.0, Stage::Queued};
                    Job* inserted = state_.insert(job);
                    ++state_.arrivals;
                    state_.work_arrived.add(na_size);
                    policy_.on_arrival(state_, *inserted);
                    have_arrival = src.next(na_time, na_size);
                    state_.next_arrival_time = have_arrival ? na_time : kInf;
                    break;
                }
            }
            refresh_allocation();
        }

        RunStats stats;
        stats.arrivals = state_.arrivals;
        stats.completions = state_.completions;
        stats.recorded = recorded;
        stats.end_clock = state_.clock;
        stats.work_arrived = state_.work_arrived.value();
        stats.work_served = state_.work_served.value();
        policy_.add_counters(stats.policy_counters);
        return stats;
    }

    const SystemState& state() const { return state_; }

private:
    struct ServedRef {
        Job* job;
        double rate;
    };

    void refresh_allocation() {
        alloc_ = &policy_.allocate(state_);
        state_.set_allocation(alloc_);
        if (validate_) validate_allocation(state_, *alloc_, n_);
        served_.clear();
        for (const auto& dir : alloc_->servers) {
            if (dir.kind == DirectiveKind::Serve) {
                Job* j = state_.find(dir.job);
                if (!j) throw std::logic_error("allocation names a dead job");
                served_.push_back({j, 1.0});
            } else if (dir.kind == DirectiveKind::Share && !dir.share.empty()) {
                double rate = 1.0 / static_cast<double>(dir.share.size());
                for (JobId id : dir.share) {
                    Job* j = state_.find(id);
                    if (!j) throw std::logic_error("allocation names a dead job");
                    served_.push_back({j, rate});
                }
            }
        }
    }

    int n_;
    SchedulingPolicy& policy_;
    SystemState state_;
    std::vector<CompletionSink*> sinks_;
    std::vector<Probe*> probes_;
    bool validate_ = false;
    std::vector<ServedRef> served_;
    const Allocation* alloc_ = nullptr;
};

} // namespace tailsim
