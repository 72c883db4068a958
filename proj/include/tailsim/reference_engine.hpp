#pragma once

// Brute-force re-implementation of every scheduling rule for differential
// testing. No shared machinery with the incremental engine beyond the
// PolicySpec struct: each rule is restated here from its definition and the
// full served set is recomputed by sorting on every event. Event times and
// service advances use the same arithmetic expressions as the engine
// (clock + remaining / rate, remaining -= dt * rate) and the same tie order
// (completion, then trigger, then arrival; lower id first), so matching
// runs agree to floating-point roundoff.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tailsim/policies.hpp"
#include "tailsim/trace.hpp"

namespace tailsim {

struct RefResult {
    std::vector<std::pair<JobId, double>> responses; // completion order
    double end_clock = 0.0;
};

namespace refdetail {

struct RJob {
    JobId id;
    double arrival;
    double original;
    double remaining;
    double attained;
    bool migrated;
};

inline std::vector<std::size_t> by_id(const std::vector<RJob>& live,
                                      const std::vector<char>& pick) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < live.size(); ++i)
        if (pick[i]) idx.push_back(i);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return live[a].id < live[b].id; });
    return idx;
}

inline std::vector<std::size_t> by_remaining(const std::vector<RJob>& live,
                                             const std::vector<char>& pick) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < live.size(); ++i)
        if (pick[i]) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (live[a].remaining != live[b].remaining) return live[a].remaining < live[b].remaining;
        return live[a].id < live[b].id;
    });
    return idx;
}

} // namespace refdetail

inline RefResult reference_run(const PolicySpec& spec, int n, const Trace& trace) {
    using refdetail::RJob;
    if (spec.type == PolicyType::Ps && n != 1)
        throw std::invalid_argument("ps reference: n must be 1");
    if ((spec.type == PolicyType::Split || spec.type == PolicyType::SplitThresh ||
         spec.type == PolicyType::TagSplit) &&
        n < 2)
        throw std::invalid_argument("reference: split rules need n >= 2");

    std::vector<RJob> live;
    std::vector<char> all, picked;
    double clock = 0.0;
    std::size_t next = 0;
    JobId next_id = 0;
    JobId committed = kInvalidJob; // split: the large-job server is not preemptive
    RefResult out;

    // service rates for every live job under the rule, recomputed from
    // scratch; exactly the incremental engine's allocation, restated
    auto compute_rates = [&](std::vector<double>& rate) {
        rate.assign(live.size(), 0.0);
        std::size_t k = live.size();
        all.assign(k, 1);
        switch (spec.type) {
            case PolicyType::Fcfs: {
                // oldest min(k, n) jobs hold the servers
                auto idx = refdetail::by_id(live, all);
                for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(n); ++i)
                    rate[idx[i]] = 1.0;
                break;
            }
            case PolicyType::Srpt: {
                auto idx = refdetail::by_remaining(live, all);
                for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(n); ++i)
                    rate[idx[i]] = 1.0;
                break;
            }
            case PolicyType::Sek: {
                bool exception = false;
                std::size_t skip = k;
                if (k == static_cast<std::size_t>(n) + 1) {
                    std::vector<std::pair<double, JobId>> sizes;
                    for (const RJob& j : live)
                        sizes.emplace_back(spec.sek_original ? j.original : j.remaining, j.id);
                    std::sort(sizes.begin(), sizes.end());
                    std::size_t large = 0;
                    for (auto& [s, id] : sizes)
                        if (s > spec.eps) ++large;
                    bool rest_small = true;
                    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
                        if (!(sizes[i].first <= spec.eps)) rest_small = false;
                    if (large == 1 && rest_small) {
                        exception = true;
                        JobId skipped = sizes[sizes.size() - 2].second;
                        for (std::size_t i = 0; i < k; ++i)
                            if (live[i].id == skipped) skip = i;
                    }
                }
                if (exception) {
                    for (std::size_t i = 0; i < k; ++i)
                        if (i != skip) rate[i] = 1.0;
                } else {
                    auto idx = refdetail::by_remaining(live, all);
                    for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(n); ++i)
                        rate[idx[i]] = 1.0;
                }
                break;
            }
            case PolicyType::Split: {
                bool committed_live = false;
                for (const RJob& j : live)
                    if (j.id == committed) committed_live = true;
                if (!committed_live) committed = kInvalidJob;
                if (committed == kInvalidJob && k > 0) {
                    // largest original size, lower id on ties
                    std::size_t best = 0;
                    for (std::size_t i = 1; i < k; ++i) {
                        if (live[i].original > live[best].original ||
                            (live[i].original == live[best].original &&
                             live[i].id < live[best].id))
                            best = i;
                    }
                    committed = live[best].id;
                }
                picked.assign(k, 1);
                for (std::size_t i = 0; i < k; ++i)
                    if (live[i].id == committed) {
                        rate[i] = 1.0;
                        picked[i] = 0;
                    }
                auto idx = refdetail::by_remaining(live, picked);
                for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(n) - 1; ++i)
                    rate[idx[i]] = 1.0;
                break;
            }
            case PolicyType::SplitThresh: {
                picked.assign(k, 0);
                std::vector<char> small(k, 0);
                for (std::size_t i = 0; i < k; ++i)
                    (live[i].original > spec.d ? picked[i] : small[i]) = 1;
                auto bigs = refdetail::by_remaining(live, picked);
                auto smalls = spec.small_srpt ? refdetail::by_remaining(live, small)
                                              : refdetail::by_id(live, small);
                std::size_t served_smalls =
                    std::min(smalls.size(), static_cast<std::size_t>(n) - 1);
                for (std::size_t i = 0; i < served_smalls; ++i) rate[smalls[i]] = 1.0;
                if (!bigs.empty())
                    rate[bigs[0]] = 1.0;
                else if (spec.steal && smalls.size() > served_smalls)
                    rate[smalls[served_smalls]] = 1.0; // next small runs on the big server
                break;
            }
            case PolicyType::TagSplit: {
                picked.assign(k, 0);
                std::size_t shared = 0;
                for (std::size_t i = 0; i < k; ++i) {
                    if (live[i].migrated)
                        ++shared;
                    else
                        picked[i] = 1;
                }
                auto idx = refdetail::by_id(live, picked); // first stage is fcfs
                for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(n) - 1; ++i)
                    rate[idx[i]] = 1.0;
                for (std::size_t i = 0; i < k; ++i)
                    if (live[i].migrated) rate[i] = 1.0 / static_cast<double>(shared);
                break;
            }
            case PolicyType::Ps: {
                for (std::size_t i = 0; i < k; ++i) rate[i] = 1.0 / static_cast<double>(k);
                break;
            }
        }
    };

    constexpr int kCompletion = 0, kTrigger = 1, kArrival = 2, kNone = 3;
    std::vector<double> rate;
    while (true) {
        compute_rates(rate);

        double best_t = kInf;
        int best_kind = kNone;
        JobId best_id = kInvalidJob;
        std::size_t best_i = 0;
        double trig_attained = 0.0, trig_remaining = 0.0;
        if (next < trace.size()) {
            best_t = trace[next].arrival;
            best_kind = kArrival;
            best_id = next_id;
        }
        for (std::size_t i = 0; i < live.size(); ++i) {
            if (rate[i] <= 0.0) continue;
            double tc = clock + live[i].remaining / rate[i];
            if (tc < best_t || (tc == best_t && (kCompletion < best_kind ||
                                                 (kCompletion == best_kind &&
                                                  live[i].id < best_id)))) {
                best_t = tc;
                best_kind = kCompletion;
                best_id = live[i].id;
                best_i = i;
            }
            double dist = kInf;
            if (spec.type == PolicyType::Sek && !spec.sek_original &&
                live.size() == static_cast<std::size_t>(n) + 1 &&
                live[i].remaining > spec.eps + 1e-12)
                dist = live[i].remaining - spec.eps;
            if (spec.type == PolicyType::TagSplit && !live[i].migrated &&
                live[i].original > spec.d)
                dist = spec.d - live[i].attained;
            if (dist < kInf) {
                double tt = clock + dist / rate[i];
                if (tt <= clock) tt = std::nextafter(clock, kInf);
                if (tt < best_t || (tt == best_t && (kTrigger < best_kind ||
                                                     (kTrigger == best_kind &&
                                                      live[i].id < best_id)))) {
                    best_t = tt;
                    best_kind = kTrigger;
                    best_id = live[i].id;
                    best_i = i;
                    trig_attained = live[i].attained + dist;
                    trig_remaining = live[i].remaining - dist;
                }
            }
        }
        if (best_kind == kNone) break;

        double dt = best_t - clock;
        if (dt > 0.0) {
            for (std::size_t i = 0; i < live.size(); ++i) {
                if (rate[i] <= 0.0) continue;
                live[i].remaining -= dt * rate[i];
                if (live[i].remaining < 0.0) live[i].remaining = 0.0;
                live[i].attained += dt * rate[i];
            }
            clock = best_t;
        }

        if (best_kind == kCompletion) {
            out.responses.emplace_back(live[best_i].id, clock - live[best_i].arrival);
            if (live[best_i].id == committed) committed = kInvalidJob;
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(best_i));
        } else if (best_kind == kTrigger) {
            // land exactly on the announced crossing; dt*rate rounds at ulp(clock)
            live[best_i].attained = trig_attained;
            live[best_i].remaining = trig_remaining > 0.0 ? trig_remaining : 0.0;
            if (spec.type == PolicyType::TagSplit) live[best_i].migrated = true;
            // sek: re-evaluating the rates on the next pass is the whole effect
        } else {
            live.push_back(
                {next_id++, trace[next].arrival, trace[next].size, trace[next].size, 0.0, false});
            ++next;
        }
    }
    out.end_clock = clock;
    return out;
}

} // namespace tailsim
