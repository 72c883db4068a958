#pragma once

#include <algorithm>
#include <memory>
#include <set>
#include <utility>
#include <vector>

#include "tailsim/distributions.hpp"
#include "tailsim/policy.hpp"

namespace tailsim {

// ordering key for preemptive pools: (size, id), lower id first on ties
using RankKey = std::pair<double, JobId>;

// ---- FCFS on n servers ------------------------------------------------------
// Central queue in arrival order; a job keeps its server until it completes.
class FcfsPolicy : public SchedulingPolicy {
public:
    std::string name() const override { return "fcfs"; }

    void bind(int n) override {
        n_ = n;
        queue_.clear();
        assigned_.assign(n, kInvalidJob);
        alloc_.reset(n);
    }

    void on_arrival(const SystemState&, const Job& job) override { queue_.insert(job.id); }

    void on_completion(const SystemState&, const Job& job) override {
        for (auto& a : assigned_)
            if (a == job.id) {
                a = kInvalidJob;
                return;
            }
    }

    const Allocation& allocate(const SystemState&) override {
        for (int s = 0; s < n_; ++s) {
            if (assigned_[s] == kInvalidJob && !queue_.empty()) {
                assigned_[s] = *queue_.begin();
                queue_.erase(queue_.begin());
            }
            if (assigned_[s] == kInvalidJob)
                alloc_.servers[s].set_idle();
            else
                alloc_.servers[s].set_serve(assigned_[s]);
        }
        return alloc_;
    }

private:
    int n_ = 0;
    std::set<JobId> queue_; // ids are assigned in arrival order
    std::vector<JobId> assigned_;
    Allocation alloc_;
};

// ---- SRPT on n servers ------------------------------------------------------
// Preemptive: always the min(live, n) smallest remaining sizes. Unserved
// jobs sit in a set keyed by remaining size, which is frozen while unserved;
// served jobs are re-keyed when they return to the pool.
class SrptPolicy : public SchedulingPolicy {
public:
    std::string name() const override { return "srpt"; }

    void bind(int n) override {
        n_ = n;
        pool_.clear();
        served_.clear();
        alloc_.reset(n);
    }

    void on_arrival(const SystemState&, const Job& job) override {
        pool_.emplace(job.remaining, job.id);
    }

    void on_completion(const SystemState&, const Job&) override {
        // completed jobs were in served_, which is rebuilt next allocate
    }

    const Allocation& allocate(const SystemState& st) override {
        for (JobId id : served_)
            if (const Job* j = st.find(id)) pool_.emplace(j->remaining, id);
        served_.clear();
        std::size_t k = std::min<std::size_t>(pool_.size(), n_);
        auto it = pool_.begin();
        for (std::size_t i = 0; i < k; ++i) {
            served_.push_back(it->second);
            it = pool_.erase(it);
        }
        for (int s = 0; s < n_; ++s) {
            if (s < static_cast<int>(served_.size()))
                alloc_.servers[s].set_serve(served_[s]);
            else
                alloc_.servers[s].set_idle();
        }
        return alloc_;
    }

private:
    int n_ = 0;
    std::set<RankKey> pool_;
    std::vector<JobId> served_;
    Allocation alloc_;
};

// ---- SEK(eps) ---------------------------------------------------------------
// SRPT-n except with exactly n+1 jobs present, one of size above eps and the
// other n below it: then the one large job is served in place of the
// second-largest. "Size" reads as remaining size by default; the original-
// size reading sits behind a flag. In remaining mode the exception can also
// switch on or off when a served job's remaining size drifts across eps
// between events, so those crossings are exposed as service triggers.
class SekPolicy : public SchedulingPolicy {
public:
    SekPolicy(double eps, bool size_original) : eps_(eps), original_(size_original) {
        if (!(eps > 0.0)) throw std::invalid_argument("sek: eps must be > 0");
    }

    std::string name() const override { return "sek"; }

    void bind(int n) override {
        n_ = n;
        pool_.clear();
        served_.clear();
        alloc_.reset(n);
    }

    void on_arrival(const SystemState&, const Job& job) override {
        pool_.emplace(job.remaining, job.id);
    }

    void on_completion(const SystemState&, const Job&) override {}

    bool uses_triggers() const override { return !original_; }

    // a served job crossing eps can flip the exception; once the gap is
    // inside the 1e-12 floor the crossing is treated as already happened
    double trigger_distance(const SystemState& st, const Job& job) const override {
        if (original_) return kInf;
        if (st.live_count() != static_cast<std::size_t>(n_) + 1) return kInf;
        if (job.remaining > eps_ + 1e-12) return job.remaining - eps_;
        return kInf;
    }

    const Allocation& allocate(const SystemState& st) override {
        for (JobId id : served_)
            if (const Job* j = st.find(id)) pool_.emplace(j->remaining, id);
        served_.clear();

        std::size_t live = pool_.size();
        std::size_t skip_pos = live; // sentinel: no exception
        if (live == static_cast<std::size_t>(n_) + 1) {
            // rank the n+1 jobs by the clause's size notion
            scratch_.clear();
            for (const auto& [rem, id] : pool_) {
                double size = original_ ? st.find(id)->original_size : rem;
                scratch_.emplace_back(size, id);
            }
            std::sort(scratch_.begin(), scratch_.end());
            std::size_t large = 0;
            for (const auto& [size, id] : scratch_)
                if (size > eps_) ++large;
            // "small" reads as <= eps: the right-continuous version, so the
            // exception flips exactly at a served job's eps crossing
            bool rest_small = true;
            for (std::size_t i = 0; i + 1 < scratch_.size(); ++i)
                if (!(scratch_[i].first <= eps_)) rest_small = false;
            if (large == 1 && rest_small) {
                // serve everything except the second-largest
                JobId skipped = scratch_[scratch_.size() - 2].second;
                std::size_t pos = 0;
                for (const auto& [rem, id] : pool_) {
                    if (id == skipped) skip_pos = pos;
                    ++pos;
                }
            }
        }

        std::size_t want = std::min<std::size_t>(live, n_);
        auto it = pool_.begin();
        std::size_t pos = 0;
        while (served_.size() < want && it != pool_.end()) {
            if (pos == skip_pos) {
                ++it;
                ++pos;
                continue;
            }
            served_.push_back(it->second);
            it = pool_.erase(it);
            ++pos;
        }
        for (int s = 0; s < n_; ++s) {
            if (s < static_cast<int>(served_.size()))
                alloc_.servers[s].set_serve(served_[s]);
            else
                alloc_.servers[s].set_idle();
        }
        return alloc_;
    }

private:
    double eps_;
    bool original_;
    int n_ = 0;
    std::set<RankKey> pool_;
    std::vector<JobId> served_;
    std::vector<RankKey> scratch_;
    Allocation alloc_;
};

// ---- SPLIT ------------------------------------------------------------------
// n-1 SRPT servers plus one non-preemptive largest-job-first server. When
// the LJF server frees up it fetches the job with the largest original size
// anywhere in the system (lower id on ties), pulling it off an SRPT server
// if needed with attained service preserved; an arrival into an empty
// system is therefore served by the LJF server immediately. It is idle only
// when the system is empty.
class SplitPolicy : public SchedulingPolicy {
public:
    std::string name() const override { return "split"; }

    void bind(int n) override {
        if (n < 2) throw std::invalid_argument("split: needs n >= 2");
        n_ = n;
        pool_.clear();
        size_index_.clear();
        served_.clear();
        committed_ = kInvalidJob;
        fetches_ = 0;
        alloc_.reset(n);
    }

    void on_arrival(const SystemState&, const Job& job) override {
        pool_.emplace(job.remaining, job.id);
        size_index_.emplace(job.original_size, job.id);
    }

    void on_completion(const SystemState&, const Job& job) override {
        size_index_.erase({job.original_size, job.id});
        if (job.id == committed_) committed_ = kInvalidJob;
    }

    const Allocation& allocate(const SystemState& st) override {
        for (JobId id : served_)
            if (const Job* j = st.find(id)) pool_.emplace(j->remaining, id);
        served_.clear();

        if (committed_ == kInvalidJob && !size_index_.empty()) {
            double top = size_index_.rbegin()->first;
            committed_ = size_index_.lower_bound({top, 0})->second;
            ++fetches_;
            pool_.erase({st.find(committed_)->remaining, committed_});
        }

        std::size_t k = std::min<std::size_t>(pool_.size(), n_ - 1);
        auto it = pool_.begin();
        for (std::size_t i = 0; i < k; ++i) {
            served_.push_back(it->second);
            it = pool_.erase(it);
        }
        for (int s = 0; s + 1 < n_; ++s) {
            if (s < static_cast<int>(served_.size()))
                alloc_.servers[s].set_serve(served_[s]);
            else
                alloc_.servers[s].set_idle();
        }
        if (committed_ == kInvalidJob)
            alloc_.servers[n_ - 1].set_idle();
        else
            alloc_.servers[n_ - 1].set_serve(committed_);
        return alloc_;
    }

    void add_counters(std::map<std::string, double>& c) const override {
        c["ljf_fetches"] = static_cast<double>(fetches_);
    }

private:
    int n_ = 0;
    std::set<RankKey> pool_;       // SRPT candidates by remaining size
    std::set<RankKey> size_index_; // all live jobs by original size
    std::vector<JobId> served_;
    JobId committed_ = kInvalidJob;
    std::uint64_t fetches_ = 0;
    Allocation alloc_;
};

// ---- SplitThresh(d) ---------------------------------------------------------
// Jobs larger than d go to one dedicated server running SRPT; the rest run
// on the n-1 small servers under FCFS (default) or SRPT. With work stealing
// on, an otherwise idle big server serves the small job its stage would
// start next if it had one more server, and hands it back the instant a big
// job arrives (preempt-resume). A small server that frees up takes over the
// stolen job in its normal turn, and the big server moves on to the next
// queued small job.
class SplitThreshPolicy : public SchedulingPolicy {
public:
    SplitThreshPolicy(double d, bool small_srpt, bool steal)
        : d_(d), small_srpt_(small_srpt), steal_(steal) {
        if (!(d > 0.0)) throw std::invalid_argument("splitthresh: d must be > 0");
    }

    std::string name() const override { return "splitthresh"; }

    void bind(int n) override {
        if (n < 2) throw std::invalid_argument("splitthresh: needs n >= 2");
        n_ = n;
        big_pool_.clear();
        big_served_ = kInvalidJob;
        queue_.clear();
        assigned_.assign(n - 1, kInvalidJob);
        small_pool_.clear();
        small_served_.clear();
        stolen_ = kInvalidJob;
        steals_ = 0;
        alloc_.reset(n);
    }

    void on_arrival(const SystemState&, const Job& job) override {
        if (job.original_size > d_)
            big_pool_.emplace(job.remaining, job.id);
        else if (small_srpt_)
            small_pool_.emplace(job.remaining, job.id);
        else
            queue_.insert(job.id);
    }

    void on_completion(const SystemState&, const Job& job) override {
        if (job.id == big_served_) {
            big_served_ = kInvalidJob;
            return;
        }
        if (job.id == stolen_) {
            stolen_ = kInvalidJob;
            if (!small_srpt_) queue_.erase(job.id);
            return;
        }
        if (!small_srpt_) {
            for (auto& a : assigned_)
                if (a == job.id) {
                    a = kInvalidJob;
                    return;
                }
        }
    }

    const Allocation& allocate(const SystemState& st) override {
        // all preemptible service returns to its pool, then is re-selected
        if (big_served_ != kInvalidJob) {
            if (const Job* j = st.find(big_served_)) big_pool_.emplace(j->remaining, big_served_);
            big_served_ = kInvalidJob;
        }
        JobId was_stolen = stolen_;
        if (stolen_ != kInvalidJob) {
            if (small_srpt_)
                if (const Job* j = st.find(stolen_)) small_pool_.emplace(j->remaining, stolen_);
            stolen_ = kInvalidJob; // FCFS mode: still sitting in queue_
        }

        // small stage
        if (small_srpt_) {
            for (JobId id : small_served_)
                if (const Job* j = st.find(id)) small_pool_.emplace(j->remaining, id);
            small_served_.clear();
            std::size_t k = std::min<std::size_t>(small_pool_.size(), n_ - 1);
            auto it = small_pool_.begin();
            for (std::size_t i = 0; i < k; ++i) {
                small_served_.push_back(it->second);
                it = small_pool_.erase(it);
            }
            for (int s = 0; s + 1 < n_; ++s) {
                if (s < static_cast<int>(small_served_.size()))
                    alloc_.servers[s].set_serve(small_served_[s]);
                else
                    alloc_.servers[s].set_idle();
            }
        } else {
            for (int s = 0; s + 1 < n_; ++s) {
                if (assigned_[s] == kInvalidJob && !queue_.empty()) {
                    assigned_[s] = *queue_.begin();
                    queue_.erase(queue_.begin());
                }
                if (assigned_[s] == kInvalidJob)
                    alloc_.servers[s].set_idle();
                else
                    alloc_.servers[s].set_serve(assigned_[s]);
            }
        }

        // big server: big jobs first, else steal
        auto& big_dir = alloc_.servers[n_ - 1];
        if (!big_pool_.empty()) {
            auto it = big_pool_.begin();
            big_served_ = it->second;
            big_pool_.erase(it);
            big_dir.set_serve(big_served_);
        } else if (steal_ && small_srpt_ && !small_pool_.empty()) {
            auto it = small_pool_.begin();
            stolen_ = it->second;
            small_pool_.erase(it);
            big_dir.set_serve(stolen_);
        } else if (steal_ && !small_srpt_ && !queue_.empty()) {
            stolen_ = *queue_.begin(); // stays queued: a freeing small server takes it over
            big_dir.set_serve(stolen_);
        } else {
            big_dir.set_idle();
        }
        if (stolen_ != kInvalidJob && stolen_ != was_stolen) ++steals_;
        return alloc_;
    }

    void add_counters(std::map<std::string, double>& c) const override {
        c["steals"] = static_cast<double>(steals_);
    }

    double threshold() const { return d_; }

private:
    double d_;
    bool small_srpt_;
    bool steal_;
    int n_ = 0;
    std::set<RankKey> big_pool_;
    JobId big_served_ = kInvalidJob;
    std::set<JobId> queue_; // FCFS smalls not on a small server (a stolen one stays here)
    std::vector<JobId> assigned_;
    std::set<RankKey> small_pool_;
    std::vector<JobId> small_served_;
    JobId stolen_ = kInvalidJob;
    std::uint64_t steals_ = 0;
    Allocation alloc_;
};

// ---- TAG-SPLIT(d) -----------------------------------------------------------
// Every arrival enters FCFS service on the n-1 first-stage servers. A job
// that reaches d of attained service there migrates, preempt-resume, to the
// last server, which processor-shares equally among everything migrated.
// Jobs with original size <= d complete in the first stage and never
// migrate; the completion wins the tie when size equals d exactly.
class TagSplitPolicy : public SchedulingPolicy {
public:
    explicit TagSplitPolicy(double d) : d_(d) {
        if (!(d > 0.0)) throw std::invalid_argument("tagsplit: d must be > 0");
    }

    std::string name() const override { return "tagsplit"; }

    void bind(int n) override {
        if (n < 2) throw std::invalid_argument("tagsplit: needs n >= 2");
        n_ = n;
        queue_.clear();
        assigned_.assign(n - 1, kInvalidJob);
        ps_.clear();
        migrations_ = 0;
        alloc_.reset(n);
    }

    void on_arrival(const SystemState&, const Job& job) override { queue_.insert(job.id); }

    void on_completion(const SystemState&, const Job& job) override {
        if (job.stage == Stage::MigratedToPS) {
            ps_.erase(std::find(ps_.begin(), ps_.end(), job.id));
            return;
        }
        for (auto& a : assigned_)
            if (a == job.id) {
                a = kInvalidJob;
                return;
            }
    }

    bool uses_triggers() const override { return true; }

    double trigger_distance(const SystemState&, const Job& job) const override {
        if (job.stage != Stage::MigratedToPS && job.original_size > d_)
            return d_ - job.attained;
        return kInf;
    }

    TriggerAction on_trigger(const SystemState&, const Job& job) override {
        ++migrations_;
        for (auto& a : assigned_)
            if (a == job.id) {
                a = kInvalidJob;
                break;
            }
        ps_.push_back(job.id);
        return TriggerAction::MigrateToPS;
    }

    const Allocation& allocate(const SystemState&) override {
        for (int s = 0; s + 1 < n_; ++s) {
            if (assigned_[s] == kInvalidJob && !queue_.empty()) {
                assigned_[s] = *queue_.begin();
                queue_.erase(queue_.begin());
            }
            if (assigned_[s] == kInvalidJob)
                alloc_.servers[s].set_idle();
            else
                alloc_.servers[s].set_serve(assigned_[s]);
        }
        auto& last = alloc_.servers[n_ - 1];
        if (ps_.empty()) {
            last.set_idle();
        } else {
            last.kind = DirectiveKind::Share;
            last.job = kInvalidJob;
            last.share = ps_;
        }
        return alloc_;
    }

    void add_counters(std::map<std::string, double>& c) const override {
        c["migrations"] = static_cast<double>(migrations_);
    }

    double threshold() const { return d_; }

private:
    double d_;
    int n_ = 0;
    std::set<JobId> queue_;
    std::vector<JobId> assigned_;
    std::vector<JobId> ps_;
    std::uint64_t migrations_ = 0;
    Allocation alloc_;
};

// ---- single-server processor sharing ---------------------------------------
// Validation policy: equal shares over everything live on one server.
class PsPolicy : public SchedulingPolicy {
public:
    std::string name() const override { return "ps"; }

    void bind(int n) override {
        if (n != 1) throw std::invalid_argument("ps: runs on exactly one server");
        live_.clear();
        alloc_.reset(1);
    }

    void on_arrival(const SystemState&, const Job& job) override { live_.push_back(job.id); }

    void on_completion(const SystemState&, const Job& job) override {
        live_.erase(std::find(live_.begin(), live_.end(), job.id));
    }

    const Allocation& allocate(const SystemState&) override {
        auto& dir = alloc_.servers[0];
        if (live_.empty()) {
            dir.set_idle();
        } else {
            dir.kind = DirectiveKind::Share;
            dir.job = kInvalidJob;
            dir.share = live_;
        }
        return alloc_;
    }

private:
    std::vector<JobId> live_;
    Allocation alloc_;
};

// ---- spec strings -----------------------------------------------------------
// "fcfs"  "srpt"  "ps"  "sek:eps=200[,size=remaining|original]"  "split"
// "splitthresh:d=36[,small=fcfs|srpt][,steal=true|false]"  "tagsplit:d=16"

enum class PolicyType { Fcfs, Srpt, Sek, Split, SplitThresh, TagSplit, Ps };

struct PolicySpec {
    PolicyType type = PolicyType::Fcfs;
    double eps = 0.0;          // sek
    bool sek_original = false; // sek: rank by original instead of remaining
    double d = 0.0;            // splitthresh / tagsplit
    bool small_srpt = false;   // splitthresh small stage
    bool steal = false;        // splitthresh work stealing

    // threshold the policy splits sizes at, if any
    std::optional<double> size_threshold() const {
        if (type == PolicyType::SplitThresh || type == PolicyType::TagSplit) return d;
        return std::nullopt;
    }
};

inline bool parse_bool(const std::string& raw, const std::string& what) {
    std::string v = to_lower(raw);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument(what + ": expected true/false, got '" + raw + "'");
}

inline PolicySpec parse_policy(const std::string& spec) {
    std::size_t colon = spec.find(':');
    std::string name = to_lower(spec.substr(0, colon));
    std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto kv = parse_kv(body, "policy '" + name + "'");
    PolicySpec p;
    if (name == "fcfs") {
        p.type = PolicyType::Fcfs;
    } else if (name == "srpt") {
        p.type = PolicyType::Srpt;
    } else if (name == "ps") {
        p.type = PolicyType::Ps;
    } else if (name == "split") {
        p.type = PolicyType::Split;
    } else if (name == "sek") {
        p.type = PolicyType::Sek;
        p.eps = take_number(kv, "eps", name);
        if (auto it = kv.find("size"); it != kv.end()) {
            std::string v = to_lower(it->second);
            if (v == "original")
                p.sek_original = true;
            else if (v != "remaining")
                throw std::invalid_argument("sek: size must be remaining or original");
            kv.erase(it);
        }
        if (!(p.eps > 0.0)) throw std::invalid_argument("sek: eps must be > 0");
    } else if (name == "splitthresh") {
        p.type = PolicyType::SplitThresh;
        p.d = take_number(kv, "d", name);
        if (auto it = kv.find("small"); it != kv.end()) {
            std::string v = to_lower(it->second);
            if (v == "srpt")
                p.small_srpt = true;
            else if (v != "fcfs")
                throw std::invalid_argument("splitthresh: small must be fcfs or srpt");
            kv.erase(it);
        }
        if (auto it = kv.find("steal"); it != kv.end()) {
            p.steal = parse_bool(it->second, "splitthresh.steal");
            kv.erase(it);
        }
        if (!(p.d > 0.0)) throw std::invalid_argument("splitthresh: d must be > 0");
    } else if (name == "tagsplit") {
        p.type = PolicyType::TagSplit;
        p.d = take_number(kv, "d", name);
        if (!(p.d > 0.0)) throw std::invalid_argument("tagsplit: d must be > 0");
    } else {
        throw std::invalid_argument("unknown policy '" + name + "'");
    }
    reject_leftovers(kv, name);
    return p;
}

inline std::string to_spec_string(const PolicySpec& p) {
    switch (p.type) {
        case PolicyType::Fcfs: return "fcfs";
        case PolicyType::Srpt: return "srpt";
        case PolicyType::Ps: return "ps";
        case PolicyType::Split: return "split";
        case PolicyType::Sek:
            return "sek:eps=" + format_number(p.eps) +
                   ",size=" + (p.sek_original ? std::string("original") : std::string("remaining"));
        case PolicyType::SplitThresh:
            return "splitthresh:d=" + format_number(p.d) +
                   ",small=" + (p.small_srpt ? std::string("srpt") : std::string("fcfs")) +
                   ",steal=" + (p.steal ? std::string("true") : std::string("false"));
        case PolicyType::TagSplit: return "tagsplit:d=" + format_number(p.d);
    }
    throw std::logic_error("unreachable");
}

// filesystem-safe name, unique per distinct spec
inline std::string policy_label(const PolicySpec& p) {
    switch (p.type) {
        case PolicyType::Fcfs: return "fcfs";
        case PolicyType::Srpt: return "srpt";
        case PolicyType::Ps: return "ps";
        case PolicyType::Split: return "split";
        case PolicyType::Sek: {
            std::string l = "sek-eps" + format_number(p.eps);
            if (p.sek_original) l += "-orig";
            return l;
        }
        case PolicyType::SplitThresh: {
            std::string l = "splitthresh-d" + format_number(p.d);
            l += p.small_srpt ? "-srpt" : "-fcfs";
            if (p.steal) l += "-steal";
            return l;
        }
        case PolicyType::TagSplit: return "tagsplit-d" + format_number(p.d);
    }
    throw std::logic_error("unreachable");
}

inline std::unique_ptr<SchedulingPolicy> make_policy(const PolicySpec& p) {
    switch (p.type) {
        case PolicyType::Fcfs: return std::make_unique<FcfsPolicy>();
        case PolicyType::Srpt: return std::make_unique<SrptPolicy>();
        case PolicyType::Ps: return std::make_unique<PsPolicy>();
        case PolicyType::Split: return std::make_unique<SplitPolicy>();
        case PolicyType::Sek: return std::make_unique<SekPolicy>(p.eps, p.sek_original);
        case PolicyType::SplitThresh:
            return std::make_unique<SplitThreshPolicy>(p.d, p.small_srpt, p.steal);
        case PolicyType::TagSplit: return std::make_unique<TagSplitPolicy>(p.d);
    }
    throw std::logic_error("unreachable");
}

inline std::unique_ptr<SchedulingPolicy> make_policy(const std::string& spec) {
    return make_policy(parse_policy(spec));
}

} // namespace tailsim
