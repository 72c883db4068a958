#pragma once

#include <map>
#include <string>

#include "tailsim/allocation.hpp"
#include "tailsim/job.hpp"
#include "tailsim/system_state.hpp"

namespace tailsim {

// What a fired service trigger means. MigrateToPS also flips the job's
// stage; Reevaluate just forces a fresh allocation at the crossing instant.
enum class TriggerAction : std::uint8_t { Reevaluate, MigrateToPS };

// A preempt-resume scheduling rule for n identical unit-speed servers.
//
// The engine calls the hooks with the event already applied to the state
// (arrived job inserted, completed job removed) and then asks allocate()
// for the directives in force until the next event. Allocations never
// change between events, so a rule whose priorities could reorder
// mid-interval must expose the crossing through trigger_distance():
// the engine fires a trigger event when a served job has received that
// much further service. Reporting a distance rather than an absolute
// attained level keeps the small gap exact when attained service is
// large. When the trigger fires, the engine writes the job's attained
// and remaining service to exactly the announced crossing (clock-level
// rounding never leaks into the job), and it schedules every trigger
// strictly after the current instant (at least one clock ulp away), so
// a rule whose re-arming distances shrink makes forward progress
// regardless of how small they get.
class SchedulingPolicy {
public:
    virtual ~SchedulingPolicy() = default;

    virtual std::string name() const = 0;

    // called once before a run; throws if the policy cannot run on n servers
    virtual void bind(int n) = 0;

    virtual void on_arrival(const SystemState& st, const Job& job) = 0;

    // `job` is the final snapshot; it is no longer in `st`
    virtual void on_completion(const SystemState& st, const Job& job) = 0;

    // further service after which a served job needs a trigger event;
    // kInf when none. Only consulted when uses_triggers() is true.
    virtual double trigger_distance(const SystemState&, const Job&) const { return kInf; }
    virtual bool uses_triggers() const { return false; }
    virtual TriggerAction on_trigger(const SystemState&, const Job&) {
        return TriggerAction::Reevaluate;
    }

    // fresh directives after an event; the reference stays valid until the
    // next call
    virtual const Allocation& allocate(const SystemState& st) = 0;

    // run summary counters (steals, migrations, ...)
    virtual void add_counters(std::map<std::string, double>&) const {}
};

} // namespace tailsim
