#pragma once

#include "tailsim/allocation.hpp"
#include "tailsim/job.hpp"
#include "tailsim/system_state.hpp"

namespace tailsim {

// Receives each completed job that survives the warmup cut.
class CompletionSink {
public:
    virtual ~CompletionSink() = default;
    virtual void record(const Job& job, double response_time) = 0;
};

// Diagnostic observer. on_interval sees every positive-length stretch
// between events with the state as of the interval's start and the
// allocation in force; on_completion sees every completion, warmup
// included.
class Probe {
public:
    virtual ~Probe() = default;
    virtual void on_interval(const SystemState&, const Allocation&, double /*dt*/) {}
    virtual void on_completion(const Job&, double /*response_time*/) {}
};

} // namespace tailsim
