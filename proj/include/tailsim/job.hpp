#pragma once

#include <cstdint>
#include <limits>

namespace tailsim {

using JobId = std::uint64_t;
inline constexpr JobId kInvalidJob = std::numeric_limits<JobId>::max();

// Lifecycle inside a run. Completed jobs leave the system instead of
// carrying a stage. MigratedToPS marks jobs handed to a processor-sharing
// server after exhausting their first-stage service allowance.
enum class Stage : std::uint8_t { Queued, InService, MigratedToPS };

struct Job {
    JobId id;             // assigned in arrival order, starting at 0
    double arrival_time;
    double original_size;
    double remaining;     // service left; preempt-resume, never negative
    double attained;      // service received so far
    Stage stage;
};

} // namespace tailsim
