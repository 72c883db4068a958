#pragma once

#include <cstdint>
#include <vector>

#include "tailsim/job.hpp"

namespace tailsim {

enum class DirectiveKind : std::uint8_t { Idle, Serve, Share };

// What one server does until the next event: nothing, serve a single job at
// rate 1, or split rate 1 equally over a share set (processor sharing).
struct ServerDirective {
    DirectiveKind kind = DirectiveKind::Idle;
    JobId job = kInvalidJob;
    std::vector<JobId> share;

    void set_idle() {
        kind = DirectiveKind::Idle;
        job = kInvalidJob;
        share.clear();
    }
    void set_serve(JobId j) {
        kind = DirectiveKind::Serve;
        job = j;
        share.clear();
    }
};

struct Allocation {
    std::vector<ServerDirective> servers;

    void reset(int n) {
        servers.resize(n);
        for (auto& s : servers) s.set_idle();
    }
};

} // namespace tailsim
