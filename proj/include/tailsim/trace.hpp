#pragma once

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailsim {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceJob {
    double arrival;
    double size;
};

using Trace = std::vector<TraceJob>;

// Scripted workload: one "arrival_time,size" pair per line, an optional
// header line, blank lines ignored. Arrival times must be non-decreasing
// and sizes positive.
inline Trace parse_trace(std::istream& in) {
    Trace trace;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) stripped += c;
        if (stripped.empty()) continue;
        std::size_t comma = stripped.find(',');
        bool parsed = false;
        double t = 0.0, s = 0.0;
        if (comma != std::string::npos) {
            try {
                std::size_t p1 = 0, p2 = 0;
                std::string a = stripped.substr(0, comma);
                std::string b = stripped.substr(comma + 1);
                t = std::stod(a, &p1);
                s = std::stod(b, &p2);
                parsed = p1 == a.size() && p2 == b.size();
            } catch (const std::exception&) {
                parsed = false;
            }
        }
        if (!parsed) {
            if (first) { // header
                first = false;
                continue;
            }
            throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                        ": expected 'arrival_time,size'");
        }
        first = false;
        if (!trace.empty() && t < trace.back().arrival)
            throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                        ": arrival times must be non-decreasing");
        if (!(t >= 0.0))
            throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                        ": arrival time must be >= 0");
        if (!(s > 0.0))
            throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                        ": size must be > 0");
        trace.push_back({t, s});
    }
    return trace;
}

inline Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file '" + path + "'");
    return parse_trace(in);
}

} // namespace tailsim
