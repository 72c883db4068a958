#pragma once

#include <cmath>
#include <functional>

// Test-side integration oracle. Moments are recovered purely from the CCDF:
//   E[S * 1{S > x}] = x * P{S > x} + integral_x^inf P{S > t} dt
//   E[S]   = integral_0^inf P{S > t} dt
//   E[S^2] = integral_0^inf 2 t P{S > t} dt
// so closed-form moment members can be cross-checked against tail() alone.

namespace testutil {

// composite Simpson on [a, b]
inline double simpson(const std::function<double(double)>& f, double a, double b, int segments) {
    double h = (b - a) / segments;
    double acc = f(a) + f(b);
    for (int i = 1; i < segments; ++i)
        acc += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// integral_a^b of f, with the upper piece done in log space so heavy tails
// with b up to ~1e12 stay accurate
inline double integrate(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0.0;
    double split = std::min(b, std::max(2.0 * a, a + 10.0));
    double head = simpson(f, a, split, 40000);
    if (split >= b) return head;
    auto g = [&](double s) { double t = std::exp(s); return f(t) * t; };
    double tail_part = simpson(g, std::log(split), std::log(b), 40000);
    return head + tail_part;
}

} // namespace testutil
