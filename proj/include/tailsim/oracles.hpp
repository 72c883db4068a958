#pragma once

#include <optional>
#include <stdexcept>

#include "tailsim/distributions.hpp"

namespace tailsim {

// M/M/1 FCFS: mean response 1/(mu - lambda)
inline double mm1_mean_response(double lambda, double mu) {
    if (!(lambda > 0.0) || !(mu > 0.0))
        throw std::invalid_argument("mm1: rates must be > 0");
    if (!(lambda < mu)) throw std::invalid_argument("mm1: unstable, lambda >= mu");
    return 1.0 / (mu - lambda);
}

// M/G/1 FCFS mean wait, lambda E[S^2] / (2 (1 - rho)); disengaged when the
// size distribution's second moment diverges
inline std::optional<double> pk_mean_wait(double lambda, const SizeDistribution& dist) {
    if (!(lambda > 0.0)) throw std::invalid_argument("pk: lambda must be > 0");
    double rho = lambda * mean(dist);
    if (!(rho < 1.0)) throw std::invalid_argument("pk: unstable, rho >= 1");
    double m2 = second_moment(dist);
    if (m2 == kInf) return std::nullopt;
    return lambda * m2 / (2.0 * (1.0 - rho));
}

// M/G/1 processor sharing: mean response E[S] / (1 - rho), insensitive to
// the size distribution beyond its mean
inline double ps_mean_response(double lambda, const SizeDistribution& dist) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ps oracle: lambda must be > 0");
    double m = mean(dist);
    double rho = lambda * m;
    if (!(rho < 1.0)) throw std::invalid_argument("ps oracle: unstable, rho >= 1");
    return m / (1.0 - rho);
}

} // namespace tailsim
