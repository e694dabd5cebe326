#pragma once

#include <cmath>
#include <vector>

#include "pathint/errors.hpp"

namespace pathint {

/// Partition 0 = t_0 < t_1 < ... < t_N = T of [0, T].
struct Partition {
    std::vector<double> times;

    int segments() const { return static_cast<int>(times.size()) - 1; }
    double horizon() const { return times.back(); }
    double dt(int i) const { return times[i + 1] - times[i]; }  // i in [0, N)
    double mesh() const {
        double m = 0.0;
        for (int i = 0; i < segments(); ++i) m = std::max(m, dt(i));
        return m;
    }

    void validate() const {
        if (times.size() < 2 || times.front() != 0.0)
            throw UsageError("partition: need 0 = t_0 < ... < t_N");
        for (size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1])) throw UsageError("partition: times must increase");
    }
};

inline Partition partition_uniform(double horizon, int segments) {
    if (segments < 1 || !(horizon > 0)) throw UsageError("partition_uniform: need N >= 1, T > 0");
    Partition p;
    p.times.resize(static_cast<size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k)
        p.times[static_cast<size_t>(k)] = horizon * static_cast<double>(k) / segments;
    p.times.back() = horizon;
    return p;
}

/// Level-N dyadic partition of [0, N]: times k / 2^N, k = 0, ..., N * 2^N.
inline Partition partition_dyadic(int level) {
    if (level < 1) throw UsageError("partition_dyadic: need level >= 1");
    Partition p;
    const long long count = static_cast<long long>(level) << level;
    const double step = std::ldexp(1.0, -level);
    p.times.resize(static_cast<size_t>(count) + 1);
    for (long long k = 0; k <= count; ++k) p.times[static_cast<size_t>(k)] = step * k;
    return p;
}

}  // namespace pathint
