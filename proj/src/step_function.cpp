#include "disfle/step_function.hpp"

#include "disfle/errors.hpp"

#include <algorithm>

namespace disfle {

double StepSurvival::at(double t) const {
    // last index with times[i] <= t
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepCumHazard::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

double integrate_step(const StepSurvival& curve, double a, double b) {
    if (b <= a) return 0.0;
    double total = 0.0;
    double t = a;
    // walk the step breakpoints inside (a, b)
    auto it = std::upper_bound(curve.times.begin(), curve.times.end(), a);
    for (; it != curve.times.end() && *it < b; ++it) {
        total += curve.at(t) * (*it - t);
        t = *it;
    }
    total += curve.at(t) * (b - t);
    return total;
}

} // namespace disfle
