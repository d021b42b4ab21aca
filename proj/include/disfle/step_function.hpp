#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace disfle {

/// Right-continuous step survival function: S = 1 before the first entry of
/// `times`, S = values[i] on [times[i], times[i+1]). Optional pointwise 95%
/// bands and the Greenwood variance accumulator needed to build them.
struct StepSurvival {
    std::vector<double> times;  // strictly increasing event ages
    std::vector<double> values; // non-increasing, in [0, 1]
    std::vector<double> lower;  // empty until bands are attached
    std::vector<double> upper;
    std::vector<double> greenwood; // running sum of d / (n (n - d))

    std::size_t size() const { return times.size(); }
    bool has_bands() const { return !lower.empty(); }

    /// S(t) with the right-continuous convention (1 before the first step).
    double at(double t) const;
};

/// Cumulative hazard as a step function: increments land at event ages,
/// cumulative starts from 0.
struct StepCumHazard {
    std::vector<double> times;
    std::vector<double> increments;
    std::vector<double> cumulative;

    std::size_t size() const { return times.size(); }
    double at(double t) const; // cumulative hazard, 0 before the first step
};

/// Exact integral of a right-continuous step survival curve over [a, b].
double integrate_step(const StepSurvival& curve, double a, double b);

} // namespace disfle
