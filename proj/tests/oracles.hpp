#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include "disfle/cohort.hpp"
#include "disfle/cox_kernels.hpp"
#include "disfle/step_function.hpp"
#include "disfle/validation.hpp"

#include <Eigen/Dense>

#include <vector>

namespace oracles {

/// Direct product-limit estimate: for every distinct event age t ascending,
/// count the risk set by scanning all exposures, multiply (1 - d/n).
disfle::StepSurvival km_reference(const std::vector<disfle::Exposure>& rows);

/// Independent Nelson-Aalen cumulative hazard (sum of d/n).
disfle::StepCumHazard nelson_aalen_reference(const std::vector<disfle::Exposure>& rows);

/// O(n^2) concordance by pair enumeration under the comparable-pair rule:
/// event i is compared with j when entry_j < exit_i < exit_j.
double concordance_bruteforce(const std::vector<disfle::SubjectOutcome>& outcomes);

/// Riemann sum of a right-continuous step curve over [a, b] on a fine grid
/// augmented with the curve's own breakpoints.
double riemann_step_integral(const disfle::StepSurvival& curve, double a, double b,
                             double max_cell = 1e-4);

/// Natural cubic interpolating spline through (xs, ys) with zero second
/// derivatives at the ends (classic tridiagonal construction).
class NaturalInterpolant {
public:
    NaturalInterpolant(std::vector<double> xs, std::vector<double> ys);
    double operator()(double x) const;

private:
    std::vector<double> xs_, ys_, second_;
};

/// Central finite differences of the Breslow log partial likelihood.
Eigen::VectorXd fd_score(const disfle::CoxProblem& problem, const Eigen::VectorXd& beta,
                         double h, bool parallel);
Eigen::MatrixXd fd_information(const disfle::CoxProblem& problem, const Eigen::VectorXd& beta,
                               double h, bool parallel);

/// Random cohort with mixed censoring and truncation for property tests.
disfle::ExposureSet random_cohort(std::uint64_t seed, std::size_t n, bool with_truncation = true,
                                  bool with_censoring = true, bool with_ties = true);

} // namespace oracles
