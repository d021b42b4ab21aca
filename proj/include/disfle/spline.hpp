#pragma once

#include <Eigen/Dense>

#include <vector>

namespace disfle {

/// Natural cubic spline basis without an intercept column:
/// df = interior knot count + 1 basis functions, C^2 between the boundary
/// knots and exactly linear beyond them. Built from a cubic B-spline basis
/// with the two second-derivative boundary constraints projected out.
class NaturalSplineBasis {
public:
    NaturalSplineBasis(double boundary_lo, double boundary_hi, std::vector<double> interior);

    /// Places the interior knots at the k/df quantiles (k = 1..df-1) of the
    /// given sample, typically observed event ages. Duplicated quantiles are
    /// nudged apart; throws ConfigError when the sample cannot support df.
    static NaturalSplineBasis from_quantiles(double boundary_lo, double boundary_hi,
                                             const std::vector<double>& sample, int df);

    int df() const { return static_cast<int>(projection_.cols()); }
    double boundary_lo() const { return lo_; }
    double boundary_hi() const { return hi_; }
    const std::vector<double>& interior_knots() const { return interior_; }

    /// Basis values at x (df of them). Evaluation outside the boundary knots
    /// is permitted and linear by construction.
    Eigen::VectorXd eval(double x) const;
    Eigen::VectorXd eval_derivative(double x) const;

private:
    // raw cubic B-spline row over the augmented knot vector, with the first
    // column dropped (intercept removal); `derivative` in {0, 1, 2}
    Eigen::VectorXd bspline_row(double x, int derivative) const;

    double lo_, hi_;
    std::vector<double> interior_;
    std::vector<double> knots_; // augmented: lo x4, interior, hi x4
    Eigen::MatrixXd projection_; // (n_bsplines - 1) x df null-space basis
};

} // namespace disfle
