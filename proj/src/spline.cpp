#include "disfle/spline.hpp"

#include "disfle/cohort.hpp" // quantile()
#include "disfle/errors.hpp"

#include <algorithm>
#include <cmath>

namespace disfle {

namespace {

constexpr int kDegree = 3;

// Knot span index for de Boor evaluation; clamps to the valid range so the
// right boundary evaluates in the last non-empty span.
int find_span(const std::vector<double>& knots, int n_basis, double x) {
    const int p = kDegree;
    const int n = n_basis - 1;
    if (x >= knots[static_cast<std::size_t>(n + 1)]) return n;
    if (x <= knots[p]) return p;
    int lo = p, hi = n + 1;
    int mid = (lo + hi) / 2;
    while (x < knots[mid] || x >= knots[mid + 1]) {
        if (x < knots[mid])
            hi = mid;
        else
            lo = mid;
        mid = (lo + hi) / 2;
    }
    return mid;
}

// Nonzero cubic B-spline basis functions and derivatives at x
// (The NURBS Book, algorithm A2.3). ders[k][j]: k-th derivative of the
// (span - degree + j)-th basis function.
void ders_basis_funs(const std::vector<double>& knots, int span, double x, int nders,
                     double ders[3][kDegree + 1]) {
    const int p = kDegree;
    double ndu[kDegree + 1][kDegree + 1];
    double left[kDegree + 1], right[kDegree + 1];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

    double a[2][kDegree + 1];
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= nders; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = r - 1 <= pk ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    double factor = static_cast<double>(p);
    for (int k = 1; k <= nders; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
        factor *= static_cast<double>(p - k);
    }
}

} // namespace

NaturalSplineBasis::NaturalSplineBasis(double boundary_lo, double boundary_hi,
                                       std::vector<double> interior)
    : lo_(boundary_lo), hi_(boundary_hi), interior_(std::move(interior)) {
    if (!(lo_ < hi_)) throw ConfigError("spline boundary knots must satisfy lo < hi");
    if (interior_.empty())
        throw ConfigError("natural spline basis needs at least one interior knot (df >= 2)");
    if (!std::is_sorted(interior_.begin(), interior_.end()))
        throw ConfigError("interior knots must be sorted");
    for (std::size_t i = 1; i < interior_.size(); ++i)
        if (interior_[i] <= interior_[i - 1])
            throw ConfigError("interior knots must be strictly increasing");
    if (interior_.front() <= lo_ || interior_.back() >= hi_)
        throw ConfigError("interior knots must lie strictly inside the boundary knots");

    knots_.assign(4, lo_);
    knots_.insert(knots_.end(), interior_.begin(), interior_.end());
    knots_.insert(knots_.end(), 4, hi_);

    const int n_bsplines = static_cast<int>(interior_.size()) + 4;
    const int q = n_bsplines - 1; // intercept column dropped

    Eigen::MatrixXd constraints(2, q);
    constraints.row(0) = bspline_row(lo_, 2).transpose();
    constraints.row(1) = bspline_row(hi_, 2).transpose();

    // null space of the two boundary constraints via full QR of C^T
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraints.transpose());
    Eigen::MatrixXd full_q = qr.householderQ();
    projection_ = full_q.rightCols(q - 2);
}

NaturalSplineBasis NaturalSplineBasis::from_quantiles(double boundary_lo, double boundary_hi,
                                                      const std::vector<double>& sample, int df) {
    if (df < 2) throw ConfigError("spline df must be at least 2");
    if (sample.empty()) throw ConfigError("cannot place spline knots: no sample ages");
    std::vector<double> sorted(sample);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> interior;
    for (int k = 1; k < df; ++k)
        interior.push_back(quantile(sorted, static_cast<double>(k) / static_cast<double>(df)));

    // keep knots strictly increasing and strictly inside the boundary
    const double nudge = (boundary_hi - boundary_lo) * 1e-6;
    double floor_value = boundary_lo + nudge;
    for (auto& k : interior) {
        if (k < floor_value) k = floor_value;
        floor_value = k + nudge;
    }
    if (interior.back() >= boundary_hi - nudge)
        throw ConfigError("not enough distinct event ages to place " + std::to_string(df - 1) +
                          " interior knots");
    return NaturalSplineBasis(boundary_lo, boundary_hi, std::move(interior));
}

Eigen::VectorXd NaturalSplineBasis::bspline_row(double x, int derivative) const {
    const int n_bsplines = static_cast<int>(interior_.size()) + 4;
    const int span = find_span(knots_, n_bsplines, x);
    double ders[3][kDegree + 1];
    ders_basis_funs(knots_, span, x, 2, ders);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n_bsplines - 1);
    for (int j = 0; j <= kDegree; ++j) {
        const int col = span - kDegree + j;
        if (col >= 1) row[col - 1] = ders[derivative][j]; // col 0 = intercept, dropped
    }
    return row;
}

Eigen::VectorXd NaturalSplineBasis::eval(double x) const {
    if (x < lo_) {
        Eigen::VectorXd value = projection_.transpose() * bspline_row(lo_, 0);
        Eigen::VectorXd slope = projection_.transpose() * bspline_row(lo_, 1);
        return value + (x - lo_) * slope;
    }
    if (x > hi_) {
        Eigen::VectorXd value = projection_.transpose() * bspline_row(hi_, 0);
        Eigen::VectorXd slope = projection_.transpose() * bspline_row(hi_, 1);
        return value + (x - hi_) * slope;
    }
    return projection_.transpose() * bspline_row(x, 0);
}

Eigen::VectorXd NaturalSplineBasis::eval_derivative(double x) const {
    const double b = std::clamp(x, lo_, hi_);
    return projection_.transpose() * bspline_row(b, 1);
}

} // namespace disfle
