#include "oracles.hpp"

#include "disfle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace oracles {

using namespace disfle;

StepSurvival km_reference(const std::vector<Exposure>& rows) {
    std::set<double> event_ages;
    for (const auto& r : rows)
        if (r.event) event_ages.insert(r.exit_age);

    StepSurvival curve;
    double survival = 1.0;
    for (double t : event_ages) {
        std::size_t at_risk = 0, events = 0;
        for (const auto& r : rows) {
            if (r.entry_age < t && t <= r.exit_age) ++at_risk;
            if (r.event && r.exit_age == t) ++events;
        }
        survival *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
        curve.times.push_back(t);
        curve.values.push_back(survival);
    }
    return curve;
}

StepCumHazard nelson_aalen_reference(const std::vector<Exposure>& rows) {
    std::set<double> event_ages;
    for (const auto& r : rows)
        if (r.event) event_ages.insert(r.exit_age);

    StepCumHazard out;
    double cumulative = 0.0;
    for (double t : event_ages) {
        std::size_t at_risk = 0, events = 0;
        for (const auto& r : rows) {
            if (r.entry_age < t && t <= r.exit_age) ++at_risk;
            if (r.event && r.exit_age == t) ++events;
        }
        const double increment = static_cast<double>(events) / static_cast<double>(at_risk);
        cumulative += increment;
        out.times.push_back(t);
        out.increments.push_back(increment);
        out.cumulative.push_back(cumulative);
    }
    return out;
}

double concordance_bruteforce(const std::vector<SubjectOutcome>& outcomes) {
    long long concordant2 = 0, comparable = 0;
    for (const auto& i : outcomes) {
        if (!i.event) continue;
        for (const auto& j : outcomes) {
            if (&i == &j) continue;
            if (!(j.entry < i.exit && i.exit < j.exit)) continue;
            ++comparable;
            if (i.score > j.score)
                concordant2 += 2;
            else if (i.score == j.score)
                concordant2 += 1;
        }
    }
    if (comparable == 0) throw std::runtime_error("oracle: no comparable pairs");
    return static_cast<double>(concordant2) / (2.0 * static_cast<double>(comparable));
}

double riemann_step_integral(const StepSurvival& curve, double a, double b, double max_cell) {
    std::set<double> breakpoints{a, b};
    for (double t : curve.times)
        if (t > a && t < b) breakpoints.insert(t);
    const auto cells = static_cast<std::size_t>(std::ceil((b - a) / max_cell));
    for (std::size_t i = 1; i < cells; ++i)
        breakpoints.insert(a + (b - a) * static_cast<double>(i) / static_cast<double>(cells));

    double total = 0.0;
    auto it = breakpoints.begin();
    double prev = *it++;
    for (; it != breakpoints.end(); ++it) {
        total += curve.at(prev) * (*it - prev);
        prev = *it;
    }
    return total;
}

NaturalInterpolant::NaturalInterpolant(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)), second_(xs_.size(), 0.0) {
    const std::size_t n = xs_.size();
    // tridiagonal solve for interior second derivatives, natural ends = 0
    std::vector<double> sub(n, 0.0), diag(n, 0.0), sup(n, 0.0), rhs(n, 0.0);
    diag[0] = diag[n - 1] = 1.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = xs_[i] - xs_[i - 1];
        const double h1 = xs_[i + 1] - xs_[i];
        sub[i] = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        sup[i] = h1 / 6.0;
        rhs[i] = (ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < n; ++i) {
        const double m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    second_[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        second_[i] = (rhs[i] - sup[i] * second_[i + 1]) / diag[i];
}

double NaturalInterpolant::operator()(double x) const {
    const std::size_t n = xs_.size();
    if (x <= xs_.front()) { // linear extension, slope from the first segment
        const double h = xs_[1] - xs_[0];
        const double slope = (ys_[1] - ys_[0]) / h - h / 6.0 * (2.0 * second_[0] + second_[1]);
        return ys_[0] + slope * (x - xs_[0]);
    }
    if (x >= xs_.back()) {
        const double h = xs_[n - 1] - xs_[n - 2];
        const double slope =
            (ys_[n - 1] - ys_[n - 2]) / h + h / 6.0 * (second_[n - 2] + 2.0 * second_[n - 1]);
        return ys_[n - 1] + slope * (x - xs_[n - 1]);
    }
    std::size_t i = static_cast<std::size_t>(
                        std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) -
                    1;
    const double h = xs_[i + 1] - xs_[i];
    const double a = (xs_[i + 1] - x) / h;
    const double b = (x - xs_[i]) / h;
    return a * ys_[i] + b * ys_[i + 1] +
           ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * h * h / 6.0;
}

Eigen::VectorXd fd_score(const CoxProblem& problem, const Eigen::VectorXd& beta, double h,
                         bool parallel) {
    Eigen::VectorXd out(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        Eigen::VectorXd hi = beta, lo = beta;
        hi[j] += h;
        lo[j] -= h;
        out[j] = (problem.eval(hi, parallel).loglik - problem.eval(lo, parallel).loglik) /
                 (2.0 * h);
    }
    return out;
}

Eigen::MatrixXd fd_information(const CoxProblem& problem, const Eigen::VectorXd& beta, double h,
                               bool parallel) {
    // information = -Hessian = -d(score)/d(beta)
    Eigen::MatrixXd out(beta.size(), beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        Eigen::VectorXd hi = beta, lo = beta;
        hi[j] += h;
        lo[j] -= h;
        const Eigen::VectorXd ds =
            problem.eval(hi, parallel).score - problem.eval(lo, parallel).score;
        out.col(j) = -ds / (2.0 * h);
    }
    return 0.5 * (out + out.transpose());
}

ExposureSet random_cohort(std::uint64_t seed, std::size_t n, bool with_truncation,
                          bool with_censoring, bool with_ties) {
    Rng rng(seed, 0x636f686f7274ULL);
    ExposureSet set;
    set.schema = {{"group"}};
    for (std::size_t i = 0; i < n; ++i) {
        Exposure e;
        e.subject_id = static_cast<std::int64_t>(i + 1);
        e.entry_age = 50.0 + (with_truncation ? 10.0 * rng.next_double() : 0.0);
        double span = 0.5 + 8.0 * rng.next_double();
        if (with_ties && rng.bernoulli(0.5)) span = std::round(span * 4.0) / 4.0 + 0.25;
        e.exit_age = e.entry_age + span;
        e.event = !with_censoring || rng.bernoulli(0.6);
        e.covariates = {rng.bernoulli(0.5) ? 1.0 : 0.0};
        set.rows.push_back(e);
    }
    return set;
}

} // namespace oracles
