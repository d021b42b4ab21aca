#include "disfle/cox_kernels.hpp"

#include "disfle/errors.hpp"

#include <algorithm>
#include <cmath>

namespace disfle {

namespace {
constexpr std::size_t kChunk = 4096; // fixed partition size, independent of worker count
}

CoxProblem::CoxProblem(const DesignMatrix& design) {
    active_ = design.active_columns();
    n_ = design.n_rows;
    p_ = active_.size();
    if (design.n_events() == 0) throw DataError("Cox fit needs at least one event row");

    start_ = design.start;
    stop_ = design.stop;
    event_ = design.event;

    x_.assign(n_ * p_, 0.0);
    if (x_.empty()) x_.resize(1, 0.0); // keep data() valid for zero-parameter fits
    means_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p_));
    const std::size_t full_p = design.n_cols();
    for (std::size_t j = 0; j < p_; ++j) {
        double m = 0.0;
        for (std::size_t r = 0; r < n_; ++r) m += design.values[r * full_p + active_[j]];
        means_[static_cast<Eigen::Index>(j)] = n_ ? m / static_cast<double>(n_) : 0.0;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n_); ++r) {
        const auto row = static_cast<std::size_t>(r);
        for (std::size_t j = 0; j < p_; ++j)
            x_[row * p_ + j] = design.values[row * full_p + active_[j]] -
                               means_[static_cast<Eigen::Index>(j)];
    }

    // distinct event ages ascending with multiplicities
    std::vector<double> ages;
    for (std::size_t r = 0; r < n_; ++r)
        if (event_[r]) ages.push_back(stop_[r]);
    std::sort(ages.begin(), ages.end());
    for (std::size_t i = 0; i < ages.size();) {
        std::size_t j = i;
        while (j < ages.size() && ages[j] == ages[i]) ++j;
        event_ages_.push_back(ages[i]);
        event_counts_.push_back(static_cast<double>(j - i));
        i = j;
    }

    event_x_sum_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p_));
    for (std::size_t r = 0; r < n_; ++r)
        if (event_[r])
            event_x_sum_ += Eigen::Map<const Eigen::VectorXd>(x_.data() + r * p_,
                                                              static_cast<Eigen::Index>(p_));

    order_by_stop_desc_.resize(n_);
    order_by_start_desc_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_by_stop_desc_[i] = order_by_start_desc_[i] = i;
    std::sort(order_by_stop_desc_.begin(), order_by_stop_desc_.end(),
              [&](std::size_t a, std::size_t b) { return stop_[a] > stop_[b]; });
    std::sort(order_by_start_desc_.begin(), order_by_start_desc_.end(),
              [&](std::size_t a, std::size_t b) { return start_[a] > start_[b]; });

    risk_lo_.resize(n_);
    risk_hi_.resize(n_);
    for (std::size_t r = 0; r < n_; ++r) {
        risk_lo_[r] = static_cast<std::size_t>(
            std::upper_bound(event_ages_.begin(), event_ages_.end(), start_[r]) -
            event_ages_.begin());
        risk_hi_[r] = static_cast<std::size_t>(
            std::upper_bound(event_ages_.begin(), event_ages_.end(), stop_[r]) -
            event_ages_.begin());
    }
}

void CoxProblem::row_weights(const Eigen::VectorXd& beta, std::vector<double>& w) const {
    w.resize(n_);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n_); ++r) {
        const auto row = static_cast<std::size_t>(r);
        double lp = 0.0;
        const double* xr = x_.data() + row * p_;
        for (std::size_t j = 0; j < p_; ++j) lp += xr[j] * beta[static_cast<Eigen::Index>(j)];
        w[row] = std::exp(lp);
    }
}

CoxProblem::Value CoxProblem::eval_serial(const Eigen::VectorXd& beta) const {
    const auto p = static_cast<Eigen::Index>(p_);
    Value out;
    out.score = Eigen::VectorXd::Zero(p);
    out.information = Eigen::MatrixXd::Zero(p, p);

    std::vector<double> w;
    row_weights(beta, w);

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    double loglik = event_x_sum_.dot(beta);
    Eigen::VectorXd score_sub = Eigen::VectorXd::Zero(p);

    std::size_t ia = 0, ir = 0;
    for (std::size_t e = event_ages_.size(); e-- > 0;) {
        const double t = event_ages_[e];
        while (ia < n_ && stop_[order_by_stop_desc_[ia]] >= t) {
            const std::size_t k = order_by_stop_desc_[ia++];
            const auto xk = Eigen::Map<const Eigen::VectorXd>(x_.data() + k * p_, p);
            s0 += w[k];
            s1 += w[k] * xk;
            s2.selfadjointView<Eigen::Lower>().rankUpdate(xk, w[k]);
        }
        while (ir < n_ && start_[order_by_start_desc_[ir]] >= t) {
            const std::size_t k = order_by_start_desc_[ir++];
            const auto xk = Eigen::Map<const Eigen::VectorXd>(x_.data() + k * p_, p);
            s0 -= w[k];
            s1 -= w[k] * xk;
            s2.selfadjointView<Eigen::Lower>().rankUpdate(xk, -w[k]);
        }
        if (!(s0 > 0.0)) throw DataError("empty risk set at event age " + std::to_string(t));
        const double d = event_counts_[e];
        loglik -= d * std::log(s0);
        const Eigen::VectorXd mu = s1 / s0;
        score_sub += d * mu;
        out.information.selfadjointView<Eigen::Lower>().rankUpdate(mu, -d);
        out.information.triangularView<Eigen::Lower>() += (d / s0) * s2;
    }
    out.loglik = loglik;
    out.score = event_x_sum_ - score_sub;
    out.information.triangularView<Eigen::StrictlyUpper>() =
        out.information.transpose().triangularView<Eigen::StrictlyUpper>();
    return out;
}

CoxProblem::Value CoxProblem::eval_parallel(const Eigen::VectorXd& beta) const {
    const auto p = static_cast<Eigen::Index>(p_);
    const std::size_t n_events = event_ages_.size();
    Value out;
    out.score = Eigen::VectorXd::Zero(p);
    out.information = Eigen::MatrixXd::Zero(p, p);

    std::vector<double> w;
    row_weights(beta, w);

    // risk denominators per event age via interval difference sums
    std::vector<double> s0(n_events, 0.0), diff(n_events + 1, 0.0);
    for (std::size_t r = 0; r < n_; ++r) {
        if (risk_lo_[r] >= risk_hi_[r]) continue;
        diff[risk_lo_[r]] += w[r];
        diff[risk_hi_[r]] -= w[r];
    }
    double running = 0.0;
    for (std::size_t e = 0; e < n_events; ++e) {
        running += diff[e];
        s0[e] = running;
        if (!(s0[e] > 0.0))
            throw DataError("empty risk set at event age " + std::to_string(event_ages_[e]));
    }

    double loglik = event_x_sum_.dot(beta);
    for (std::size_t e = 0; e < n_events; ++e) loglik -= event_counts_[e] * std::log(s0[e]);
    out.loglik = loglik;

    // per-column sweeps: score and the per-event weighted covariate means
    Eigen::MatrixXd mu(static_cast<Eigen::Index>(n_events), p); // mu[e][j]
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(p_); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        std::vector<double> col_diff(n_events + 1, 0.0);
        for (std::size_t r = 0; r < n_; ++r) {
            if (risk_lo_[r] >= risk_hi_[r]) continue;
            const double v = w[r] * x_[r * p_ + j];
            col_diff[risk_lo_[r]] += v;
            col_diff[risk_hi_[r]] -= v;
        }
        double acc = 0.0;
        double weighted = 0.0;
        for (std::size_t e = 0; e < n_events; ++e) {
            acc += col_diff[e];
            mu(static_cast<Eigen::Index>(e), jj) = acc / s0[e];
            weighted += event_counts_[e] * mu(static_cast<Eigen::Index>(e), jj);
        }
        out.score[jj] = event_x_sum_[jj] - weighted;
    }

    // cumulative d/S0 over event ages; per-row sums become a prefix lookup
    std::vector<double> hazard_prefix(n_events + 1, 0.0);
    for (std::size_t e = 0; e < n_events; ++e)
        hazard_prefix[e + 1] = hazard_prefix[e] + event_counts_[e] / s0[e];

    // information, term 1: sum_k w_k G_k x_k x_k^T in fixed-size row chunks
    const std::size_t n_row_chunks = n_ ? (n_ + kChunk - 1) / kChunk : 0;
    std::vector<Eigen::MatrixXd> partial(n_row_chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t cc = 0; cc < static_cast<std::ptrdiff_t>(n_row_chunks); ++cc) {
        const auto c = static_cast<std::size_t>(cc);
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(p, p);
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(n_, lo + kChunk);
        for (std::size_t r = lo; r < hi; ++r) {
            const double g = hazard_prefix[risk_hi_[r]] - hazard_prefix[risk_lo_[r]];
            if (g == 0.0) continue;
            const auto xk = Eigen::Map<const Eigen::VectorXd>(x_.data() + r * p_, p);
            local.selfadjointView<Eigen::Lower>().rankUpdate(xk, w[r] * g);
        }
        partial[c] = std::move(local);
    }
    for (std::size_t c = 0; c < n_row_chunks; ++c)
        out.information.triangularView<Eigen::Lower>() += partial[c];

    // information, term 2: minus sum_e d_e mu_e mu_e^T in event chunks
    const std::size_t n_event_chunks = n_events ? (n_events + kChunk - 1) / kChunk : 0;
    std::vector<Eigen::MatrixXd> partial2(n_event_chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t cc = 0; cc < static_cast<std::ptrdiff_t>(n_event_chunks); ++cc) {
        const auto c = static_cast<std::size_t>(cc);
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(p, p);
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(n_events, lo + kChunk);
        for (std::size_t e = lo; e < hi; ++e)
            local.selfadjointView<Eigen::Lower>().rankUpdate(
                mu.row(static_cast<Eigen::Index>(e)).transpose(), event_counts_[e]);
        partial2[c] = std::move(local);
    }
    for (std::size_t c = 0; c < n_event_chunks; ++c)
        out.information.triangularView<Eigen::Lower>() -= partial2[c];

    out.information.triangularView<Eigen::StrictlyUpper>() =
        out.information.transpose().triangularView<Eigen::StrictlyUpper>();
    return out;
}

Eigen::VectorXd CoxProblem::risk_denominators(const Eigen::VectorXd& beta) const {
    const std::size_t n_events = event_ages_.size();
    std::vector<double> w;
    row_weights(beta, w);
    std::vector<double> diff(n_events + 1, 0.0);
    for (std::size_t r = 0; r < n_; ++r) {
        if (risk_lo_[r] >= risk_hi_[r]) continue;
        diff[risk_lo_[r]] += w[r];
        diff[risk_hi_[r]] -= w[r];
    }
    Eigen::VectorXd s0(static_cast<Eigen::Index>(n_events));
    double running = 0.0;
    for (std::size_t e = 0; e < n_events; ++e) {
        running += diff[e];
        s0[static_cast<Eigen::Index>(e)] = running;
        if (!(running > 0.0))
            throw DataError("empty risk set at event age " + std::to_string(event_ages_[e]));
    }
    return s0;
}

} // namespace disfle
