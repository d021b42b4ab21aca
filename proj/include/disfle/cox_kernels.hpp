#pragma once

#include "disfle/survival.hpp"

#include <Eigen/Dense>

#include <vector>

namespace disfle {

/// Breslow log partial likelihood with left truncation: an episode is at
/// risk at event age t iff start < t <= stop. Prepared once per design and
/// evaluated repeatedly during Newton iterations.
///
/// Columns are centered internally; the likelihood, score and information
/// are invariant under that shift, so callers see plain-coordinate results.
///
/// Two evaluators are kept deliberately:
///   - eval_serial: textbook single sweep over stop-sorted episodes with
///     incremental (sum w, sum w x, sum w x x^T) accumulators; the reference
///     implementation used by the tests and the benchmark.
///   - eval_parallel: same quantities restructured into data-parallel passes
///     (per-row weights, per-column risk sweeps, chunked outer-product
///     reductions). Partial results combine in fixed chunk order, so the
///     output is bit-identical for any worker count.
class CoxProblem {
public:
    explicit CoxProblem(const DesignMatrix& design);

    std::size_t n_rows() const { return n_; }
    std::size_t n_params() const { return p_; }
    std::size_t n_event_ages() const { return event_ages_.size(); }
    const std::vector<double>& event_ages() const { return event_ages_; }
    const std::vector<double>& event_counts() const { return event_counts_; }
    const std::vector<std::size_t>& active_columns() const { return active_; }
    const Eigen::VectorXd& column_means() const { return means_; }

    struct Value {
        double loglik = 0.0;
        Eigen::VectorXd score;
        Eigen::MatrixXd information; // observed information, symmetric PSD
    };

    Value eval_serial(const Eigen::VectorXd& beta) const;
    Value eval_parallel(const Eigen::VectorXd& beta) const;
    Value eval(const Eigen::VectorXd& beta, bool parallel) const {
        return parallel ? eval_parallel(beta) : eval_serial(beta);
    }

    /// Risk-set denominators sum_{at risk} exp((x - mean) beta), one per
    /// event age ascending. Multiply by exp(mean beta) for plain coordinates.
    Eigen::VectorXd risk_denominators(const Eigen::VectorXd& beta) const;

    double mean_shift(const Eigen::VectorXd& beta) const { return means_.dot(beta); }

private:
    void row_weights(const Eigen::VectorXd& beta, std::vector<double>& w) const;

    std::size_t n_ = 0, p_ = 0;
    std::vector<std::size_t> active_;
    std::vector<double> x_; // row-major n x p, centered active columns
    Eigen::VectorXd means_;
    std::vector<double> start_, stop_;
    std::vector<std::uint8_t> event_;

    std::vector<double> event_ages_;   // ascending
    std::vector<double> event_counts_; // d_e
    Eigen::VectorXd event_x_sum_;      // sum of centered x over event rows
    std::vector<std::size_t> order_by_stop_desc_;
    std::vector<std::size_t> order_by_start_desc_;
    std::vector<std::size_t> risk_lo_, risk_hi_; // per-row event-index range [lo, hi)
};

} // namespace disfle
