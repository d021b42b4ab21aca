#pragma once

#include "disfle/adjustment.hpp"
#include "disfle/cohort.hpp"
#include "disfle/cox.hpp"
#include "disfle/indicator.hpp"
#include "disfle/km.hpp"
#include "disfle/validation.hpp"

#include <map>
#include <string>
#include <vector>

namespace disfle {

/// Minimal SVG line-plot emitter: fixed-precision path data so outputs stay
/// byte-stable and diffable.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label);

    void add_band(const std::vector<double>& x, const std::vector<double>& lo,
                  const std::vector<double>& hi, const std::string& color);
    void add_series(const std::string& name, const std::vector<double>& x,
                    const std::vector<double>& y, const std::string& color, bool steps = true);
    void write(const std::string& path, const std::string& manifest_hash) const;

private:
    struct Series {
        std::string name, color;
        std::vector<double> x, y;
        bool steps;
    };
    struct Band {
        std::string color;
        std::vector<double> x, lo, hi;
    };
    void bounds(double& x0, double& x1, double& y0, double& y1) const;

    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    std::vector<Band> bands_;
};

std::string default_series_color(std::size_t index);

// --- CSV and markdown emission -------------------------------------------------

void write_exclusion_report_csv(const std::string& path, const ExclusionReport& report,
                                const std::string& manifest_hash);
void write_parse_errors_csv(const std::string& path, const ParseReport& report,
                            const std::string& manifest_hash);
void write_descriptive_stats_csv(const std::string& path, const DescriptiveStats& stats,
                                 const std::string& manifest_hash);
void write_correlations_csv(const std::string& path, const DescriptiveStats& stats,
                            const std::string& manifest_hash);

/// stratum/profile, age, survival, lower, upper.
void write_survival_csv(const std::string& path,
                        const std::vector<std::pair<std::string, const StepSurvival*>>& curves,
                        const std::string& manifest_hash);

/// profile/stratum, age, disfle, lower, upper.
void write_disfle_csv(const std::string& path,
                      const std::vector<std::pair<std::string, const DisfleCurve*>>& curves,
                      const std::string& manifest_hash);

/// Age, Sex, Dis-FLE summary rows (ages 50 and 65 by default).
struct DisfleSummaryRow {
    int age;
    std::string group;
    double value;
};
void write_disfle_summary_csv(const std::string& path, const std::vector<DisfleSummaryRow>& rows,
                              const std::string& manifest_hash);

/// term, level, basis index, beta, standard error, hazard ratio, p-value.
void write_coefficients_csv(const std::string& path, const CoxFit& fit,
                            const std::string& manifest_hash);

/// Department hazard ratios keyed by department code.
void write_department_csv(const std::string& path, const CoxModel& model,
                          const std::string& manifest_hash);

void write_risk_group_csv(const std::string& path, const RiskGroupReport& report,
                          const std::string& manifest_hash);
void write_validation_markdown(const std::string& path, double c_statistic,
                               const RiskGroupReport& report, const std::string& manifest_hash);

/// Two-sided normal p-value for a Wald z score.
double wald_p_value(double estimate, double standard_error);

} // namespace disfle
