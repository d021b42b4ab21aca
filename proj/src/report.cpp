#include "disfle/report.hpp"

#include "disfle/csv.hpp"
#include "disfle/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace disfle {

double wald_p_value(double estimate, double standard_error) {
    if (!(standard_error > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double z = std::fabs(estimate / standard_error);
    return std::erfc(z / std::sqrt(2.0));
}

// --- SVG -----------------------------------------------------------------------

namespace {
constexpr double kWidth = 720, kHeight = 480;
constexpr double kMarginL = 64, kMarginR = 16, kMarginT = 36, kMarginB = 48;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}
} // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

std::string default_series_color(std::size_t index) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    return palette[index % 8];
}

void SvgPlot::add_band(const std::vector<double>& x, const std::vector<double>& lo,
                       const std::vector<double>& hi, const std::string& color) {
    if (x.empty() || x.size() != lo.size() || x.size() != hi.size()) return;
    bands_.push_back({color, x, lo, hi});
}

void SvgPlot::add_series(const std::string& name, const std::vector<double>& x,
                         const std::vector<double>& y, const std::string& color, bool steps) {
    if (x.empty() || x.size() != y.size()) return;
    series_.push_back({name, color, x, y, steps});
}

void SvgPlot::bounds(double& x0, double& x1, double& y0, double& y1) const {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -std::numeric_limits<double>::infinity();
    auto fold = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
        for (double v : xs) {
            x0 = std::min(x0, v);
            x1 = std::max(x1, v);
        }
        for (double v : ys) {
            y0 = std::min(y0, v);
            y1 = std::max(y1, v);
        }
    };
    for (const auto& s : series_) fold(s.x, s.y);
    for (const auto& b : bands_) {
        fold(b.x, b.lo);
        fold(b.x, b.hi);
    }
    if (!(x0 < x1)) x1 = x0 + 1;
    if (!(y0 < y1)) y1 = y0 + 1;
}

void SvgPlot::write(const std::string& path, const std::string& manifest_hash) const {
    double x0, x1, y0, y1;
    bounds(x0, x1, y0, y1);
    const double plot_w = kWidth - kMarginL - kMarginR;
    const double plot_h = kHeight - kMarginT - kMarginB;
    auto sx = [&](double x) { return kMarginL + (x - x0) / (x1 - x0) * plot_w; };
    auto sy = [&](double y) { return kMarginT + (y1 - y) / (y1 - y0) * plot_h; };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write SVG: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n";
    out << "<!-- manifest " << manifest_hash << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
        << title_ << "</text>\n";

    for (const auto& b : bands_) {
        out << "<path fill=\"" << b.color << "\" fill-opacity=\"0.25\" stroke=\"none\" d=\"";
        for (std::size_t i = 0; i < b.x.size(); ++i)
            out << (i ? " L" : "M") << fmt(sx(b.x[i])) << " " << fmt(sy(b.hi[i]));
        for (std::size_t i = b.x.size(); i-- > 0;)
            out << " L" << fmt(sx(b.x[i])) << " " << fmt(sy(b.lo[i]));
        out << " Z\"/>\n";
    }

    // axes with simple tick labels at the corners
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT + plot_h << "\" x2=\""
        << kMarginL + plot_w << "\" y2=\"" << kMarginT + plot_h
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
        << "\" y2=\"" << kMarginT + plot_h << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kMarginL << "\" y=\"" << kHeight - 12
        << "\" font-size=\"11\">" << fmt(x0) << "</text>\n";
    out << "<text x=\"" << kMarginL + plot_w << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(x1) << "</text>\n";
    out << "<text x=\"" << kMarginL - 6 << "\" y=\"" << kMarginT + plot_h
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y0) << "</text>\n";
    out << "<text x=\"" << kMarginL - 6 << "\" y=\"" << kMarginT + 10
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y1) << "</text>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label_ << "</text>\n";
    out << "<text x=\"16\" y=\"" << kMarginT - 8 << "\" font-size=\"12\">" << y_label_
        << "</text>\n";

    double legend_y = kMarginT + 14;
    for (const auto& s : series_) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        double prev_y = 0;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (s.steps && i > 0)
                out << fmt(sx(s.x[i])) << "," << fmt(prev_y) << " ";
            prev_y = sy(s.y[i]);
            out << fmt(sx(s.x[i])) << "," << fmt(prev_y) << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << kMarginL + plot_w - 8 << "\" y=\"" << legend_y
            << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << s.color << "\">" << s.name
            << "</text>\n";
        legend_y += 14;
    }
    out << "</svg>\n";
}

// --- CSV emission -----------------------------------------------------------------

namespace {
std::string num(double v, int digits = 10) {
    if (std::isnan(v)) return "";
    return csv::format_double(v, digits);
}
} // namespace

void write_exclusion_report_csv(const std::string& path, const ExclusionReport& report,
                                const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"criterion", "before", "removed", "remaining"});
    for (const auto& row : report.rows)
        out.row({row.criterion, std::to_string(row.before), std::to_string(row.removed),
                 std::to_string(row.remaining)});
}

void write_parse_errors_csv(const std::string& path, const ParseReport& report,
                            const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"line", "message"});
    for (const auto& e : report.errors) out.row({std::to_string(e.line), e.message});
}

void write_descriptive_stats_csv(const std::string& path, const DescriptiveStats& stats,
                                 const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"block", "row", "female", "male", "entire_population"});
    out.row({"Number of individuals", "n", std::to_string(stats.n[0]), std::to_string(stats.n[1]),
             std::to_string(stats.n[2])});
    auto iqr_row = [&](const char* block, const std::array<double, 3>& median,
                       const std::array<double, 3>& q1, const std::array<double, 3>& q3) {
        std::vector<std::string> row{block, "Median (IQR)"};
        for (int c = 0; c < 3; ++c) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.1f (%.1f-%.1f)", median[c], q1[c], q3[c]);
            row.emplace_back(buf);
        }
        out.row(row);
    };
    iqr_row("Age at start of exposure", stats.entry_age_median, stats.entry_age_q1,
            stats.entry_age_q3);
    iqr_row("Exposure (years)", stats.exposure_median, stats.exposure_q1, stats.exposure_q3);
    for (const auto& block : stats.categories) {
        for (std::size_t lv = 0; lv < block.levels.size(); ++lv) {
            std::vector<std::string> row{block.factor, block.levels[lv]};
            for (int c = 0; c < 3; ++c) {
                const double pct = stats.n[c] ? 100.0 * static_cast<double>(block.counts[lv][c]) /
                                                    static_cast<double>(stats.n[c])
                                              : 0.0;
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%zu (%.1f%%)", block.counts[lv][c], pct);
                row.emplace_back(buf);
            }
            out.row(row);
        }
    }
}

void write_correlations_csv(const std::string& path, const DescriptiveStats& stats,
                            const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    std::vector<std::string> header{""};
    header.insert(header.end(), stats.correlation_names.begin(), stats.correlation_names.end());
    out.row(header);
    for (std::size_t i = 0; i < stats.correlation_names.size(); ++i) {
        std::vector<std::string> row{stats.correlation_names[i]};
        for (std::size_t j = 0; j < stats.correlation_names.size(); ++j)
            row.push_back(j > i ? num(stats.correlations[i][j], 4) : "");
        out.row(row);
    }
}

void write_survival_csv(const std::string& path,
                        const std::vector<std::pair<std::string, const StepSurvival*>>& curves,
                        const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"stratum", "age", "survival", "lower", "upper"});
    for (const auto& [name, curve] : curves) {
        const bool bands = curve->has_bands();
        for (std::size_t i = 0; i < curve->size(); ++i)
            out.row({name, num(curve->times[i]), num(curve->values[i]),
                     bands ? num(curve->lower[i]) : "", bands ? num(curve->upper[i]) : ""});
    }
}

void write_disfle_csv(const std::string& path,
                      const std::vector<std::pair<std::string, const DisfleCurve*>>& curves,
                      const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"stratum", "age", "disfle", "lower", "upper"});
    for (const auto& [name, curve] : curves) {
        const bool bands = !curve->lower.empty();
        for (std::size_t i = 0; i < curve->ages.size(); ++i)
            out.row({name, num(curve->ages[i]), num(curve->values[i]),
                     bands ? num(curve->lower[i]) : "", bands ? num(curve->upper[i]) : ""});
    }
}

void write_disfle_summary_csv(const std::string& path, const std::vector<DisfleSummaryRow>& rows,
                              const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"Age", "Sex", "Dis-FLE"});
    for (const auto& row : rows) out.row({std::to_string(row.age), row.group, num(row.value, 6)});
}

void write_coefficients_csv(const std::string& path, const CoxFit& fit,
                            const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"term", "level", "basis_index", "beta", "standard_error", "hazard_ratio", "p_value"});
    for (std::size_t c = 0; c < fit.columns.size(); ++c) {
        const DesignColumn& col = fit.columns[c];
        if (col.dropped) {
            out.row({col.term, col.label, col.basis_index >= 0 ? std::to_string(col.basis_index + 1)
                                                               : "",
                     "", "", "", ""});
            continue;
        }
        const int idx = fit.active_index[c];
        const double beta = fit.beta[idx];
        const double se = std::sqrt(std::max(0.0, fit.covariance(idx, idx)));
        out.row({col.term, col.label,
                 col.basis_index >= 0 ? std::to_string(col.basis_index + 1) : "", num(beta),
                 num(se), num(std::exp(beta)), num(wald_p_value(beta, se), 6)});
    }
}

void write_department_csv(const std::string& path, const CoxModel& model,
                          const std::string& manifest_hash) {
    const TermSpec* dep = model.spec.find_term("department");
    if (!dep) return;
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"department", "hazard_ratio", "standard_error", "p_value"});
    for (std::size_t lv = 0; lv < dep->levels.size(); ++lv) {
        if (lv == dep->reference) {
            out.row({dep->level_labels[lv], "1", "0", ""});
            continue;
        }
        // find the single constant column of this level
        for (std::size_t c = 0; c < model.fit.columns.size(); ++c) {
            const DesignColumn& col = model.fit.columns[c];
            if (col.term != "department" || col.level_index != static_cast<int>(lv)) continue;
            if (col.dropped) {
                out.row({dep->level_labels[lv], "", "", ""});
            } else {
                const int idx = model.fit.active_index[c];
                const double beta = model.fit.beta[idx];
                const double se =
                    std::sqrt(std::max(0.0, model.fit.covariance(idx, idx)));
                out.row({dep->level_labels[lv], num(std::exp(beta)), num(se),
                         num(wald_p_value(beta, se), 6)});
            }
            break;
        }
    }
}

void write_risk_group_csv(const std::string& path, const RiskGroupReport& report,
                          const std::string& manifest_hash) {
    csv::Writer out(path);
    out.comment("manifest " + manifest_hash);
    out.row({"bin", "count", "mean_linear_predictor", "age", "observed", "predicted"});
    for (const auto& bin : report.bins) {
        if (bin.count == 0) {
            out.row({bin.label, "0", "", "", "", ""});
            continue;
        }
        for (std::size_t i = 0; i < bin.observed.size(); ++i)
            out.row({bin.label, std::to_string(bin.count), num(bin.mean_lp, 6),
                     num(bin.observed.times[i]), num(bin.observed.values[i]),
                     num(bin.predicted.values[i])});
    }
}

void write_validation_markdown(const std::string& path, double c_statistic,
                               const RiskGroupReport& report, const std::string& manifest_hash) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write: " + path);
    out << "# Model validation\n\n";
    out << "manifest: `" << manifest_hash << "`\n\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "C-statistic (test set): %.4f (%.2f%%)\n\n", c_statistic,
                  100.0 * c_statistic);
    out << buf;
    out << "| linear-predictor bin | subjects | max |observed - predicted| |\n";
    out << "|---|---|---|\n";
    for (const auto& bin : report.bins) {
        if (bin.count == 0)
            out << "| " << bin.label << " | 0 | - |\n";
        else {
            std::snprintf(buf, sizeof(buf), "| %s | %zu | %.4f |\n", bin.label.c_str(), bin.count,
                          bin.max_gap);
            out << buf;
        }
    }
}

} // namespace disfle
