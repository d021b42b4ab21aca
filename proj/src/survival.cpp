#include "disfle/survival.hpp"

#include "disfle/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace disfle {

EpisodeSet split_episodes(const ExposureSet& exposures, const std::vector<double>& grid) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1]) throw ConfigError("episode grid must be strictly increasing");

    EpisodeSet set;
    set.schema = exposures.schema;
    set.rows.reserve(exposures.rows.size() * 2);
    for (const auto& x : exposures.rows) {
        double start = x.entry_age;
        auto it = std::upper_bound(grid.begin(), grid.end(), x.entry_age);
        for (; it != grid.end() && *it < x.exit_age; ++it) {
            set.rows.push_back({x.subject_id, start, *it, false, x.covariates});
            start = *it;
        }
        set.rows.push_back({x.subject_id, start, x.exit_age, x.event, x.covariates});
    }
    return set;
}

ExposureSet merge_episodes(const EpisodeSet& episodes) {
    std::map<std::int64_t, Exposure> merged;
    for (const auto& e : episodes.rows) {
        auto [it, inserted] = merged.try_emplace(e.subject_id);
        Exposure& x = it->second;
        if (inserted) {
            x.subject_id = e.subject_id;
            x.entry_age = e.start_age;
            x.exit_age = e.stop_age;
            x.event = e.event;
            x.covariates = e.covariates;
        } else {
            x.entry_age = std::min(x.entry_age, e.start_age);
            x.exit_age = std::max(x.exit_age, e.stop_age);
            x.event = x.event || e.event;
        }
    }
    ExposureSet out;
    out.schema = episodes.schema;
    out.rows.reserve(merged.size());
    for (auto& [id, x] : merged) out.rows.push_back(std::move(x));
    return out;
}

// --- model specification -----------------------------------------------------

std::vector<double> ModelSpec::grid() const {
    std::vector<double> g;
    for (double a = grid_start; a <= grid_stop + 1e-9; a += grid_step) g.push_back(a);
    return g;
}

const TermSpec* ModelSpec::find_term(const std::string& name) const {
    for (const auto& t : terms)
        if (t.name == name) return &t;
    return nullptr;
}

void ModelSpec::validate(const CovariateSchema& schema) const {
    for (const auto& t : terms) {
        if (schema.index(t.name) < 0)
            throw ConfigError("model term '" + t.name + "' is not a covariate in the data");
        if (t.levels.size() != t.level_labels.size() || t.levels.size() < 2)
            throw ConfigError("model term '" + t.name + "' needs at least two labeled levels");
        if (t.reference >= t.levels.size())
            throw ConfigError("model term '" + t.name + "' has an out-of-range reference level");
        for (const auto& other : terms)
            if (&other != &t && other.name == t.name)
                throw ConfigError("duplicate model term '" + t.name + "'");
    }
    for (const auto& i : interactions) {
        if (!find_term(i.term_a) || !find_term(i.term_b))
            throw ConfigError("interaction references unknown term: " + i.term_a + "*" + i.term_b);
        if (i.term_a == i.term_b)
            throw ConfigError("interaction of a term with itself: " + i.term_a);
    }
    if (df < 2) throw ConfigError("model df must be at least 2");
    if (!(grid_start < grid_stop) || grid_step <= 0)
        throw ConfigError("model grid must satisfy start < stop with a positive step");
}

namespace {

TermSpec categorical(const std::string& name, int n_levels, bool age_dependent) {
    TermSpec t;
    t.name = name;
    t.age_dependent = age_dependent;
    for (int v = 0; v < n_levels; ++v) {
        t.levels.push_back(static_cast<double>(v));
        t.level_labels.push_back(std::to_string(v));
    }
    t.reference = 0;
    return t;
}

} // namespace

ModelSpec ModelSpec::standard() {
    ModelSpec spec;
    spec.terms.push_back(categorical("obesity", 3, true));
    spec.terms.push_back(categorical("alcohol", 3, true));
    spec.terms.push_back(categorical("smoking", 3, true));

    TermSpec sex;
    sex.name = "sex";
    sex.age_dependent = true;
    sex.levels = {0.0, 1.0};
    sex.level_labels = {"F", "M"};
    sex.reference = 0;
    spec.terms.push_back(std::move(sex));

    TermSpec dep;
    dep.name = "department";
    dep.age_dependent = false;
    for (int d = 1; d <= 96; ++d) {
        dep.levels.push_back(static_cast<double>(d));
        char buf[4];
        std::snprintf(buf, sizeof(buf), "%02d", d);
        dep.level_labels.push_back(buf);
    }
    dep.reference = 77; // department 78
    spec.terms.push_back(std::move(dep));

    spec.terms.push_back(categorical("immigration", 4, false));
    spec.terms.push_back(categorical("education", 4, false));

    spec.interactions = {{"obesity", "alcohol"}, {"obesity", "smoking"}, {"alcohol", "smoking"},
                         {"sex", "obesity"},     {"sex", "alcohol"},     {"sex", "smoking"}};
    return spec;
}

ModelSpec ModelSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model spec: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    ModelSpec spec;
    if (doc.value("standard_terms", false)) spec = standard();
    spec.df = doc.value("df", spec.df);
    if (doc.contains("grid")) {
        const auto& g = doc["grid"];
        spec.grid_start = g.value("start", spec.grid_start);
        spec.grid_stop = g.value("stop", spec.grid_stop);
        spec.grid_step = g.value("step", spec.grid_step);
    }
    if (doc.contains("interior_knots"))
        for (const auto& k : doc["interior_knots"]) spec.interior_knots.push_back(k.get<double>());
    if (doc.contains("terms")) {
        spec.terms.clear();
        for (const auto& item : doc["terms"]) {
            TermSpec t;
            t.name = item.at("name").get<std::string>();
            t.age_dependent = item.value("age_dependent", false);
            if (item.contains("levels")) {
                for (const auto& lv : item["levels"]) {
                    if (lv.is_string()) {
                        t.level_labels.push_back(lv.get<std::string>());
                        t.levels.push_back(static_cast<double>(t.levels.size()));
                    } else {
                        t.levels.push_back(lv.get<double>());
                        t.level_labels.push_back(nlohmann::to_string(lv));
                    }
                }
            } else {
                const int n = item.at("n_levels").get<int>();
                t = categorical(t.name, n, t.age_dependent);
            }
            t.reference = item.value("reference", 0u);
            spec.terms.push_back(std::move(t));
        }
    }
    if (doc.contains("interactions")) {
        spec.interactions.clear();
        for (const auto& pair : doc["interactions"])
            spec.interactions.push_back(
                {pair.at(0).get<std::string>(), pair.at(1).get<std::string>()});
    }
    return spec;
}

// --- design matrix --------------------------------------------------------------

namespace {

struct ColumnPlan {
    // one filler per column; captures term indices and levels
    enum class Kind { age_dependent, constant, interaction } kind;
    int covariate_a = -1; // schema index
    int covariate_b = -1;
    double level_a = 0.0;
    double level_b = 0.0;
    int basis_index = -1;
};

} // namespace

std::size_t DesignMatrix::n_events() const {
    std::size_t n = 0;
    for (auto e : event) n += e;
    return n;
}

std::vector<std::size_t> DesignMatrix::active_columns() const {
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (!columns[c].dropped) idx.push_back(c);
    return idx;
}

DesignMatrix build_design(const EpisodeSet& episodes, const ModelSpec& spec,
                          const NaturalSplineBasis& basis) {
    spec.validate(episodes.schema);
    const int df = basis.df();

    std::vector<ColumnPlan> plan;
    DesignMatrix design;
    for (const auto& t : spec.terms) {
        const int cov = episodes.schema.index(t.name);
        for (std::size_t lv = 0; lv < t.levels.size(); ++lv) {
            if (lv == t.reference) continue;
            if (t.age_dependent) {
                for (int k = 0; k < df; ++k) {
                    plan.push_back({ColumnPlan::Kind::age_dependent, cov, -1, t.levels[lv], 0.0, k});
                    design.columns.push_back({t.name + "=" + t.level_labels[lv] + ":ns" +
                                                  std::to_string(k + 1),
                                              t.name, static_cast<int>(lv), k, false});
                }
            } else {
                plan.push_back({ColumnPlan::Kind::constant, cov, -1, t.levels[lv], 0.0, -1});
                design.columns.push_back(
                    {t.name + "=" + t.level_labels[lv], t.name, static_cast<int>(lv), -1, false});
            }
        }
    }
    for (const auto& inter : spec.interactions) {
        const TermSpec& a = *spec.find_term(inter.term_a);
        const TermSpec& b = *spec.find_term(inter.term_b);
        const int cov_a = episodes.schema.index(a.name);
        const int cov_b = episodes.schema.index(b.name);
        for (std::size_t la = 0; la < a.levels.size(); ++la) {
            if (la == a.reference) continue;
            for (std::size_t lb = 0; lb < b.levels.size(); ++lb) {
                if (lb == b.reference) continue;
                plan.push_back({ColumnPlan::Kind::interaction, cov_a, cov_b, a.levels[la],
                                b.levels[lb], -1});
                design.columns.push_back({a.name + "=" + a.level_labels[la] + "*" + b.name + "=" +
                                              b.level_labels[lb],
                                          a.name + "*" + b.name,
                                          static_cast<int>(la * b.levels.size() + lb), -1, false});
            }
        }
    }

    // deterministic row order
    std::vector<std::size_t> order(episodes.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const Episode& a = episodes.rows[i];
        const Episode& b = episodes.rows[j];
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        return a.start_age < b.start_age;
    });

    const std::size_t p = design.columns.size();
    const std::size_t n = episodes.rows.size();
    design.n_rows = n;
    design.values.assign(n * p, 0.0);
    design.start.resize(n);
    design.stop.resize(n);
    design.event.resize(n);
    design.subject_id.resize(n);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
        const Episode& ep = episodes.rows[order[static_cast<std::size_t>(r)]];
        const auto row = static_cast<std::size_t>(r);
        design.start[row] = ep.start_age;
        design.stop[row] = ep.stop_age;
        design.event[row] = ep.event ? 1 : 0;
        design.subject_id[row] = ep.subject_id;
        double* out = design.values.data() + row * p;
        Eigen::VectorXd basis_values;
        bool basis_ready = false;
        for (std::size_t c = 0; c < p; ++c) {
            const ColumnPlan& cp = plan[c];
            switch (cp.kind) {
            case ColumnPlan::Kind::age_dependent:
                if (ep.covariates[cp.covariate_a] == cp.level_a) {
                    if (!basis_ready) {
                        basis_values = basis.eval(ep.start_age);
                        basis_ready = true;
                    }
                    out[c] = basis_values[cp.basis_index];
                }
                break;
            case ColumnPlan::Kind::constant:
                out[c] = ep.covariates[cp.covariate_a] == cp.level_a ? 1.0 : 0.0;
                break;
            case ColumnPlan::Kind::interaction:
                out[c] = (ep.covariates[cp.covariate_a] == cp.level_a &&
                          ep.covariates[cp.covariate_b] == cp.level_b)
                             ? 1.0
                             : 0.0;
                break;
            }
        }
    }

    // flag all-zero columns (level absent from the data)
    for (std::size_t c = 0; c < p; ++c) {
        bool any = false;
        for (std::size_t r = 0; r < n && !any; ++r) any = design.values[r * p + c] != 0.0;
        design.columns[c].dropped = !any;
    }
    return design;
}

std::vector<double> profile_row(const ModelSpec& spec, const NaturalSplineBasis& basis,
                                const CovariateSchema& schema,
                                const std::vector<double>& covariates, double age,
                                const std::vector<DesignColumn>* check_dropped) {
    EpisodeSet one;
    one.schema = schema;
    one.rows.push_back({0, age, age + 1.0, false, covariates});
    // reuse the column plan by building a one-row design
    DesignMatrix d = build_design(one, spec, basis);
    std::vector<double> row(d.values.begin(), d.values.begin() + static_cast<std::ptrdiff_t>(d.n_cols()));
    if (check_dropped) {
        for (std::size_t c = 0; c < row.size(); ++c)
            if (row[c] != 0.0 && (*check_dropped)[c].dropped)
                throw DataError("profile activates level unseen in training data: " +
                                (*check_dropped)[c].label);
    }
    return row;
}

} // namespace disfle
