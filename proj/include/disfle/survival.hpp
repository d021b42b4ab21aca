#pragma once

#include "disfle/cohort.hpp"
#include "disfle/spline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace disfle {

/// Counting-process unit: a left-open age interval (start, stop] with an
/// event flag; covariates are constant per subject and copied verbatim.
struct Episode {
    std::int64_t subject_id = 0;
    double start_age = 0.0;
    double stop_age = 0.0;
    bool event = false;
    std::vector<double> covariates;
};

struct EpisodeSet {
    CovariateSchema schema;
    std::vector<Episode> rows;
};

/// Partitions each exposure at the interior grid points it straddles; the
/// event flag stays on the final child only.
EpisodeSet split_episodes(const ExposureSet& exposures, const std::vector<double>& grid);

/// Rebuilds one exposure interval per subject from its episodes (used to
/// check the split round-trip).
ExposureSet merge_episodes(const EpisodeSet& episodes);

// --- model specification -----------------------------------------------------

struct TermSpec {
    std::string name; // covariate name in the schema
    bool age_dependent = false;
    std::vector<double> levels;             // covariate values, reference first excluded nowhere
    std::vector<std::string> level_labels;  // printable labels, aligned with levels
    std::size_t reference = 0;              // index into levels
};

struct InteractionSpec {
    std::string term_a;
    std::string term_b;
};

struct ModelSpec {
    std::vector<TermSpec> terms;
    std::vector<InteractionSpec> interactions; // constant offsets, non-reference combos
    int df = 8;
    double grid_start = 50.0;
    double grid_stop = 100.0;
    double grid_step = 2.0;
    std::vector<double> interior_knots; // empty: place at event-age quantiles

    std::vector<double> grid() const;
    const TermSpec* find_term(const std::string& name) const;
    void validate(const CovariateSchema& schema) const;

    /// Age-dependent sex and behavior effects, constant department and
    /// commune-proxy effects, behavior and sex-by-behavior interactions.
    static ModelSpec standard();
    static ModelSpec from_json_file(const std::string& path);
};

// --- design matrix -------------------------------------------------------------

struct DesignColumn {
    std::string label;
    std::string term;    // owning term name, or "termA*termB" for interactions
    int level_index = -1;
    int basis_index = -1; // -1 for constant columns
    bool dropped = false; // level absent from the data; removed before fitting
};

struct DesignMatrix {
    std::vector<DesignColumn> columns;
    std::size_t n_rows = 0;
    std::vector<double> values; // row-major, n_rows x columns.size()
    std::vector<double> start, stop;
    std::vector<std::uint8_t> event;
    std::vector<std::int64_t> subject_id;

    std::size_t n_cols() const { return columns.size(); }
    double value(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
    std::size_t n_events() const;
    std::vector<std::size_t> active_columns() const; // indices with dropped == false
};

/// Builds the design: age-dependent terms expand to indicator x basis columns
/// evaluated at the episode's start age; constant terms and interactions
/// expand to plain indicators. Rows are ordered by (subject id, start age).
DesignMatrix build_design(const EpisodeSet& episodes, const ModelSpec& spec,
                          const NaturalSplineBasis& basis);

/// Single design row for a covariate profile at a given age; used by
/// prediction and the hazard-ratio curves. Throws DataError if the profile
/// activates a column that was dropped at build time.
std::vector<double> profile_row(const ModelSpec& spec, const NaturalSplineBasis& basis,
                                const CovariateSchema& schema,
                                const std::vector<double>& covariates, double age,
                                const std::vector<DesignColumn>* check_dropped = nullptr);

} // namespace disfle
