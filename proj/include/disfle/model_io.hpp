#pragma once

#include "disfle/cox.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace disfle {

constexpr const char* kToolVersion = "0.1.0";

/// Provenance record; the hash covers command, version, seeds, option values
/// and input content hashes (never output paths or timestamps), so reruns of
/// the same computation land in the same run directory.
struct RunManifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> fields; // ordered key/value
    std::string timestamp;                                   // informational only

    void add(const std::string& key, const std::string& value);
    void add_file(const std::string& key, const std::string& path); // content hash
    std::string hash() const;
    void write(const std::string& path) const;
};

/// Run directory root: DISFLE_RUN_ROOT or ./runs.
std::string run_root();
/// Creates (if needed) and returns <root>/<manifest hash>.
std::string make_run_directory(const RunManifest& manifest);

// --- cohort store -----------------------------------------------------------------

/// Flat columnar intermediate between pipeline commands: one row per retained
/// subject with its exposure interval and covariates. Ages round-trip exactly.
struct CohortStore {
    ExposureSet exposures;
    std::vector<int> birth_year; // aligned with exposures.rows
};

void save_store(const std::string& path, const CohortStore& store,
                const std::string& manifest_hash);
CohortStore load_store(const std::string& path);

// --- fitted-model artifact -----------------------------------------------------------

struct FitArtifact {
    CoxModel model;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.6;
    std::string manifest_hash;
};

void save_model(const std::string& path, const FitArtifact& artifact);
FitArtifact load_model(const std::string& path);

} // namespace disfle
