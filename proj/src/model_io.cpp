#include "disfle/model_io.hpp"

#include "disfle/csv.hpp"
#include "disfle/errors.hpp"
#include "disfle/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace disfle {

void RunManifest::add(const std::string& key, const std::string& value) {
    fields.emplace_back(key, value);
}

void RunManifest::add_file(const std::string& key, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    fields.emplace_back(key, hex);
}

std::string RunManifest::hash() const {
    std::string canonical = command + "\x1f" + kToolVersion;
    for (const auto& [k, v] : fields) canonical += "\x1f" + k + "=" + v;
    const std::uint64_t h = fnv1a64(canonical.data(), canonical.size());
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void RunManifest::write(const std::string& path) const {
    nlohmann::json doc;
    doc["command"] = command;
    doc["version"] = kToolVersion;
    doc["hash"] = hash();
    doc["timestamp"] = timestamp;
    for (const auto& [k, v] : fields) doc["fields"][k] = v;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << doc.dump(2) << "\n";
}

std::string run_root() {
    if (const char* env = std::getenv("DISFLE_RUN_ROOT")) return env;
    return "runs";
}

std::string make_run_directory(const RunManifest& manifest) {
    const std::string dir = run_root() + "/" + manifest.hash();
    std::filesystem::create_directories(dir);
    return dir;
}

// --- cohort store --------------------------------------------------------------------

void save_store(const std::string& path, const CohortStore& store,
                const std::string& manifest_hash) {
    if (store.birth_year.size() != store.exposures.rows.size())
        throw DataError("store birth years misaligned with exposure rows");
    csv::Writer out(path);
    out.comment("disfle-store v1");
    out.comment("manifest " + manifest_hash);
    std::vector<std::string> header{"id", "birth_year", "entry_age", "exit_age", "event",
                                    "synthetic"};
    for (const auto& name : store.exposures.schema.names) header.push_back(name);
    out.row(header);
    for (std::size_t i = 0; i < store.exposures.rows.size(); ++i) {
        const Exposure& e = store.exposures.rows[i];
        std::vector<std::string> row{std::to_string(e.subject_id),
                                     std::to_string(store.birth_year[i]),
                                     csv::format_double(e.entry_age, 17),
                                     csv::format_double(e.exit_age, 17),
                                     e.event ? "1" : "0",
                                     e.synthetic ? "1" : "0"};
        for (double v : e.covariates) row.push_back(csv::format_double(v, 17));
        out.row(row);
    }
}

CohortStore load_store(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const char* required[] = {"id", "birth_year", "entry_age", "exit_age", "event", "synthetic"};
    for (const char* name : required)
        if (table.column(name) < 0)
            throw DataError("cohort store is missing column '" + std::string(name) + "'");
    CohortStore store;
    for (std::size_t c = 6; c < table.header.size(); ++c)
        store.exposures.schema.names.push_back(table.header[c]);
    for (const auto& row : table.rows) {
        Exposure e;
        e.subject_id = std::stoll(row.fields[0]);
        store.birth_year.push_back(std::stoi(row.fields[1]));
        e.entry_age = std::stod(row.fields[2]);
        e.exit_age = std::stod(row.fields[3]);
        e.event = row.fields[4] == "1";
        e.synthetic = row.fields[5] == "1";
        for (std::size_t c = 6; c < row.fields.size(); ++c)
            e.covariates.push_back(std::stod(row.fields[c]));
        store.exposures.rows.push_back(std::move(e));
    }
    return store;
}

// --- fitted-model artifact --------------------------------------------------------------

namespace {

nlohmann::json spec_to_json(const ModelSpec& spec) {
    nlohmann::json doc;
    doc["df"] = spec.df;
    doc["grid"] = {{"start", spec.grid_start}, {"stop", spec.grid_stop}, {"step", spec.grid_step}};
    doc["terms"] = nlohmann::json::array();
    for (const auto& t : spec.terms) {
        nlohmann::json term;
        term["name"] = t.name;
        term["age_dependent"] = t.age_dependent;
        term["levels"] = t.levels;
        term["level_labels"] = t.level_labels;
        term["reference"] = t.reference;
        doc["terms"].push_back(term);
    }
    doc["interactions"] = nlohmann::json::array();
    for (const auto& i : spec.interactions)
        doc["interactions"].push_back({i.term_a, i.term_b});
    return doc;
}

ModelSpec spec_from_json(const nlohmann::json& doc) {
    ModelSpec spec;
    spec.df = doc.at("df").get<int>();
    spec.grid_start = doc.at("grid").at("start").get<double>();
    spec.grid_stop = doc.at("grid").at("stop").get<double>();
    spec.grid_step = doc.at("grid").at("step").get<double>();
    for (const auto& term : doc.at("terms")) {
        TermSpec t;
        t.name = term.at("name").get<std::string>();
        t.age_dependent = term.at("age_dependent").get<bool>();
        t.levels = term.at("levels").get<std::vector<double>>();
        t.level_labels = term.at("level_labels").get<std::vector<std::string>>();
        t.reference = term.at("reference").get<std::size_t>();
        spec.terms.push_back(std::move(t));
    }
    for (const auto& i : doc.at("interactions"))
        spec.interactions.push_back({i.at(0).get<std::string>(), i.at(1).get<std::string>()});
    return spec;
}

} // namespace

void save_model(const std::string& path, const FitArtifact& artifact) {
    const CoxModel& model = artifact.model;
    nlohmann::json doc;
    doc["manifest"] = artifact.manifest_hash;
    doc["split_seed"] = artifact.split_seed;
    doc["train_fraction"] = artifact.train_fraction;
    doc["spec"] = spec_to_json(model.spec);
    doc["schema"] = model.schema.names;
    doc["basis"] = {{"boundary", {model.basis.boundary_lo(), model.basis.boundary_hi()}},
                    {"interior", model.basis.interior_knots()}};

    nlohmann::json columns = nlohmann::json::array();
    for (const auto& c : model.fit.columns)
        columns.push_back({{"label", c.label},
                           {"term", c.term},
                           {"level_index", c.level_index},
                           {"basis_index", c.basis_index},
                           {"dropped", c.dropped}});
    doc["columns"] = columns;

    doc["beta"] = std::vector<double>(model.fit.beta.data(),
                                      model.fit.beta.data() + model.fit.beta.size());
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.fit.covariance.rows(); ++i) {
        std::vector<double> covariance_row(static_cast<std::size_t>(model.fit.covariance.cols()));
        for (Eigen::Index j = 0; j < model.fit.covariance.cols(); ++j)
            covariance_row[static_cast<std::size_t>(j)] = model.fit.covariance(i, j);
        cov.push_back(covariance_row);
    }
    doc["covariance"] = cov;
    doc["baseline"] = {{"times", model.fit.baseline.times},
                       {"increments", model.fit.baseline.increments}};
    doc["convergence"] = {{"iterations", model.fit.convergence.iterations},
                          {"loglik", model.fit.convergence.final_loglik},
                          {"score_max", model.fit.convergence.score_max}};

    std::ofstream out(path);
    if (!out) throw DataError("cannot write model artifact: " + path);
    out << doc.dump() << "\n";
}

FitArtifact load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model artifact: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }

    ModelSpec spec = spec_from_json(doc.at("spec"));
    const auto boundary = doc.at("basis").at("boundary").get<std::vector<double>>();
    auto interior = doc.at("basis").at("interior").get<std::vector<double>>();
    NaturalSplineBasis basis(boundary.at(0), boundary.at(1), std::move(interior));
    CovariateSchema schema{doc.at("schema").get<std::vector<std::string>>()};

    CoxFit fit;
    for (const auto& c : doc.at("columns"))
        fit.columns.push_back({c.at("label").get<std::string>(), c.at("term").get<std::string>(),
                               c.at("level_index").get<int>(), c.at("basis_index").get<int>(),
                               c.at("dropped").get<bool>()});
    fit.active_index.assign(fit.columns.size(), -1);
    for (std::size_t c = 0; c < fit.columns.size(); ++c)
        if (!fit.columns[c].dropped) {
            fit.active_index[c] = static_cast<int>(fit.active.size());
            fit.active.push_back(c);
        }

    const auto beta = doc.at("beta").get<std::vector<double>>();
    fit.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                 static_cast<Eigen::Index>(beta.size()));
    const auto& cov = doc.at("covariance");
    fit.covariance.resize(static_cast<Eigen::Index>(cov.size()),
                          static_cast<Eigen::Index>(cov.size()));
    for (std::size_t i = 0; i < cov.size(); ++i) {
        const auto covariance_row = cov[i].get<std::vector<double>>();
        for (std::size_t j = 0; j < covariance_row.size(); ++j)
            fit.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                covariance_row[j];
    }
    fit.baseline.times = doc.at("baseline").at("times").get<std::vector<double>>();
    fit.baseline.increments = doc.at("baseline").at("increments").get<std::vector<double>>();
    fit.baseline.cumulative.resize(fit.baseline.times.size());
    double running = 0.0;
    for (std::size_t i = 0; i < fit.baseline.increments.size(); ++i) {
        running += fit.baseline.increments[i];
        fit.baseline.cumulative[i] = running;
    }
    fit.convergence.iterations = doc.at("convergence").at("iterations").get<int>();
    fit.convergence.final_loglik = doc.at("convergence").at("loglik").get<double>();
    fit.convergence.score_max = doc.at("convergence").at("score_max").get<double>();
    fit.convergence.converged = true;

    FitArtifact artifact{CoxModel{std::move(spec), std::move(basis), std::move(schema),
                                  std::move(fit)},
                         doc.at("split_seed").get<std::uint64_t>(),
                         doc.at("train_fraction").get<double>(),
                         doc.at("manifest").get<std::string>()};
    return artifact;
}

} // namespace disfle
