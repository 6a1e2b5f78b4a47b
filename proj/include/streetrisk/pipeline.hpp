#pragma once

#include <streetrisk/annotation.hpp>
#include <streetrisk/bootstrap.hpp>
#include <streetrisk/calibration.hpp>
#include <streetrisk/dataset.hpp>
#include <streetrisk/features.hpp>
#include <streetrisk/kappa.hpp>
#include <streetrisk/portfolio.hpp>
#include <streetrisk/schema.hpp>
#include <streetrisk/synth.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace streetrisk {

namespace fs = std::filesystem;

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    return in;
}

inline nlohmann::json read_json_file(const fs::path& path) {
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("'" + path.string() + "': " + e.what());
    }
}

inline std::vector<std::string> read_id_list(const fs::path& path) {
    auto in = open_in(path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

/// Schema from `path` when it exists, else the default schema.
inline AnnotationSchema load_schema(const fs::path& path) {
    if (!path.empty() && fs::exists(path)) return schema_from_json(read_json_file(path));
    return default_schema();
}

inline std::vector<AnnotationRecord> load_annotations(const fs::path& path, const AnnotationSchema& schema,
                                                      bool allow_real_ordinals = false) {
    auto in = open_in(path);
    auto ingest = read_annotations(in, schema, allow_real_ordinals);
    if (!ingest.errors.empty())
        throw InputError("'" + path.string() + "': " + std::to_string(ingest.errors.size()) +
                         " invalid rows, first: " + ingest.errors.front());
    return std::move(ingest.records);
}

inline std::vector<AnnotationRecord> filter_annotators(std::vector<AnnotationRecord> records,
                                                       const std::vector<std::string>& keep) {
    if (keep.empty()) return records;
    std::set<std::string> ids(keep.begin(), keep.end());
    std::erase_if(records, [&](const AnnotationRecord& r) { return !ids.count(r.annotator_id); });
    return records;
}

/// Calibrates (optionally) and simplifies the retained annotators' ratings.
/// Records on the common set do not contribute to calibration moments.
inline FeatureTable features_from_annotations(const std::vector<AnnotationRecord>& annotations,
                                              const AnnotationSchema& schema, const VariablesConfig& vars,
                                              const std::vector<std::string>& common_set) {
    auto retained = filter_annotators(annotations, vars.retained_annotators);
    if (vars.calibrate) {
        CalibrationOptions opt;
        opt.moment_exclusions.insert(common_set.begin(), common_set.end());
        retained = calibrate_annotators(retained, schema, opt).records;
    }
    return simplify_features(retained, schema);
}

/// Everything the modeling steps need from a fixture directory.
struct FixtureInputs {
    AnnotationSchema schema;
    PolicyIngest policies;
    AddressRegistry registry;
    std::vector<AnnotationRecord> annotations;
    std::vector<std::string> common_set;
};

/// Reads policies.csv, addresses.csv, annotations.csv and the optional
/// schema.json / common.txt from `dir`. `annotations` overrides the
/// annotation file (for pre-calibrated input).
inline FixtureInputs load_fixture_dir(const fs::path& dir, const fs::path& annotations = {},
                                      bool allow_real_ordinals = false) {
    FixtureInputs in;
    in.schema = load_schema(dir / "schema.json");
    {
        auto f = open_in(dir / "policies.csv");
        in.policies = ingest_policies(f);
    }
    {
        auto f = open_in(dir / "addresses.csv");
        auto ingest = ingest_addresses(f);
        if (!ingest.rejections.empty())
            throw InputError("addresses.csv: " + std::to_string(ingest.rejections.size()) + " rejected rows, first at line " +
                             std::to_string(ingest.rejections.front().row) + ": " + ingest.rejections.front().reason);
        in.registry = std::move(ingest.registry);
    }
    in.annotations =
        load_annotations(annotations.empty() ? dir / "annotations.csv" : annotations, in.schema, allow_real_ordinals);
    if (fs::exists(dir / "common.txt")) in.common_set = read_id_list(dir / "common.txt");
    return in;
}

inline Dataset build_dataset(const FixtureInputs& in, const VariablesConfig& vars, Provenance provenance) {
    const FeatureTable features = features_from_annotations(in.annotations, in.schema, vars, in.common_set);
    return join_dataset(in.policies.records, in.registry, features, provenance);
}

} // namespace streetrisk
