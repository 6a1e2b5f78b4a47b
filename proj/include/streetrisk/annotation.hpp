#pragma once

#include <streetrisk/csv.hpp>
#include <streetrisk/error.hpp>
#include <streetrisk/schema.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace streetrisk {

/// A single variable's value: a code (single-choice), a code set
/// (multi-choice, kept in schema order), or an ordinal. Raw ordinals are
/// integral; calibrated ones may be real-valued.
using AnnotationValue = std::variant<std::string, std::vector<std::string>, double>;

struct AnnotationRecord {
    std::string address_id;
    std::string annotator_id;
    std::string timestamp;
    std::vector<AnnotationValue> values; ///< aligned with schema.variables

    bool operator==(const AnnotationRecord&) const = default;

    double ordinal(std::size_t i) const { return std::get<double>(values.at(i)); }
    const std::string& code(std::size_t i) const { return std::get<std::string>(values.at(i)); }
    const std::vector<std::string>& codes(std::size_t i) const {
        return std::get<std::vector<std::string>>(values.at(i));
    }
};

/// A validation failure pinned to one field.
struct FieldError {
    std::string field;
    std::string message;
};

/// Checks a record against the schema. Ordinals must be integral unless
/// `allow_real_ordinals` is set (calibrated data).
inline std::optional<FieldError> check_record(const AnnotationRecord& r, const AnnotationSchema& schema,
                                              bool allow_real_ordinals = false) {
    if (r.address_id.empty()) return FieldError{"address_id", "must not be empty"};
    if (r.annotator_id.empty()) return FieldError{"annotator_id", "must not be empty"};
    if (r.values.size() != schema.variables.size())
        return FieldError{"values", "expected " + std::to_string(schema.variables.size()) + " values"};
    for (std::size_t i = 0; i < schema.variables.size(); ++i) {
        const auto& v = schema.variables[i];
        const auto& value = r.values[i];
        switch (v.kind) {
        case VariableKind::single_choice: {
            const auto* code = std::get_if<std::string>(&value);
            if (!code) return FieldError{v.name, "expected a single code"};
            if (!v.has_code(*code)) return FieldError{v.name, "unknown code '" + *code + "'"};
            break;
        }
        case VariableKind::multi_choice: {
            const auto* codes = std::get_if<std::vector<std::string>>(&value);
            if (!codes) return FieldError{v.name, "expected a set of codes"};
            if (codes->empty()) return FieldError{v.name, "must select at least one code"};
            int last = -1;
            for (const auto& c : *codes) {
                int idx = v.code_index(c);
                if (idx < 0) return FieldError{v.name, "unknown code '" + c + "'"};
                if (idx <= last) return FieldError{v.name, "codes must be distinct and in schema order"};
                last = idx;
            }
            break;
        }
        case VariableKind::ordinal: {
            const auto* x = std::get_if<double>(&value);
            if (!x || !std::isfinite(*x)) return FieldError{v.name, "expected a number"};
            if (!allow_real_ordinals && *x != std::floor(*x)) return FieldError{v.name, "expected an integer"};
            if (*x < v.min || *x > v.max)
                return FieldError{v.name, "out of range " + std::to_string(v.min) + ".." + std::to_string(v.max)};
            break;
        }
        }
    }
    return std::nullopt;
}

/// Sorts a code set into schema order and removes duplicates. Unknown codes
/// are kept at the end so validation can report them.
inline std::vector<std::string> canonical_codes(const VariableSpec& v, std::vector<std::string> codes) {
    std::stable_sort(codes.begin(), codes.end(), [&](const std::string& a, const std::string& b) {
        auto ia = static_cast<unsigned>(v.code_index(a));
        auto ib = static_cast<unsigned>(v.code_index(b));
        return ia < ib;
    });
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    return codes;
}

// ---------------------------------------------------------------------------
// CSV: address_id,annotator_id,timestamp,<one column per schema variable>

inline std::string annotation_header(const AnnotationSchema& schema) {
    std::string h = "address_id,annotator_id,timestamp";
    for (const auto& v : schema.variables) h += "," + v.name;
    return h;
}

inline std::string format_value(const AnnotationValue& value) {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* set = std::get_if<std::vector<std::string>>(&value)) {
        std::string out;
        for (std::size_t i = 0; i < set->size(); ++i) {
            if (i) out.push_back(';');
            out += (*set)[i];
        }
        return out;
    }
    return csv::format_number(std::get<double>(value));
}

inline std::string annotation_csv_line(const AnnotationRecord& r) {
    std::vector<std::string> fields{r.address_id, r.annotator_id, r.timestamp};
    for (const auto& v : r.values) fields.push_back(format_value(v));
    return csv::join(fields);
}

inline void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records,
                              const AnnotationSchema& schema) {
    out << annotation_header(schema) << '\n';
    for (const auto& r : records) out << annotation_csv_line(r) << '\n';
}

struct AnnotationIngest {
    std::vector<AnnotationRecord> records;
    std::vector<std::string> errors; ///< "line N: field: message"
};

/// Parses annotations.csv. When an (address, annotator) pair repeats, the
/// later row replaces the earlier one.
inline AnnotationIngest read_annotations(std::istream& in, const AnnotationSchema& schema,
                                         bool allow_real_ordinals = false) {
    AnnotationIngest out;
    std::string line;
    if (!csv::read_line(in, line)) throw InputError("annotations.csv: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != annotation_header(schema))
        throw InputError("annotations.csv: header mismatch, expected '" + annotation_header(schema) + "'");

    std::map<std::pair<std::string, std::string>, std::size_t> position;
    std::size_t row = 1;
    while (csv::read_line(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto f = csv::split_line(line);
        auto fail = [&](const std::string& field, const std::string& msg) {
            out.errors.push_back("line " + std::to_string(row) + ": " + field + ": " + msg);
        };
        if (f.size() != 3 + schema.variables.size()) {
            fail("row", "wrong field count");
            continue;
        }
        AnnotationRecord r{f[0], f[1], f[2], {}};
        bool ok = true;
        for (std::size_t i = 0; i < schema.variables.size() && ok; ++i) {
            const auto& v = schema.variables[i];
            const auto& text = f[3 + i];
            switch (v.kind) {
            case VariableKind::single_choice: r.values.emplace_back(text); break;
            case VariableKind::multi_choice: {
                std::vector<std::string> codes;
                std::size_t start = 0;
                while (start <= text.size() && !text.empty()) {
                    auto end = text.find(';', start);
                    if (end == std::string::npos) end = text.size();
                    codes.push_back(text.substr(start, end - start));
                    start = end + 1;
                }
                r.values.emplace_back(canonical_codes(v, std::move(codes)));
                break;
            }
            case VariableKind::ordinal: {
                auto x = csv::parse_double(text);
                if (!x) {
                    fail(v.name, "expected a number");
                    ok = false;
                } else {
                    r.values.emplace_back(*x);
                }
                break;
            }
            }
        }
        if (!ok) continue;
        if (auto err = check_record(r, schema, allow_real_ordinals)) {
            fail(err->field, err->message);
            continue;
        }
        auto key = std::make_pair(r.address_id, r.annotator_id);
        if (auto it = position.find(key); it != position.end()) out.records[it->second] = std::move(r);
        else {
            position.emplace(key, out.records.size());
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON: {"address_id", "annotator_id", "timestamp", "values": {name: value}}

inline nlohmann::json to_json(const AnnotationRecord& r, const AnnotationSchema& schema) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t i = 0; i < schema.variables.size() && i < r.values.size(); ++i) {
        const auto& name = schema.variables[i].name;
        std::visit(
            [&](const auto& x) {
                using X = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<X, double>) {
                    if (x == std::floor(x)) values[name] = static_cast<long long>(x);
                    else values[name] = x;
                } else {
                    values[name] = x;
                }
            },
            r.values[i]);
    }
    return {{"address_id", r.address_id},
            {"annotator_id", r.annotator_id},
            {"timestamp", r.timestamp},
            {"values", values}};
}

/// Parses and validates a submitted record. Errors name the offending field.
inline std::variant<AnnotationRecord, FieldError> annotation_from_json(const nlohmann::json& j,
                                                                       const AnnotationSchema& schema) {
    if (!j.is_object()) return FieldError{"body", "expected a JSON object"};
    AnnotationRecord r;
    for (const char* key : {"address_id", "annotator_id"}) {
        if (!j.contains(key) || !j[key].is_string()) return FieldError{key, "required string"};
    }
    r.address_id = j["address_id"].get<std::string>();
    r.annotator_id = j["annotator_id"].get<std::string>();
    if (j.contains("timestamp")) {
        if (!j["timestamp"].is_string()) return FieldError{"timestamp", "expected a string"};
        r.timestamp = j["timestamp"].get<std::string>();
    }
    if (!j.contains("values") || !j["values"].is_object()) return FieldError{"values", "required object"};
    const auto& values = j["values"];
    for (auto it = values.begin(); it != values.end(); ++it)
        if (!schema.find(it.key())) return FieldError{it.key(), "not a schema variable"};
    for (const auto& v : schema.variables) {
        if (!values.contains(v.name)) return FieldError{v.name, "missing"};
        const auto& x = values[v.name];
        switch (v.kind) {
        case VariableKind::single_choice:
            if (!x.is_string()) return FieldError{v.name, "expected a single code"};
            r.values.emplace_back(x.get<std::string>());
            break;
        case VariableKind::multi_choice: {
            if (!x.is_array()) return FieldError{v.name, "expected an array of codes"};
            std::vector<std::string> codes;
            for (const auto& c : x) {
                if (!c.is_string()) return FieldError{v.name, "expected an array of codes"};
                codes.push_back(c.get<std::string>());
            }
            r.values.emplace_back(canonical_codes(v, std::move(codes)));
            break;
        }
        case VariableKind::ordinal:
            if (!x.is_number()) return FieldError{v.name, "expected a number"};
            r.values.emplace_back(x.get<double>());
            break;
        }
    }
    if (auto err = check_record(r, schema)) return *err;
    return r;
}

} // namespace streetrisk
