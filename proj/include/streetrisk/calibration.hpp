#pragma once

#include <streetrisk/annotation.hpp>
#include <streetrisk/schema.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace streetrisk {

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0; ///< population standard deviation

    static Moments of(std::span<const double> xs) {
        Moments m;
        m.count = xs.size();
        if (xs.empty()) return m;
        double sum = 0.0;
        for (double x : xs) sum += x;
        m.mean = sum / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(xs.size()));
        return m;
    }
};

/// Affine map taking one annotator's moments onto the pooled moments.
struct AffineCalibration {
    Moments own;
    Moments pooled;
    bool pass_through = false;

    bool identity() const {
        constexpr double eps = 1e-12;
        return std::fabs(own.mean - pooled.mean) <= eps * std::max(1.0, std::fabs(pooled.mean)) &&
               std::fabs(own.sd - pooled.sd) <= eps * std::max(1.0, pooled.sd);
    }

    double apply(double x, double lo, double hi) const {
        if (pass_through || identity()) return x;
        double y = own.sd > 0.0 ? (x - own.mean) / own.sd * pooled.sd + pooled.mean : x - own.mean + pooled.mean;
        return std::clamp(y, lo, hi);
    }
};

struct CalibrationOptions {
    /// Addresses whose records do not contribute to the moment estimates
    /// (the common agreement set). Their records are still transformed.
    std::set<std::string> moment_exclusions;
    /// Clamp calibrated values to the variable's ordinal range.
    bool clamp = true;
};

struct CalibrationResult {
    std::vector<AnnotationRecord> records;
    /// maps[variable][annotator]
    std::map<std::string, std::map<std::string, AffineCalibration>> maps;
    std::vector<std::string> warnings;
};

/// Moment-matches every annotator's ordinal ratings to the pooled mean and
/// population standard deviation per variable. Choice variables pass through.
/// An annotator with a single rating for a variable passes through with a
/// warning.
inline CalibrationResult calibrate_annotators(std::span<const AnnotationRecord> annotations,
                                              const AnnotationSchema& schema, const CalibrationOptions& options = {}) {
    CalibrationResult out;
    out.records.assign(annotations.begin(), annotations.end());

    for (std::size_t vi = 0; vi < schema.variables.size(); ++vi) {
        const auto& v = schema.variables[vi];
        if (v.kind != VariableKind::ordinal) continue;

        std::map<std::string, std::vector<double>> by_annotator;
        std::vector<double> pooled_values;
        for (const auto& r : annotations) {
            if (options.moment_exclusions.count(r.address_id)) continue;
            by_annotator[r.annotator_id].push_back(r.ordinal(vi));
            pooled_values.push_back(r.ordinal(vi));
        }
        for (const auto& r : annotations) by_annotator.try_emplace(r.annotator_id);

        const Moments pooled = Moments::of(pooled_values);
        auto& maps = out.maps[v.name];
        for (const auto& [annotator, values] : by_annotator) {
            AffineCalibration cal{Moments::of(values), pooled, false};
            if (cal.own.count < 2 || pooled.count < 2) {
                cal.pass_through = true;
                out.warnings.push_back("annotator '" + annotator + "' has " + std::to_string(cal.own.count) +
                                       " rating(s) for '" + v.name + "'; passed through uncalibrated");
            }
            maps.emplace(annotator, cal);
        }
        for (auto& r : out.records) {
            const auto& cal = maps.at(r.annotator_id);
            r.values[vi] = options.clamp ? cal.apply(r.ordinal(vi), v.min, v.max)
                                         : cal.apply(r.ordinal(vi), -std::numeric_limits<double>::infinity(),
                                                     std::numeric_limits<double>::infinity());
        }
    }
    return out;
}

} // namespace streetrisk
