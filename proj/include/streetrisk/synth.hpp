#pragma once

#include <streetrisk/annotation.hpp>
#include <streetrisk/campaign.hpp>
#include <streetrisk/error.hpp>
#include <streetrisk/portfolio.hpp>
#include <streetrisk/schema.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace streetrisk {

/// Planted effect of one simplified variable: the true indicator is 1 with
/// probability `prevalence` and multiplies the claim frequency by
/// `relative_risk`.
struct PlantedEffect {
    double prevalence = 0.5;
    double relative_risk = 1.0;
};

/// Annotator noise. `bias` and `dispersion` are in half-range units of each
/// ordinal scale (1 = one step on a 1-3 scale); `scale` stretches around the
/// scale centre; `error_rate` is the flip probability on choice variables.
struct SynthAnnotator {
    std::string id;
    double bias = 0.0;
    double scale = 1.0;
    double dispersion = 0.0;
    double error_rate = 0.0;
    bool retained = true;
};

struct SynthConfig {
    std::size_t n_policies = 20000;
    std::uint64_t seed = 20190601;
    double mean_frequency = 0.05;
    double full_year_share = 0.5;        ///< mass at exposure 1.0
    double partial_exposure_min = 1.0 / 12.0; ///< partial terms ~ U(min, 1)
    std::size_t n_foreign = 40;
    std::size_t n_unresolved = 89;
    double latent_sd = 0.7;        ///< sd of the log-frequency from non-house risk factors
    double model_b_quality = 0.8;  ///< correlation of model-B log score with that component
    std::size_t common_size = 500;
    std::string domestic_country = "PL";
    bool write_images = false;
    /// Keyed by the retained schema variables.
    std::map<std::string, PlantedEffect> effects{
        {"neighbourhood", {0.40, 0.65}}, {"sv_quality", {0.60, 0.70}},     {"house_type", {0.35, 0.65}},
        {"house_age", {0.30, 1.50}},     {"house_condition", {0.35, 0.70}},
    };
    std::vector<SynthAnnotator> annotators{
        {"ann1", 0.0, 1.0, 0.25, 0.08, true},  {"ann2", 0.8, 1.0, 0.30, 0.10, true},
        {"ann3", -0.8, 1.0, 0.30, 0.08, true}, {"ann4", 0.3, 1.0, 0.35, 0.12, true},
        {"ann5", 0.3, 0.7, 0.80, 0.35, false}, {"ann6", -0.4, 1.3, 0.90, 0.40, false},
    };

    void validate() const {
        if (n_policies == 0) throw InputError("synth: n_policies must be positive");
        if (!(mean_frequency > 0.0 && mean_frequency < 1.0)) throw InputError("synth: mean frequency must be in (0, 1)");
        if (!(full_year_share >= 0.0 && full_year_share <= 1.0)) throw InputError("synth: full_year_share must be in [0, 1]");
        if (!(partial_exposure_min > 0.0 && partial_exposure_min <= 1.0))
            throw InputError("synth: partial_exposure_min must be in (0, 1]");
        if (n_foreign + n_unresolved >= n_policies) throw InputError("synth: too many excluded addresses");
        if (!(latent_sd >= 0.0)) throw InputError("synth: latent_sd must be nonnegative");
        if (!(model_b_quality >= 0.0 && model_b_quality <= 1.0)) throw InputError("synth: model_b_quality must be in [0, 1]");
        for (const auto& [name, e] : effects) {
            if (!(e.prevalence > 0.0 && e.prevalence < 1.0)) throw InputError("synth: prevalence of '" + name + "' must be in (0, 1)");
            if (!(e.relative_risk > 0.0)) throw InputError("synth: relative risk of '" + name + "' must be positive");
        }
        if (annotators.empty()) throw InputError("synth: at least one annotator required");
        bool any_retained = false;
        for (const auto& a : annotators) {
            any_retained |= a.retained;
            if (!(a.error_rate >= 0.0 && a.error_rate <= 1.0)) throw InputError("synth: error_rate must be in [0, 1]");
            if (!(a.dispersion >= 0.0)) throw InputError("synth: dispersion must be nonnegative");
        }
        if (!any_retained) throw InputError("synth: at least one retained annotator required");
    }

    std::vector<std::string> retained_annotators() const {
        std::vector<std::string> ids;
        for (const auto& a : annotators)
            if (a.retained) ids.push_back(a.id);
        return ids;
    }
};

/// Generator's truth record.
struct SynthTruth {
    double base_frequency = 0.0;
    std::vector<std::string> variables; ///< planted (retained) variables, schema order
    std::map<std::string, std::vector<int>> indicators;   ///< per variable, per address
    std::vector<AnnotationRecord> true_values;             ///< one per address, annotator "truth"
    std::vector<double> latent_frequency;                  ///< per policy
    std::vector<double> expected_claims;                   ///< per policy
};

struct SynthPortfolio {
    SynthConfig config;
    AnnotationSchema schema;
    AddressRegistry registry;
    std::vector<PolicyRecord> policies;
    std::vector<AnnotationRecord> annotations;
    std::vector<std::string> common_set;
    /// Rows for the geocoding fixture backend: raw_address -> (lat, lon, country).
    struct GeocodeRow {
        std::string raw_address;
        double lat = 0.0, lon = 0.0;
        std::string country;
    };
    std::vector<GeocodeRow> geocode_table;
    SynthTruth truth;
};

/// Schema used by synthetic fixtures: the default schema with ordinal cut
/// points at 2.5, matching where the generator plants the top-category
/// effects.
inline AnnotationSchema synthetic_schema() {
    auto s = default_schema();
    for (auto& v : s.variables)
        if (v.kind == VariableKind::ordinal && v.retained()) v.simplification.threshold = 2.5;
    return s;
}

namespace detail {

inline std::string iso_timestamp(std::int64_t epoch_seconds) {
    std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string synth_id(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%06zu", prefix, i);
    return buf;
}

/// True attribute draw for one address, in schema order.
inline AnnotationRecord draw_truth(const AnnotationSchema& schema, const SynthConfig& cfg, std::mt19937_64& rng,
                                   std::map<std::string, int>& indicator) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto bern = [&](double p) { return u01(rng) < p; };
    auto prevalence = [&](const std::string& name) {
        auto it = cfg.effects.find(name);
        return it == cfg.effects.end() ? 0.5 : it->second.prevalence;
    };

    AnnotationRecord r;
    for (const auto& v : schema.variables) {
        if (v.kind == VariableKind::ordinal && !v.retained()) {
            // Exploratory ordinals: a hump-shaped draw over the scale.
            std::normal_distribution<double> nd(0.5 * (v.min + v.max), 0.25 * (v.max - v.min));
            r.values.emplace_back(std::clamp(std::round(nd(rng)), double(v.min), double(v.max)));
            continue;
        }
        const bool on = bern(prevalence(v.name));
        indicator[v.name] = on;
        switch (v.kind) {
        case VariableKind::ordinal:
            r.values.emplace_back(on ? double(v.max) : double(bern(0.5) ? v.min : v.min + 1));
            break;
        case VariableKind::single_choice: {
            const auto& positive = v.simplification.positive_codes;
            std::vector<std::string> negative;
            for (const auto& c : v.codes)
                if (std::find(positive.begin(), positive.end(), c) == positive.end()) negative.push_back(c);
            const auto& pool = on ? positive : negative;
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            r.values.emplace_back(pool[pick(rng)]);
            break;
        }
        case VariableKind::multi_choice: {
            const auto& positive = v.simplification.positive_codes;
            std::vector<std::string> others;
            for (const auto& c : v.codes)
                if (std::find(positive.begin(), positive.end(), c) == positive.end()) others.push_back(c);
            std::uniform_int_distribution<std::size_t> pick_other(0, others.size() - 1);
            std::vector<std::string> set;
            if (on) {
                set.push_back(positive.front());
            } else if (bern(0.7)) {
                set = {positive.front(), others[pick_other(rng)]};
            } else {
                set = {others[pick_other(rng)]};
            }
            r.values.emplace_back(canonical_codes(v, std::move(set)));
            break;
        }
        }
    }
    return r;
}

inline AnnotationRecord observe(const AnnotationSchema& schema, const AnnotationRecord& truth,
                                const SynthAnnotator& a, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    AnnotationRecord r;
    r.annotator_id = a.id;
    r.address_id = truth.address_id;
    for (std::size_t vi = 0; vi < schema.variables.size(); ++vi) {
        const auto& v = schema.variables[vi];
        switch (v.kind) {
        case VariableKind::ordinal: {
            const double half = 0.5 * (v.max - v.min);
            const double centre = 0.5 * (v.max + v.min);
            const double noise = a.dispersion > 0.0 ? a.dispersion * half * n01(rng) : 0.0;
            const double x = centre + a.scale * (truth.ordinal(vi) - centre) + a.bias * half + noise;
            r.values.emplace_back(std::clamp(std::round(x), double(v.min), double(v.max)));
            break;
        }
        case VariableKind::single_choice: {
            std::string code = truth.code(vi);
            if (a.error_rate > 0.0 && u01(rng) < a.error_rate) {
                std::vector<std::string> others;
                for (const auto& c : v.codes)
                    if (c != code) others.push_back(c);
                std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
                code = others[pick(rng)];
            }
            r.values.emplace_back(std::move(code));
            break;
        }
        case VariableKind::multi_choice: {
            const auto& set = truth.codes(vi);
            std::vector<std::string> out;
            for (const auto& c : v.codes) {
                bool in = std::find(set.begin(), set.end(), c) != set.end();
                if (a.error_rate > 0.0 && u01(rng) < a.error_rate) in = !in;
                if (in) out.push_back(c);
            }
            r.values.emplace_back(out.empty() ? set : out);
            break;
        }
        }
    }
    return r;
}

} // namespace detail

/// Draws a synthetic portfolio with planted house-feature effects.
///
/// Claim frequency is base x prod(RR_v ^ x_v) x exp(z) with z the
/// non-house risk component ~ N(0, latent_sd^2). The incumbent model sees
/// only z, blurred: log f_B = q z + sqrt(1 - q^2) latent_sd xi, rescaled to
/// the target exposure-weighted mean. Claims ~ Poisson(freq x exposure).
inline SynthPortfolio generate_portfolio(const SynthConfig& config) {
    config.validate();
    SynthPortfolio out;
    out.config = config;
    out.schema = synthetic_schema();
    const auto& schema = out.schema;
    for (const auto& [name, e] : config.effects) {
        const auto* v = schema.find(name);
        if (!v || !v->retained()) throw InputError("synth: effect on unknown or excluded variable '" + name + "'");
    }

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    const std::size_t n = config.n_policies;

    // Addresses and their geocoding status.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<AddressStatus> status(n, AddressStatus::resolved);
    for (std::size_t k = 0; k < config.n_foreign; ++k) status[order[k]] = AddressStatus::foreign;
    for (std::size_t k = config.n_foreign; k < config.n_foreign + config.n_unresolved; ++k)
        status[order[k]] = AddressStatus::unresolved;

    for (std::size_t i = 0; i < n; ++i) {
        AddressEntry e;
        e.address_id = detail::synth_id("SYN", i + 1);
        e.raw_address = e.address_id;
        e.status = status[i];
        if (status[i] == AddressStatus::resolved) {
            e.location = LatLon{49.0 + 5.8 * u01(rng), 14.1 + 10.0 * u01(rng)};
            out.geocode_table.push_back({e.raw_address, e.location->lat, e.location->lon, config.domestic_country});
        } else if (status[i] == AddressStatus::foreign) {
            e.location = LatLon{48.0 + 6.0 * u01(rng), 6.0 + 7.0 * u01(rng)};
            out.geocode_table.push_back({e.raw_address, e.location->lat, e.location->lon, "DE"});
        }
        out.registry.add(std::move(e));
    }

    // True attributes.
    auto& truth = out.truth;
    truth.variables = schema.retained_names();
    for (const auto& name : truth.variables) truth.indicators[name].reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::map<std::string, int> ind;
        AnnotationRecord r = detail::draw_truth(schema, config, rng, ind);
        r.address_id = out.registry.entries()[i].address_id;
        r.annotator_id = "truth";
        for (const auto& name : truth.variables) truth.indicators[name].push_back(ind[name]);
        truth.true_values.push_back(std::move(r));
    }

    // Policies: one per address.
    double norm = std::exp(0.5 * config.latent_sd * config.latent_sd);
    for (const auto& name : truth.variables) {
        auto it = config.effects.find(name);
        if (it != config.effects.end()) norm *= 1.0 - it->second.prevalence + it->second.prevalence * it->second.relative_risk;
    }
    truth.base_frequency = config.mean_frequency / norm;

    const double q = config.model_b_quality;
    std::vector<double> log_b(n);
    out.policies.resize(n);
    truth.latent_frequency.resize(n);
    truth.expected_claims.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = out.policies[i];
        p.policy_id = detail::synth_id("POL", i + 1);
        p.address_id = out.registry.entries()[i].address_id;
        p.exposure = u01(rng) < config.full_year_share
                         ? 1.0
                         : config.partial_exposure_min + (1.0 - config.partial_exposure_min) * u01(rng);
        const double z = config.latent_sd * n01(rng);
        double log_rr = 0.0;
        for (const auto& name : truth.variables) {
            auto it = config.effects.find(name);
            if (it != config.effects.end() && truth.indicators[name][i]) log_rr += std::log(it->second.relative_risk);
        }
        const double freq = truth.base_frequency * std::exp(log_rr + z);
        truth.latent_frequency[i] = freq;
        truth.expected_claims[i] = freq * p.exposure;
        std::poisson_distribution<std::int64_t> claims(truth.expected_claims[i]);
        p.claim_count = claims(rng);
        log_b[i] = q * z + std::sqrt(1.0 - q * q) * config.latent_sd * n01(rng);
    }
    double weighted = 0.0, total_exposure = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        weighted += std::exp(log_b[i]) * out.policies[i].exposure;
        total_exposure += out.policies[i].exposure;
    }
    const double scale = config.mean_frequency * total_exposure / weighted;
    for (std::size_t i = 0; i < n; ++i) out.policies[i].model_b_frequency = scale * std::exp(log_b[i]);

    // Annotation campaign over resolved addresses.
    const auto resolved = out.registry.included_ids();
    const auto retained = config.retained_annotators();
    const auto batches = assign_batches(resolved, retained, std::min(config.common_size, resolved.size()),
                                        config.seed ^ 0x9E3779B97F4A7C15ull);
    out.common_set = batches.front().addresses;

    std::map<std::string, std::size_t> address_index;
    for (std::size_t i = 0; i < n; ++i) address_index[out.registry.entries()[i].address_id] = i;

    std::int64_t clock = 1551427200; // 2019-03-01T08:00:00Z
    for (const auto& a : config.annotators) {
        std::vector<const std::vector<std::string>*> lists{&out.common_set};
        for (const auto& b : batches)
            if (b.annotator_id == a.id && b.phase == BatchPhase::disjoint) lists.push_back(&b.addresses);
        for (const auto* list : lists) {
            for (const auto& address : *list) {
                AnnotationRecord r = detail::observe(schema, truth.true_values[address_index.at(address)], a, rng);
                clock += 37;
                r.timestamp = detail::iso_timestamp(clock);
                out.annotations.push_back(std::move(r));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON config

inline nlohmann::json to_json(const SynthConfig& c) {
    nlohmann::json effects = nlohmann::json::object();
    for (const auto& [name, e] : c.effects)
        effects[name] = {{"prevalence", e.prevalence}, {"relative_risk", e.relative_risk}};
    nlohmann::json annotators = nlohmann::json::array();
    for (const auto& a : c.annotators)
        annotators.push_back({{"id", a.id},
                              {"bias", a.bias},
                              {"scale", a.scale},
                              {"dispersion", a.dispersion},
                              {"error_rate", a.error_rate},
                              {"retained", a.retained}});
    return {{"n_policies", c.n_policies},
            {"seed", c.seed},
            {"mean_frequency", c.mean_frequency},
            {"full_year_share", c.full_year_share},
            {"partial_exposure_min", c.partial_exposure_min},
            {"n_foreign", c.n_foreign},
            {"n_unresolved", c.n_unresolved},
            {"latent_sd", c.latent_sd},
            {"model_b_quality", c.model_b_quality},
            {"common_size", c.common_size},
            {"domestic_country", c.domestic_country},
            {"write_images", c.write_images},
            {"effects", effects},
            {"annotators", annotators}};
}

/// Missing keys keep their defaults.
inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
        c.n_policies = j.value("n_policies", c.n_policies);
        c.seed = j.value("seed", c.seed);
        c.mean_frequency = j.value("mean_frequency", c.mean_frequency);
        c.full_year_share = j.value("full_year_share", c.full_year_share);
        c.partial_exposure_min = j.value("partial_exposure_min", c.partial_exposure_min);
        c.n_foreign = j.value("n_foreign", c.n_foreign);
        c.n_unresolved = j.value("n_unresolved", c.n_unresolved);
        c.latent_sd = j.value("latent_sd", c.latent_sd);
        c.model_b_quality = j.value("model_b_quality", c.model_b_quality);
        c.common_size = j.value("common_size", c.common_size);
        c.domestic_country = j.value("domestic_country", c.domestic_country);
        c.write_images = j.value("write_images", c.write_images);
        if (j.contains("effects")) {
            c.effects.clear();
            for (auto it = j["effects"].begin(); it != j["effects"].end(); ++it)
                c.effects[it.key()] = {it.value().at("prevalence").get<double>(),
                                       it.value().at("relative_risk").get<double>()};
        }
        if (j.contains("annotators")) {
            c.annotators.clear();
            for (const auto& a : j["annotators"])
                c.annotators.push_back({a.at("id").get<std::string>(), a.value("bias", 0.0), a.value("scale", 1.0),
                                        a.value("dispersion", 0.0), a.value("error_rate", 0.0),
                                        a.value("retained", true)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid synth config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Model inputs derived from a synthetic run: variables for Model C and the
/// annotators whose ratings feed calibration.
struct VariablesConfig {
    std::vector<std::string> variables;
    std::vector<std::string> retained_annotators; ///< empty = all annotators
    bool calibrate = true;
};

inline nlohmann::json to_json(const VariablesConfig& v) {
    return {{"variables", v.variables}, {"retained_annotators", v.retained_annotators}, {"calibrate", v.calibrate}};
}

inline VariablesConfig variables_config_from_json(const nlohmann::json& j) {
    VariablesConfig v;
    try {
        v.variables = j.at("variables").get<std::vector<std::string>>();
        v.retained_annotators = j.value("retained_annotators", std::vector<std::string>{});
        v.calibrate = j.value("calibrate", true);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid variables config: ") + e.what());
    }
    return v;
}

// ---------------------------------------------------------------------------
// Fixture export

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Small binary PPM with a colour derived from the address, so fixture
/// images differ per address and are byte-stable.
inline std::string fixture_ppm(const std::string& address_id, const std::string& view) {
    std::uint32_t h = 2166136261u;
    for (char c : address_id + "/" + view) h = (h ^ static_cast<unsigned char>(c)) * 16777619u;
    const int w = 8, ht = 8;
    std::string out = "P6\n8 8\n255\n";
    for (int i = 0; i < w * ht; ++i) {
        out.push_back(static_cast<char>((h >> 0) & 0xFF));
        out.push_back(static_cast<char>((h >> 8) & 0xFF));
        out.push_back(static_cast<char>(((h >> 16) + static_cast<std::uint32_t>(i)) & 0xFF));
    }
    return out;
}

} // namespace detail

/// Writes policies.csv, addresses.csv, annotations.csv, truth.json plus the
/// companion files the pipeline reads (schema.json, common.txt,
/// variables.json, geocode_fixtures.csv, imagery.json, synth_config.json)
/// and optional fixture images under images/<address_id>/<view>.ppm.
inline void export_fixtures(const SynthPortfolio& g, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    auto write = [&](const char* name, auto&& body) {
        const auto path = dir / name;
        auto out = detail::open_out(path);
        body(out);
        detail::close_out(out, path);
    };
    write("policies.csv", [&](std::ostream& o) { write_policies(o, g.policies); });
    write("addresses.csv", [&](std::ostream& o) { write_addresses(o, g.registry); });
    write("annotations.csv", [&](std::ostream& o) { write_annotations(o, g.annotations, g.schema); });
    write("schema.json", [&](std::ostream& o) { o << to_json(g.schema).dump(2) << '\n'; });
    write("synth_config.json", [&](std::ostream& o) { o << to_json(g.config).dump(2) << '\n'; });
    write("common.txt", [&](std::ostream& o) {
        for (const auto& a : g.common_set) o << a << '\n';
    });
    write("variables.json", [&](std::ostream& o) {
        VariablesConfig v{g.schema.retained_names(), g.config.retained_annotators(), true};
        o << to_json(v).dump(2) << '\n';
    });
    write("geocode_fixtures.csv", [&](std::ostream& o) {
        o << "raw_address,lat,lon,country\n";
        for (const auto& r : g.geocode_table)
            o << csv::escape(r.raw_address) << ',' << csv::format_double(r.lat) << ',' << csv::format_double(r.lon)
              << ',' << r.country << '\n';
    });
    write("imagery.json", [&](std::ostream& o) {
        nlohmann::json cfg{{"backend", "fixture"},
                           {"geocode_fixtures", "geocode_fixtures.csv"},
                           {"image_fixtures", "images"},
                           {"cache_dir", "cache"},
                           {"domestic_country", g.config.domestic_country},
                           {"requests_per_second", 100000.0}};
        o << cfg.dump(2) << '\n';
    });
    write("truth.json", [&](std::ostream& o) {
        nlohmann::json rr = nlohmann::json::object(), prev = nlohmann::json::object();
        for (const auto& [name, e] : g.config.effects) {
            rr[name] = e.relative_risk;
            prev[name] = e.prevalence;
        }
        nlohmann::json addresses = nlohmann::json::array();
        for (std::size_t i = 0; i < g.truth.true_values.size(); ++i) {
            const auto& t = g.truth.true_values[i];
            nlohmann::json ind = nlohmann::json::object();
            for (const auto& name : g.truth.variables) ind[name] = g.truth.indicators.at(name)[i];
            addresses.push_back({{"address_id", t.address_id},
                                 {"indicators", ind},
                                 {"values", to_json(t, g.schema).at("values")}});
        }
        nlohmann::json policies = nlohmann::json::array();
        for (std::size_t i = 0; i < g.policies.size(); ++i)
            policies.push_back({{"policy_id", g.policies[i].policy_id},
                                {"latent_frequency", g.truth.latent_frequency[i]},
                                {"expected_claims", g.truth.expected_claims[i]}});
        nlohmann::json j{{"seed", g.config.seed},
                         {"base_frequency", g.truth.base_frequency},
                         {"relative_risks", rr},
                         {"prevalences", prev},
                         {"addresses", addresses},
                         {"policies", policies}};
        o << j.dump() << '\n';
    });

    if (g.config.write_images) {
        const int sv = g.schema.index_of("sv_quality");
        for (std::size_t i = 0; i < g.truth.true_values.size(); ++i) {
            const auto& t = g.truth.true_values[i];
            if (!g.registry.entries()[i].included()) continue;
            const auto sub = dir / "images" / t.address_id;
            fs::create_directories(sub, ec);
            if (ec) throw IoError("cannot create '" + sub.string() + "': " + ec.message());
            for (const char* view : {"street", "satellite"}) {
                if (std::string(view) == "street" && sv >= 0 && t.code(static_cast<std::size_t>(sv)) == "missing")
                    continue;
                const auto path = sub / (std::string(view) + ".ppm");
                auto out = detail::open_out(path);
                out << detail::fixture_ppm(t.address_id, view);
                detail::close_out(out, path);
            }
        }
    }
}

} // namespace streetrisk
