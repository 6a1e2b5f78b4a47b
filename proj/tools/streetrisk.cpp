// streetrisk command-line front end.

#include <streetrisk/pipeline.hpp>
#include <streetrisk/service.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace streetrisk;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

AddressRegistry load_registry(const fs::path& path) {
    auto in = open_in(path);
    auto ingest = ingest_addresses(in);
    if (!ingest.rejections.empty())
        throw InputError("'" + path.string() + "': " + std::to_string(ingest.rejections.size()) +
                         " rejected rows, first at line " + std::to_string(ingest.rejections.front().row) + ": " +
                         ingest.rejections.front().reason);
    return std::move(ingest.registry);
}

/// Relative paths inside a config file resolve against the file's directory.
ImageryConfig load_imagery(const fs::path& path, fs::path& base) {
    base = path.parent_path();
    return imagery_config_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Subcommand state

struct SynthArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    bool images = false;
};

struct GeocodeArgs {
    std::string addresses, imagery, output;
};

struct FetchArgs {
    std::string addresses, imagery, views = "street,satellite";
};

struct ServeArgs {
    std::string host = "127.0.0.1", campaign, addresses, schema, data = "annotation_store", imagery, ui;
    int port = 8080;
};

struct KappaArgs {
    std::string annotations, common, schema, annotators, out;
};

struct CalibrateArgs {
    std::string annotations, schema, common, annotators, out = ".";
};

struct ModelArgs {
    std::string dataset, variables, annotations, out = ".";
    bool calibrated = false;
};

struct FitArgs : ModelArgs {
    std::string offset = "model-b";
};

struct EvaluateArgs : ModelArgs {
    std::size_t trials = 20;
    double split = 0.2;
    std::uint64_t seed = 1;
    std::string axis = "policy_count", resample = "split";
    unsigned threads = 0;
};

struct ReportArgs {
    std::string dir = ".", out;
};

// ---------------------------------------------------------------------------
// Commands

void run_synth(const SynthArgs& a) {
    SynthConfig cfg = a.config.empty() ? SynthConfig{} : synth_config_from_json(read_json_file(a.config));
    if (a.seed) cfg.seed = *a.seed;
    if (a.images) cfg.write_images = true;
    const auto g = generate_portfolio(cfg);
    export_fixtures(g, a.out);
    std::cout << json{{"out", a.out},
                      {"policies", g.policies.size()},
                      {"addresses", g.registry.entries().size()},
                      {"included_addresses", g.registry.included_count()},
                      {"annotations", g.annotations.size()},
                      {"seed", cfg.seed}}
                     .dump()
              << '\n';
}

void run_geocode(const GeocodeArgs& a) {
    fs::path base;
    const auto cfg = load_imagery(a.imagery, base);
    auto provider = make_provider(cfg, base);
    RateLimiter limiter(cfg.requests_per_second);
    GeocodeReport report;
    const auto updated = geocode_registry(load_registry(a.addresses), *provider, cfg.domestic_country, &limiter,
                                          cfg.retry_attempts, report);
    write_file(a.output.empty() ? a.addresses : a.output, render([&](std::ostream& o) { write_addresses(o, updated); }));
    std::cout << json{{"resolved", report.resolved},
                      {"foreign", report.foreign},
                      {"unresolved", report.unresolved},
                      {"failures", report.failures}}
                     .dump()
              << '\n';
    if (!report.failures.empty())
        throw RetriableError(std::to_string(report.failures.size()) + " addresses could not be geocoded; re-run to retry");
}

void run_fetch(const FetchArgs& a) {
    fs::path base;
    const auto cfg = load_imagery(a.imagery, base);
    auto provider = make_provider(cfg, base);
    ImageCache cache(base / cfg.cache_dir);
    RateLimiter limiter(cfg.requests_per_second);
    ImageryClient client(*provider, cache, limiter);
    std::vector<View> views;
    for (const auto& v : split_list(a.views)) views.push_back(view_from_string(v));
    if (views.empty()) throw InputError("--views must name at least one view");
    std::vector<ImageRequest> requests;
    const auto registry = load_registry(a.addresses);
    for (const auto& e : registry.entries()) {
        if (!e.included() || !e.location) continue;
        for (View v : views) {
            ImageRequest r;
            r.address_id = e.address_id;
            r.view = v;
            r.location = *e.location;
            r.width = cfg.width;
            r.height = cfg.height;
            r.heading = cfg.heading;
            r.pitch = cfg.pitch;
            r.zoom = cfg.zoom;
            requests.push_back(r);
        }
    }
    auto outcome = client.fetch_all(requests, cfg.parallelism);
    std::size_t fetched = 0, cached = 0, missing = 0;
    json errors = json::array();
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const auto& r = outcome.results[i];
        if (!r) {
            errors.push_back({{"address_id", requests[i].address_id},
                              {"view", to_string(requests[i].view)},
                              {"error", outcome.errors[i]}});
            continue;
        }
        (r->from_cache ? cached : fetched) += 1;
        missing += r->image.missing;
    }
    std::cout << json{{"requests", requests.size()},
                      {"fetched", fetched},
                      {"from_cache", cached},
                      {"missing_imagery", missing},
                      {"errors", errors}}
                     .dump()
              << '\n';
    if (!errors.empty()) throw RetriableError(std::to_string(errors.size()) + " image requests failed; re-run to retry");
}

void run_serve(const ServeArgs& a) {
    const auto campaign = campaign_config_from_json(read_json_file(a.campaign));
    const auto schema = load_schema(a.schema);
    std::unique_ptr<ImageCache> cache;
    if (!a.imagery.empty()) {
        fs::path base;
        const auto cfg = load_imagery(a.imagery, base);
        cache = std::make_unique<ImageCache>(base / cfg.cache_dir);
    }
    AnnotationService service(campaign, schema, load_registry(a.addresses).included_ids(), a.data, cache.get());
    ServiceHttpServer server(service, a.ui);
    std::cerr << json{{"status", "listening"}, {"host", a.host}, {"port", a.port}}.dump() << std::endl;
    server.run(a.host, a.port);
}

void run_kappa(const KappaArgs& a) {
    const auto schema = load_schema(a.schema);
    const auto annotations = load_annotations(a.annotations, schema);
    const auto report = agreement_report(annotations, schema, read_id_list(a.common), split_list(a.annotators));
    const auto table = render([&](std::ostream& o) { write_kappa_csv(o, report); });
    if (!a.out.empty()) {
        write_file(fs::path(a.out) / "kappa.csv", table);
        write_file(fs::path(a.out) / "kappa.json", to_json(report).dump(2) + "\n");
    }
    std::cout << table;
}

void run_calibrate(const CalibrateArgs& a) {
    const auto schema = load_schema(a.schema);
    auto annotations = filter_annotators(load_annotations(a.annotations, schema), split_list(a.annotators));
    CalibrationOptions opt;
    if (!a.common.empty()) {
        const auto common = read_id_list(a.common);
        opt.moment_exclusions.insert(common.begin(), common.end());
    }
    const auto result = calibrate_annotators(annotations, schema, opt);
    json maps = json::object();
    for (const auto& [variable, per] : result.maps)
        for (const auto& [annotator, m] : per)
            maps[variable][annotator] = {{"own_mean", m.own.mean},       {"own_sd", m.own.sd},
                                         {"pooled_mean", m.pooled.mean}, {"pooled_sd", m.pooled.sd},
                                         {"count", m.own.count},         {"pass_through", m.pass_through}};
    write_file(fs::path(a.out) / "calibrated_annotations.csv",
               render([&](std::ostream& o) { write_annotations(o, result.records, schema); }));
    write_file(fs::path(a.out) / "calibration.json", json{{"maps", maps}, {"warnings", result.warnings}}.dump(2) + "\n");
    for (const auto& w : result.warnings) std::cerr << json{{"warning", w}}.dump() << '\n';
    std::cout << json{{"records", result.records.size()}, {"out", a.out}}.dump() << '\n';
}

Dataset load_dataset(const ModelArgs& a, VariablesConfig& vars) {
    const fs::path dir = a.dataset;
    vars = variables_config_from_json(read_json_file(a.variables.empty() ? dir / "variables.json" : fs::path(a.variables)));
    if (a.calibrated) vars.calibrate = false;
    const auto inputs = load_fixture_dir(dir, a.annotations, !a.annotations.empty());
    if (!inputs.policies.rejections.empty())
        std::cerr << json{{"warning", std::to_string(inputs.policies.rejections.size()) + " policy rows rejected"}}.dump()
                  << '\n';
    const auto provenance = fs::exists(dir / "truth.json") ? Provenance::synthetic : Provenance::real_ingest;
    return build_dataset(inputs, vars, provenance);
}

void run_fit(const FitArgs& a) {
    VariablesConfig vars;
    const auto ds = load_dataset(a, vars);
    const auto design = build_design(ds.features, ds.feature_names, vars.variables);
    std::vector<double> y, offset;
    for (const auto& p : ds.policies) {
        y.push_back(static_cast<double>(p.claim_count));
        if (a.offset == "model-b") offset.push_back(p.model_b_frequency * p.exposure);
        else if (a.offset == "exposure") offset.push_back(p.exposure);
        else throw InputError("--offset must be 'model-b' or 'exposure'");
    }
    const auto model = fit_poisson(design, y, offset);
    const auto wald = wald_tests(model);
    auto model_json = to_json(model);
    model_json["offset"] = a.offset;
    model_json["observations"] = ds.size();
    model_json["excluded_policies"] = ds.excluded_policies;
    model_json["provenance"] = to_string(ds.provenance);
    model_json["design_warnings"] = design.warnings;
    write_file(fs::path(a.out) / "model.json", model_json.dump(2) + "\n");
    const auto table = render([&](std::ostream& o) { write_wald_csv(o, wald); });
    write_file(fs::path(a.out) / "wald.csv", table);
    std::cout << table;
}

void run_evaluate(const EvaluateArgs& a) {
    VariablesConfig vars;
    const auto ds = load_dataset(a, vars);
    const auto data = modeling_data(ds, vars.variables);
    EvaluationSpec spec;
    spec.variables = vars.variables;
    if (a.axis == "exposure") spec.axis = LorenzAxis::exposure;
    else if (a.axis != "policy_count") throw InputError("--axis must be 'policy_count' or 'exposure'");
    if (a.resample == "bootstrap") spec.resampling = Resampling::bootstrap;
    else if (a.resample != "split") throw InputError("--resample must be 'split' or 'bootstrap'");
    const unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
    const auto report = bootstrap_evaluate(data, spec, a.trials, a.split, a.seed, threads);
    auto report_json = to_json(report);
    report_json["provenance"] = to_string(ds.provenance);
    report_json["variables"] = vars.variables;
    write_file(fs::path(a.out) / "gini_report.json", report_json.dump(2) + "\n");
    write_file(fs::path(a.out) / "gini_plot.csv", render([&](std::ostream& o) { write_plot_csv(o, report); }));
    std::cout << report_json["summary"].dump() << '\n';
}

std::string pct(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
    return buf;
}

std::string fixed(double x, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

void run_report(const ReportArgs& a) {
    const fs::path dir = a.dir;
    std::ostringstream md;
    md << "# streetrisk report\n";
    bool any = false;
    if (fs::exists(dir / "kappa.json")) {
        any = true;
        const auto k = read_json_file(dir / "kappa.json");
        md << "\n## Inter-rater agreement (Fleiss' kappa)\n\n";
        md << "Raters: " << k["raters"].size() << "\n\n| Variable | Kappa | Agreement | Items |\n|---|---|---|---|\n";
        for (const auto& v : k["variables"])
            md << "| " << v["variable"].get<std::string>() << " | "
               << (v["kappa"].is_null() ? std::string("n/a") : fixed(v["kappa"].get<double>(), 2)) << " | "
               << v["band"].get<std::string>() << " | " << v["items"] << " |\n";
    }
    if (fs::exists(dir / "model.json")) {
        any = true;
        const auto m = read_json_file(dir / "model.json");
        const auto model = fitted_model_from_json(m);
        md << "\n## Poisson GLM (offset: " << m.value("offset", "?") << ", n = " << m.value("observations", 0) << ")\n\n";
        md << "Deviance " << fixed(model.deviance, 3) << ", iterations " << model.iterations
           << (model.converged ? "" : " (not converged)") << ".\n\n";
        md << "| Term | Estimate | Relative risk | Std. error | p-value |\n|---|---|---|---|---|\n";
        for (const auto& r : wald_tests(model))
            md << "| " << r.name << " | " << fixed(r.estimate, 4) << " | " << fixed(std::exp(r.estimate), 3) << " | "
               << fixed(r.std_error, 4) << " | " << (r.degenerate ? std::string("n/a") : fixed(r.p_value, 4)) << " |\n";
        if (!model.dropped_columns.empty()) {
            md << "\nDropped columns:";
            for (const auto& c : model.dropped_columns) md << ' ' << c;
            md << "\n";
        }
    }
    if (fs::exists(dir / "gini_report.json")) {
        any = true;
        const auto g = read_json_file(dir / "gini_report.json");
        md << "\n## Out-of-sample Gini (" << g["trials"].size() << " trials, test share "
           << fixed(g["split_fraction"].get<double>(), 2) << ", " << g["resampling"].get<std::string>() << ", axis "
           << g["lorenz_axis"].get<std::string>() << ")\n\n";
        md << "| Trial | Model A | Model B | Model C |\n|---|---|---|---|\n";
        for (const auto& t : g["trials"]) {
            md << "| " << t["trial_index"] << " | ";
            if (t["ok"].get<bool>())
                md << pct(t["test_gini_A"]) << " | " << pct(t["test_gini_B"]) << " | " << pct(t["test_gini_C"]) << " |\n";
            else
                md << "failed | | |\n";
        }
        if (!g["summary"].is_null()) {
            const auto& s = g["summary"];
            md << "\nMean Gini: A " << pct(s["mean_gini_A"]) << ", B " << pct(s["mean_gini_B"]) << ", C "
               << pct(s["mean_gini_C"]) << ". Mean improvement of C over B: "
               << fixed(100.0 * s["mean_delta_C_minus_B"].get<double>(), 2) << " percentage points; C beats B in "
               << s["win_count_C_over_B"] << " of " << s["successful"] << " successful trials.\n";
        }
    }
    if (!any) throw InputError("no kappa.json, model.json or gini_report.json in '" + dir.string() + "'");
    const auto out = a.out.empty() ? dir / "report.md" : fs::path(a.out);
    write_file(out, md.str());
    std::cout << md.str();
}

int fail(const char* kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Street-level imagery features for claim-frequency models"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a seeded synthetic portfolio and fixtures");
    s->add_option("--config", synth.config, "Synthetic portfolio config JSON (defaults when omitted)")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.seed, "Override the config seed");
    s->add_flag("--images", synth.images, "Also write fixture images");
    s->callback([&] { run_synth(synth); });

    GeocodeArgs geo;
    auto* g = app.add_subcommand("geocode", "Geocode an address registry");
    g->add_option("--addresses", geo.addresses, "addresses.csv")->required()->check(CLI::ExistingFile);
    g->add_option("--imagery", geo.imagery, "Imagery config JSON")->required()->check(CLI::ExistingFile);
    g->add_option("--output", geo.output, "Updated registry path (default: overwrite --addresses)");
    g->callback([&] { run_geocode(geo); });

    FetchArgs fetch;
    auto* f = app.add_subcommand("fetch-images", "Populate the image cache for included addresses");
    f->add_option("--addresses", fetch.addresses, "addresses.csv")->required()->check(CLI::ExistingFile);
    f->add_option("--imagery", fetch.imagery, "Imagery config JSON")->required()->check(CLI::ExistingFile);
    f->add_option("--views", fetch.views, "Comma-separated views")->capture_default_str();
    f->callback([&] { run_fetch(fetch); });

    ServeArgs serve;
    auto* sv = app.add_subcommand("serve", "Run the annotation service");
    sv->add_option("--port", serve.port)->capture_default_str();
    sv->add_option("--host", serve.host)->capture_default_str();
    sv->add_option("--campaign", serve.campaign, "Campaign config JSON")->required()->check(CLI::ExistingFile);
    sv->add_option("--addresses", serve.addresses, "addresses.csv")->required()->check(CLI::ExistingFile);
    sv->add_option("--schema", serve.schema, "Annotation schema JSON (default schema when omitted)");
    sv->add_option("--data", serve.data, "Submission storage directory")->capture_default_str();
    sv->add_option("--imagery", serve.imagery, "Imagery config JSON for cached images");
    sv->add_option("--ui", serve.ui, "Static UI asset directory");
    sv->callback([&] { run_serve(serve); });

    KappaArgs kappa;
    auto* k = app.add_subcommand("kappa", "Fleiss' kappa per variable on the common set");
    k->add_option("--annotations", kappa.annotations)->required()->check(CLI::ExistingFile);
    k->add_option("--common", kappa.common, "Common-set address ids, one per line")->required()->check(CLI::ExistingFile);
    k->add_option("--schema", kappa.schema);
    k->add_option("--annotators", kappa.annotators, "Comma-separated raters (default: all on the common set)");
    k->add_option("--out", kappa.out, "Directory for kappa.csv and kappa.json");
    k->callback([&] { run_kappa(kappa); });

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Moment-match annotators' ordinal ratings");
    c->add_option("--annotations", cal.annotations)->required()->check(CLI::ExistingFile);
    c->add_option("--schema", cal.schema);
    c->add_option("--common", cal.common, "Addresses excluded from the moment estimates");
    c->add_option("--annotators", cal.annotators, "Comma-separated annotators to keep (default: all)");
    c->add_option("--out", cal.out, "Output directory")->capture_default_str();
    c->callback([&] { run_calibrate(cal); });

    auto add_model_options = [](CLI::App* cmd, ModelArgs& m) {
        cmd->add_option("--dataset", m.dataset, "Fixture directory")->required()->check(CLI::ExistingDirectory);
        cmd->add_option("--variables", m.variables, "Variables config JSON (default: <dataset>/variables.json)");
        cmd->add_option("--annotations", m.annotations, "Annotation CSV replacing <dataset>/annotations.csv");
        cmd->add_flag("--calibrated", m.calibrated, "Annotations are already calibrated");
        cmd->add_option("--out", m.out, "Output directory")->capture_default_str();
    };

    FitArgs fit;
    auto* ft = app.add_subcommand("fit", "Fit the claim-frequency GLM on the full dataset");
    add_model_options(ft, fit);
    ft->add_option("--offset", fit.offset, "model-b or exposure")->capture_default_str();
    ft->callback([&] { run_fit(fit); });

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Repeated train/test Gini comparison of models A, B and C");
    add_model_options(e, ev);
    e->add_option("--trials", ev.trials)->capture_default_str();
    e->add_option("--split", ev.split, "Test-set fraction")->capture_default_str();
    e->add_option("--seed", ev.seed, "Base seed; trial t uses seed + t")->capture_default_str();
    e->add_option("--axis", ev.axis, "policy_count or exposure")->capture_default_str();
    e->add_option("--resample", ev.resample, "split or bootstrap")->capture_default_str();
    e->add_option("--threads", ev.threads, "Worker threads (0: hardware concurrency)")->capture_default_str();
    e->callback([&] { run_evaluate(ev); });

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Markdown summary of kappa, fit and evaluation artifacts");
    r->add_option("--dir", rep.dir, "Artifact directory")->capture_default_str();
    r->add_option("--out", rep.out, "Output path (default: <dir>/report.md)");
    r->callback([&] { run_report(rep); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        return fail("usage_error", ex.what(), 2);
    } catch (const Error& ex) {
        return fail(ex.kind(), ex.what(), 1);
    } catch (const std::exception& ex) {
        return fail("error", ex.what(), 1);
    }
    return 0;
}
