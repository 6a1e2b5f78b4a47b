#pragma once

// Annotation campaign service: batch assignment, task serving, durable
// submission storage and live agreement feedback over HTTP+JSON.

#include <streetrisk/annotation.hpp>
#include <streetrisk/campaign.hpp>
#include <streetrisk/imagery.hpp>
#include <streetrisk/kappa.hpp>
#include <streetrisk/schema.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace streetrisk {

struct AnnotatorAccount {
    std::string annotator_id;
    std::string display_name;
    bool retained = true; ///< receives a disjoint batch and feeds calibration
};

struct CampaignConfig {
    std::vector<AnnotatorAccount> annotators;
    std::size_t common_size = 500;
    std::uint64_t seed = 1;
    std::size_t min_common_for_agreement = 20;
    bool agreement_feedback = true;
    std::size_t compact_every = 100; ///< submissions per annotator between snapshots

    void validate() const {
        if (annotators.empty()) throw InputError("campaign: at least one annotator required");
        std::set<std::string> ids;
        for (const auto& a : annotators) {
            if (a.annotator_id.empty() ||
                !std::all_of(a.annotator_id.begin(), a.annotator_id.end(),
                             [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-' || c == '.'; }))
                throw InputError("campaign: annotator id '" + a.annotator_id + "' must be [A-Za-z0-9_.-]+");
            if (!ids.insert(a.annotator_id).second) throw InputError("campaign: duplicate annotator id '" + a.annotator_id + "'");
        }
        if (min_common_for_agreement < 1) throw InputError("campaign: min_common_for_agreement must be >= 1");
    }
};

inline CampaignConfig campaign_config_from_json(const nlohmann::json& j) {
    CampaignConfig c;
    for (const auto& a : j.at("annotators"))
        c.annotators.push_back({a.at("id").get<std::string>(), a.value("display_name", a.at("id").get<std::string>()),
                                a.value("retained", true)});
    c.common_size = j.value("common_size", c.common_size);
    c.seed = j.value("seed", c.seed);
    c.min_common_for_agreement = j.value("min_common_for_agreement", c.min_common_for_agreement);
    c.agreement_feedback = j.value("agreement_feedback", c.agreement_feedback);
    c.compact_every = j.value("compact_every", c.compact_every);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Storage

/// Per-annotator append-only JSONL log (`<id>.log.jsonl`, one fsync'd line
/// per accepted submission) with a compacted snapshot (`<id>.current.json`)
/// of the latest record per address. The log is never truncated and serves
/// as the audit history.
class AnnotationStore {
public:
    AnnotationStore(std::filesystem::path dir, AnnotationSchema schema) : dir_(std::move(dir)), schema_(std::move(schema)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create '" + dir_.string() + "': " + ec.message());
    }

    struct Entry {
        std::uint64_t seq = 0;
        std::string received_at;
        AnnotationRecord record;
    };

    /// Snapshot plus log tail; the latest record per address wins.
    std::pair<std::uint64_t, std::map<std::string, AnnotationRecord>> load(const std::string& annotator) const {
        std::uint64_t seq = 0;
        std::map<std::string, AnnotationRecord> current;
        const auto snap = snapshot_path(annotator);
        if (std::filesystem::exists(snap)) {
            std::ifstream in(snap, std::ios::binary);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw InputError("'" + snap.string() + "': " + e.what());
            }
            seq = j.at("seq").get<std::uint64_t>();
            for (const auto& r : j.at("records")) {
                auto parsed = parse_record(r);
                current[parsed.address_id] = std::move(parsed);
            }
        }
        for (auto& e : history(annotator)) {
            if (e.seq <= seq) continue;
            seq = e.seq;
            current[e.record.address_id] = std::move(e.record);
        }
        return {seq, std::move(current)};
    }

    /// Every logged submission in order. A torn final line (interrupted
    /// write) is skipped.
    std::vector<Entry> history(const std::string& annotator) const {
        std::vector<Entry> out;
        std::ifstream in(log_path(annotator), std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                if (in.peek() == std::char_traits<char>::eof()) break;
                throw InputError("'" + log_path(annotator).string() + "': corrupt log line");
            }
            out.push_back({j.at("seq").get<std::uint64_t>(), j.value("received_at", ""), parse_record(j.at("record"))});
        }
        return out;
    }

    /// Appends and fsyncs one log line. Callers serialize per annotator.
    void append(const std::string& annotator, std::uint64_t seq, const AnnotationRecord& r) {
        nlohmann::json j{{"seq", seq}, {"received_at", utc_now_iso()}, {"record", to_json(r, schema_)}};
        const std::string line = j.dump() + "\n";
        const auto path = log_path(annotator);
        int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd < 0) throw IoError("cannot open '" + path.string() + "'");
        std::size_t written = 0;
        while (written < line.size()) {
            auto n = ::write(fd, line.data() + written, line.size() - written);
            if (n <= 0) {
                ::close(fd);
                throw IoError("write to '" + path.string() + "' failed");
            }
            written += static_cast<std::size_t>(n);
        }
        if (::fsync(fd) != 0) {
            ::close(fd);
            throw IoError("fsync of '" + path.string() + "' failed");
        }
        ::close(fd);
    }

    void compact(const std::string& annotator, std::uint64_t seq, const std::map<std::string, AnnotationRecord>& current) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& [address, r] : current) records.push_back(to_json(r, schema_));
        const std::string body = nlohmann::json{{"seq", seq}, {"records", records}}.dump() + "\n";
        const auto path = snapshot_path(annotator);
        auto tmp = path;
        tmp += ".tmp";
        int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
        if (fd < 0) throw IoError("cannot open '" + tmp.string() + "'");
        bool ok = ::write(fd, body.data(), body.size()) == static_cast<ssize_t>(body.size()) && ::fsync(fd) == 0;
        ::close(fd);
        if (!ok) throw IoError("cannot write '" + tmp.string() + "'");
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
    }

private:
    std::filesystem::path log_path(const std::string& a) const { return dir_ / (a + ".log.jsonl"); }
    std::filesystem::path snapshot_path(const std::string& a) const { return dir_ / (a + ".current.json"); }

    AnnotationRecord parse_record(const nlohmann::json& j) const {
        auto parsed = annotation_from_json(j, schema_);
        if (auto* err = std::get_if<FieldError>(&parsed))
            throw InputError("stored record invalid at '" + err->field + "': " + err->message);
        return std::get<AnnotationRecord>(std::move(parsed));
    }

    std::filesystem::path dir_;
    AnnotationSchema schema_;
};

// ---------------------------------------------------------------------------
// Service

struct ServiceResponse {
    int status = 200;
    nlohmann::json body;
};

class AnnotationService {
public:
    /// `addresses` are the annotatable (included) address ids. `cache` is
    /// optional; without it tasks carry no image references.
    AnnotationService(CampaignConfig config, AnnotationSchema schema, std::vector<std::string> addresses,
                      std::filesystem::path data_dir, ImageCache* cache = nullptr)
        : config_(std::move(config)), schema_(std::move(schema)), store_(std::move(data_dir), schema_), cache_(cache) {
        config_.validate();
        schema_.validate();
        std::vector<std::string> disjoint_ids;
        for (const auto& a : config_.annotators)
            if (a.retained) disjoint_ids.push_back(a.annotator_id);
        if (disjoint_ids.empty()) throw InputError("campaign: at least one retained annotator required");
        const auto batches = assign_batches(addresses, disjoint_ids, config_.common_size, config_.seed);
        common_ = batches.front().addresses;
        common_set_.insert(common_.begin(), common_.end());
        for (const auto& a : config_.annotators) {
            auto& st = state_[a.annotator_id];
            st.order = common_;
            st.common_count = common_.size();
            for (const auto& b : batches)
                if (b.annotator_id == a.annotator_id && b.phase == BatchPhase::disjoint)
                    st.order.insert(st.order.end(), b.addresses.begin(), b.addresses.end());
            st.assigned.insert(st.order.begin(), st.order.end());
            auto [seq, current] = store_.load(a.annotator_id);
            st.seq = seq;
            st.current = std::move(current);
            st.writer = std::make_unique<std::mutex>();
        }
    }

    const AnnotationSchema& schema() const { return schema_; }
    const std::vector<std::string>& common_set() const { return common_; }

    std::vector<std::string> assignment(const std::string& annotator) const {
        auto it = state_.find(annotator);
        if (it == state_.end()) throw InputError("unknown annotator '" + annotator + "'");
        return it->second.order;
    }

    ServiceResponse schema_json() const { return {200, to_json(schema_)}; }

    ServiceResponse next_task(const std::string& annotator) const {
        std::shared_lock lock(mutex_);
        auto it = state_.find(annotator);
        if (it == state_.end()) return unknown_annotator(annotator);
        const auto& st = it->second;
        for (std::size_t k = 0; k < st.order.size(); ++k) {
            const auto& address = st.order[k];
            if (st.current.count(address)) continue;
            nlohmann::json images = nlohmann::json::object();
            for (View v : {View::street, View::satellite}) images[to_string(v)] = image_ref(address, v);
            return {200,
                    {{"status", "task"},
                     {"address_id", address},
                     {"phase", k < st.common_count ? "common" : "disjoint"},
                     {"position", k},
                     {"total", st.order.size()},
                     {"images", images},
                     {"schema", to_json(schema_)}}};
        }
        return {200, {{"status", "complete"}, {"annotator_id", annotator}, {"total", st.order.size()}}};
    }

    ServiceResponse submit(const nlohmann::json& body) {
        auto parsed = annotation_from_json(body, schema_);
        if (auto* err = std::get_if<FieldError>(&parsed))
            return {422, {{"error", "validation failed"}, {"field", err->field}, {"message", err->message}}};
        auto record = std::get<AnnotationRecord>(std::move(parsed));
        auto it = state_.find(record.annotator_id);
        if (it == state_.end()) return unknown_annotator(record.annotator_id);
        auto& st = it->second;
        if (!st.assigned.count(record.address_id))
            return {403,
                    {{"error", "address not assigned to annotator"},
                     {"address_id", record.address_id},
                     {"annotator_id", record.annotator_id}}};
        if (record.timestamp.empty()) record.timestamp = utc_now_iso();

        std::lock_guard writer(*st.writer);
        std::uint64_t seq;
        {
            std::shared_lock read(mutex_);
            seq = st.seq + 1;
        }
        store_.append(record.annotator_id, seq, record);
        bool replaced;
        std::map<std::string, AnnotationRecord> snapshot;
        bool compact = false;
        {
            std::unique_lock write(mutex_);
            replaced = st.current.count(record.address_id) > 0;
            st.current[record.address_id] = record;
            st.seq = seq;
            if (config_.compact_every > 0 && seq % config_.compact_every == 0) {
                snapshot = st.current;
                compact = true;
            }
        }
        if (compact) store_.compact(record.annotator_id, seq, snapshot);
        return {200, {{"status", "accepted"}, {"seq", seq}, {"replaced", replaced}, {"record", to_json(record, schema_)}}};
    }

    /// Writes a snapshot for every annotator.
    void compact_all() {
        for (auto& [id, st] : state_) {
            std::lock_guard writer(*st.writer);
            std::map<std::string, AnnotationRecord> snapshot;
            std::uint64_t seq;
            {
                std::shared_lock read(mutex_);
                snapshot = st.current;
                seq = st.seq;
            }
            store_.compact(id, seq, snapshot);
        }
    }

    ServiceResponse progress(const std::string& annotator = {}) const {
        std::shared_lock lock(mutex_);
        auto one = [&](const std::string& id, const AnnotatorState& st) {
            std::size_t common_done = 0;
            for (const auto& [address, r] : st.current) common_done += common_set_.count(address);
            return nlohmann::json{{"annotator_id", id},
                                  {"done", st.current.size()},
                                  {"total", st.order.size()},
                                  {"common_done", common_done},
                                  {"common_total", st.common_count}};
        };
        if (!annotator.empty()) {
            auto it = state_.find(annotator);
            if (it == state_.end()) return unknown_annotator(annotator);
            return {200, one(annotator, it->second)};
        }
        nlohmann::json all = nlohmann::json::array();
        for (const auto& a : config_.annotators) all.push_back(one(a.annotator_id, state_.at(a.annotator_id)));
        return {200, {{"annotators", all}}};
    }

    /// Kappa over the common-set addresses rated by every annotator who has
    /// reached the configured minimum.
    ServiceResponse agreement() const {
        if (!config_.agreement_feedback) return {403, {{"error", "agreement feedback is disabled for this campaign"}}};
        std::shared_lock lock(mutex_);
        std::vector<std::string> raters;
        for (const auto& a : config_.annotators) {
            const auto& st = state_.at(a.annotator_id);
            std::size_t n = 0;
            for (const auto& address : common_) n += st.current.count(address);
            if (n >= config_.min_common_for_agreement) raters.push_back(a.annotator_id);
        }
        auto not_yet = [&](const std::string& reason) {
            return ServiceResponse{409, {{"status", "not yet computable"}, {"reason", reason}, {"qualifying_raters", raters},
                                         {"min_common_items", config_.min_common_for_agreement}}};
        };
        if (raters.size() < 2)
            return not_yet("fewer than 2 annotators have rated at least " +
                           std::to_string(config_.min_common_for_agreement) + " common-set addresses");
        std::vector<std::string> items;
        for (const auto& address : common_) {
            bool all = std::all_of(raters.begin(), raters.end(),
                                   [&](const std::string& r) { return state_.at(r).current.count(address) > 0; });
            if (all) items.push_back(address);
        }
        if (items.size() < config_.min_common_for_agreement)
            return not_yet("only " + std::to_string(items.size()) + " common-set addresses are rated by all qualifying annotators");
        std::vector<AnnotationRecord> records;
        for (const auto& r : raters)
            for (const auto& address : items) records.push_back(state_.at(r).current.at(address));
        auto body = to_json(agreement_report(records, schema_, items, raters));
        body["status"] = "ok";
        body["items"] = items.size();
        return {200, body};
    }

    /// Current records, sorted by address then annotator, in the annotation
    /// CSV format.
    std::string export_csv() const {
        std::vector<AnnotationRecord> all;
        {
            std::shared_lock lock(mutex_);
            for (const auto& [id, st] : state_)
                for (const auto& [address, r] : st.current) all.push_back(r);
        }
        std::sort(all.begin(), all.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
            return std::tie(a.address_id, a.annotator_id) < std::tie(b.address_id, b.annotator_id);
        });
        std::ostringstream out;
        write_annotations(out, all, schema_);
        return out.str();
    }

    std::vector<AnnotationStore::Entry> history(const std::string& annotator) const { return store_.history(annotator); }

    /// Image bytes and content type from the cache, if present.
    std::optional<std::pair<std::string, std::string>> image(const std::string& address_id, View view) const {
        if (!cache_) return std::nullopt;
        auto entry = cache_->find(address_id, view);
        if (!entry || entry->missing) return std::nullopt;
        auto bytes = cache_->read(*entry);
        if (!bytes) return std::nullopt;
        return std::make_pair(std::move(*bytes), entry->content_type);
    }

private:
    struct AnnotatorState {
        std::vector<std::string> order;
        std::size_t common_count = 0;
        std::set<std::string> assigned;
        std::map<std::string, AnnotationRecord> current;
        std::uint64_t seq = 0;
        std::unique_ptr<std::mutex> writer;
    };

    static ServiceResponse unknown_annotator(const std::string& id) {
        return {404, {{"error", "unknown annotator"}, {"annotator_id", id}}};
    }

    nlohmann::json image_ref(const std::string& address, View v) const {
        if (!cache_) return nullptr;
        auto entry = cache_->find(address, v);
        if (!entry) return nullptr;
        if (entry->missing) return {{"missing", true}};
        return {{"missing", false}, {"url", "/api/images/" + address + "/" + to_string(v)}};
    }

    CampaignConfig config_;
    AnnotationSchema schema_;
    AnnotationStore store_;
    ImageCache* cache_;
    std::vector<std::string> common_;
    std::set<std::string> common_set_;
    std::map<std::string, AnnotatorState> state_;
    mutable std::shared_mutex mutex_;
};

// ---------------------------------------------------------------------------
// HTTP binding

class ServiceHttpServer {
public:
    explicit ServiceHttpServer(AnnotationService& service, std::filesystem::path ui_dir = {}) : service_(service) {
        auto reply = [](httplib::Response& res, const ServiceResponse& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        server_.Get("/api/schema", [&, reply](const httplib::Request&, httplib::Response& res) {
            reply(res, service_.schema_json());
        });
        server_.Get("/api/tasks/next", [&, reply](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("annotator")) return reply(res, {400, {{"error", "missing query parameter 'annotator'"}}});
            reply(res, service_.next_task(req.get_param_value("annotator")));
        });
        server_.Post("/api/annotations", [&, reply](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                return reply(res, {400, {{"error", "request body is not valid JSON"}}});
            }
            reply(res, service_.submit(body));
        });
        server_.Get("/api/progress", [&, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service_.progress(req.has_param("annotator") ? req.get_param_value("annotator") : ""));
        });
        server_.Get("/api/agreement", [&, reply](const httplib::Request&, httplib::Response& res) {
            reply(res, service_.agreement());
        });
        server_.Get(R"(/api/images/([^/]+)/([^/]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
            View view;
            try {
                view = view_from_string(req.matches[2]);
            } catch (const InputError& e) {
                return reply(res, {400, {{"error", e.what()}}});
            }
            auto img = service_.image(req.matches[1], view);
            if (!img) return reply(res, {404, {{"error", "no cached image"}}});
            res.set_content(img->first, img->second.empty() ? "application/octet-stream" : img->second.c_str());
        });
        server_.Get("/api/export/annotations.csv", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content(service_.export_csv(), "text/csv");
        });
        server_.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                reply(res, {500, {{"error", e.what()}, {"kind", e.kind()}}});
            } catch (const std::exception& e) {
                reply(res, {500, {{"error", e.what()}}});
            }
        });
        if (!ui_dir.empty() && !server_.set_mount_point("/", ui_dir.string()))
            throw IoError("cannot serve UI assets from '" + ui_dir.string() + "'");
    }

    ~ServiceHttpServer() { stop(); }

    /// Binds (port 0 picks an ephemeral port) and serves on a background
    /// thread. Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    /// Serves on the calling thread until stopped.
    void run(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    AnnotationService& service_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace streetrisk
