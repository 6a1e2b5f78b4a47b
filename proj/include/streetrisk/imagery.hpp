#pragma once

// Geocoding and static-image retrieval behind a provider interface, with an
// on-disk cache and a global request budget.

#include <streetrisk/csv.hpp>
#include <streetrisk/error.hpp>
#include <streetrisk/portfolio.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace streetrisk {

enum class View { street, satellite };

inline const char* to_string(View v) { return v == View::street ? "street" : "satellite"; }

inline View view_from_string(const std::string& s) {
    if (s == "street") return View::street;
    if (s == "satellite") return View::satellite;
    throw InputError("unknown view '" + s + "' (expected street or satellite)");
}

inline constexpr int kMaxImageSide = 640;

struct ImageRequest {
    std::string address_id;
    View view = View::street;
    LatLon location;
    int width = 640;
    int height = 640;
    double heading = 0.0; ///< street view only
    double pitch = 0.0;   ///< street view only
    int zoom = 19;        ///< satellite only

    void validate() const {
        if (address_id.empty()) throw InputError("image request: empty address_id");
        if (width < 1 || width > kMaxImageSide || height < 1 || height > kMaxImageSide)
            throw InputError("image request: size must be within 1.." + std::to_string(kMaxImageSide) + " per side");
        if (zoom < 0 || zoom > 21) throw InputError("image request: zoom must be within 0..21");
    }
};

struct CachedImage {
    std::string address_id;
    View view = View::street;
    bool missing = false;      ///< provider has no imagery here
    std::string sha256;        ///< hex digest of the cached bytes
    std::string fetched_at;    ///< UTC, ISO 8601
    std::string provider;
    std::string path;          ///< relative to the cache root; empty when missing
    std::string content_type;

    bool operator==(const CachedImage&) const = default;
};

inline nlohmann::json to_json(const CachedImage& c) {
    return {{"address_id", c.address_id}, {"view", to_string(c.view)}, {"missing", c.missing},
            {"sha256", c.sha256},         {"fetched_at", c.fetched_at}, {"provider", c.provider},
            {"path", c.path},             {"content_type", c.content_type}};
}

inline CachedImage cached_image_from_json(const nlohmann::json& j) {
    CachedImage c;
    c.address_id = j.at("address_id").get<std::string>();
    c.view = view_from_string(j.at("view").get<std::string>());
    c.missing = j.at("missing").get<bool>();
    c.sha256 = j.at("sha256").get<std::string>();
    c.fetched_at = j.at("fetched_at").get<std::string>();
    c.provider = j.at("provider").get<std::string>();
    c.path = j.at("path").get<std::string>();
    c.content_type = j.value("content_type", "");
    return c;
}

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

inline std::string utc_now_iso() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string extension_for(const std::string& content_type) {
    if (content_type.starts_with("image/jpeg")) return "jpg";
    if (content_type.starts_with("image/png")) return "png";
    if (content_type.starts_with("image/x-portable-pixmap")) return "ppm";
    return "bin";
}

// ---------------------------------------------------------------------------
// Providers

struct GeocodeResult {
    bool found = false;
    LatLon location;
    std::string country; ///< ISO 3166-1 alpha-2
};

struct ImageResponse {
    bool available = false; ///< false: no imagery at this location
    std::string bytes;
    std::string content_type;
};

class ImageryProvider {
public:
    virtual ~ImageryProvider() = default;
    virtual std::string tag() const = 0;
    /// Throws RetriableError on transient provider failure.
    virtual GeocodeResult geocode(const std::string& raw_address) = 0;
    virtual ImageResponse fetch(const ImageRequest& request) = 0;
    std::size_t calls() const { return calls_.load(); }

protected:
    void count_call() { ++calls_; }

private:
    std::atomic<std::size_t> calls_{0};
};

/// Deterministic offline backend. Geocodes from a
/// `raw_address,lat,lon,country` table and serves
/// `<images>/<address_id>/<view>.ppm`; an absent file means no imagery.
class FixtureProvider final : public ImageryProvider {
public:
    FixtureProvider(const std::filesystem::path& geocode_table, std::filesystem::path image_root)
        : image_root_(std::move(image_root)) {
        std::ifstream in(geocode_table, std::ios::binary);
        if (!in) throw IoError("cannot read '" + geocode_table.string() + "'");
        std::string line;
        if (!csv::read_line(in, line) || line != "raw_address,lat,lon,country")
            throw InputError("'" + geocode_table.string() + "': expected header raw_address,lat,lon,country");
        while (csv::read_line(in, line)) {
            if (line.empty()) continue;
            auto f = csv::split_line(line);
            if (f.size() != 4) throw InputError("'" + geocode_table.string() + "': malformed row '" + line + "'");
            auto lat = csv::parse_double(f[1]), lon = csv::parse_double(f[2]);
            if (!lat || !lon) throw InputError("'" + geocode_table.string() + "': bad coordinates in '" + line + "'");
            table_[f[0]] = {true, {*lat, *lon}, f[3]};
        }
    }

    std::string tag() const override { return "fixture"; }

    GeocodeResult geocode(const std::string& raw_address) override {
        count_call();
        auto it = table_.find(raw_address);
        return it == table_.end() ? GeocodeResult{} : it->second;
    }

    ImageResponse fetch(const ImageRequest& request) override {
        count_call();
        const auto path = image_root_ / request.address_id / (std::string(to_string(request.view)) + ".ppm");
        std::ifstream in(path, std::ios::binary);
        if (!in) return {};
        std::ostringstream bytes;
        bytes << in.rdbuf();
        return {true, bytes.str(), "image/x-portable-pixmap"};
    }

private:
    std::filesystem::path image_root_;
    std::map<std::string, GeocodeResult> table_;
};

/// Endpoint templates for the live backend. Placeholders in braces are
/// substituted and URL-encoded: {address} {lat} {lon} {width} {height}
/// {heading} {pitch} {zoom} {key}.
struct LiveProviderConfig {
    std::string geocode_url = "https://maps.googleapis.com/maps/api/geocode/json?address={address}&key={key}";
    std::string street_url = "https://maps.googleapis.com/maps/api/streetview?size={width}x{height}&location={lat},{lon}"
                             "&heading={heading}&pitch={pitch}&return_error_code=true&key={key}";
    std::string satellite_url = "https://maps.googleapis.com/maps/api/staticmap?center={lat},{lon}&zoom={zoom}"
                                "&size={width}x{height}&maptype=satellite&key={key}";
    std::string key_env = "STREETRISK_IMAGERY_KEY";
    int timeout_seconds = 20;
};

inline std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

inline std::string expand_template(std::string tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    for (std::size_t i = 0; i < tpl.size();) {
        if (tpl[i] == '{') {
            auto close = tpl.find('}', i);
            if (close != std::string::npos) {
                auto it = vars.find(tpl.substr(i + 1, close - i - 1));
                if (it != vars.end()) {
                    out += url_encode(it->second);
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tpl[i++]);
    }
    return out;
}

/// HTTP backend speaking the Google Maps geocoding / Street View Static /
/// Maps Static response conventions.
class LiveProvider final : public ImageryProvider {
public:
    explicit LiveProvider(LiveProviderConfig config) : config_(std::move(config)) {
        if (const char* key = std::getenv(config_.key_env.c_str())) key_ = key;
    }

    std::string tag() const override { return "live"; }

    GeocodeResult geocode(const std::string& raw_address) override {
        count_call();
        auto res = get(expand_template(config_.geocode_url, {{"address", raw_address}, {"key", key_}}));
        if (res.status >= 500 || res.status == 429) throw RetriableError("geocode: provider HTTP " + std::to_string(res.status));
        if (res.status != 200) throw IoError("geocode: provider HTTP " + std::to_string(res.status));
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::exception&) {
            throw RetriableError("geocode: malformed provider response");
        }
        const auto status = j.value("status", "");
        if (status == "ZERO_RESULTS") return {};
        if (status == "OVER_QUERY_LIMIT" || status == "UNKNOWN_ERROR") throw RetriableError("geocode: provider status " + status);
        if (status != "OK") throw IoError("geocode: provider status '" + status + "'");
        if (!j.contains("results") || j["results"].empty()) return {};
        const auto& first = j["results"][0];
        GeocodeResult r;
        r.found = true;
        r.location = {first.at("geometry").at("location").at("lat").get<double>(),
                      first.at("geometry").at("location").at("lng").get<double>()};
        for (const auto& comp : first.value("address_components", nlohmann::json::array())) {
            const auto types = comp.value("types", nlohmann::json::array());
            if (std::find(types.begin(), types.end(), "country") != types.end()) r.country = comp.value("short_name", "");
        }
        return r;
    }

    ImageResponse fetch(const ImageRequest& request) override {
        count_call();
        const auto& tpl = request.view == View::street ? config_.street_url : config_.satellite_url;
        auto res = get(expand_template(tpl, {{"lat", csv::format_double(request.location.lat)},
                                             {"lon", csv::format_double(request.location.lon)},
                                             {"width", std::to_string(request.width)},
                                             {"height", std::to_string(request.height)},
                                             {"heading", csv::format_double(request.heading)},
                                             {"pitch", csv::format_double(request.pitch)},
                                             {"zoom", std::to_string(request.zoom)},
                                             {"key", key_}}));
        if (res.status == 404) return {};
        if (res.status >= 500 || res.status == 429) throw RetriableError("image: provider HTTP " + std::to_string(res.status));
        if (res.status != 200) throw IoError("image: provider HTTP " + std::to_string(res.status));
        return {true, res.body, res.get_header_value("Content-Type")};
    }

private:
    struct Reply {
        int status = 0;
        std::string body;
        httplib::Headers headers;
        std::string get_header_value(const std::string& k) const {
            auto it = headers.find(k);
            return it == headers.end() ? std::string() : it->second;
        }
    };

    Reply get(const std::string& url) const {
        // Split "scheme://host[:port]/path?query" for httplib.
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw InputError("endpoint '" + url + "' has no scheme");
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string target = path_start == std::string::npos ? "/" : url.substr(path_start);
        httplib::Client client(origin);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        client.set_follow_location(true);
        auto res = client.Get(target);
        if (!res) throw RetriableError("provider unreachable: " + httplib::to_string(res.error()));
        return {res->status, res->body, res->headers};
    }

    LiveProviderConfig config_;
    std::string key_;
};

// ---------------------------------------------------------------------------
// Geocoding

/// Resolves one address. A result outside `domestic_country` is foreign;
/// no result is unresolved. Provider failures propagate as RetriableError.
inline AddressEntry geocode(ImageryProvider& provider, const std::string& address_id, const std::string& raw_address,
                            const std::string& domestic_country) {
    if (raw_address.empty()) throw InputError("geocode: empty address");
    AddressEntry e{address_id, raw_address, AddressStatus::unresolved, std::nullopt};
    const auto r = provider.geocode(raw_address);
    if (!r.found) return e;
    e.location = r.location;
    e.status = (domestic_country.empty() || r.country == domestic_country) ? AddressStatus::resolved : AddressStatus::foreign;
    return e;
}

/// Calls `fn`, retrying on RetriableError up to `attempts` times in total
/// with doubling back-off.
template <class Fn>
auto with_retries(Fn&& fn, int attempts, std::chrono::milliseconds backoff) -> decltype(fn()) {
    for (int k = 1;; ++k) {
        try {
            return fn();
        } catch (const RetriableError&) {
            if (k >= attempts) throw;
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

struct GeocodeReport {
    std::size_t resolved = 0, foreign = 0, unresolved = 0;
    std::vector<std::string> failures; ///< address ids whose provider calls kept failing
};

// ---------------------------------------------------------------------------
// Rate limiting

class Clock {
public:
    using time_point = std::chrono::steady_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_until(time_point t) = 0;
};

class SteadyClock final : public Clock {
public:
    time_point now() override { return std::chrono::steady_clock::now(); }
    void sleep_until(time_point t) override { std::this_thread::sleep_until(t); }
};

/// Spaces requests at least 1/rate apart, globally across threads.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second, std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>())
        : clock_(std::move(clock)) {
        if (!(requests_per_second > 0.0)) throw InputError("rate limit must be positive");
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / requests_per_second));
    }

    void acquire() {
        Clock::time_point slot;
        {
            std::lock_guard lock(mutex_);
            const auto now = clock_->now();
            slot = started_ ? std::max(now, next_) : now;
            started_ = true;
            next_ = slot + interval_;
        }
        clock_->sleep_until(slot);
    }

private:
    std::shared_ptr<Clock> clock_;
    std::chrono::steady_clock::duration interval_{};
    std::mutex mutex_;
    Clock::time_point next_{};
    bool started_ = false;
};

/// Geocodes every entry of `registry` into a new registry. Entries whose
/// provider calls fail after retries keep their previous state.
inline AddressRegistry geocode_registry(const AddressRegistry& registry, ImageryProvider& provider,
                                        const std::string& domestic_country, RateLimiter* limiter, int attempts,
                                        GeocodeReport& report) {
    AddressRegistry out;
    for (const auto& e : registry.entries()) {
        AddressEntry next = e;
        try {
            next = with_retries(
                [&] {
                    if (limiter) limiter->acquire();
                    return geocode(provider, e.address_id, e.raw_address, domestic_country);
                },
                attempts, std::chrono::milliseconds(200));
        } catch (const RetriableError&) {
            report.failures.push_back(e.address_id);
        }
        switch (next.status) {
        case AddressStatus::resolved: ++report.resolved; break;
        case AddressStatus::foreign: ++report.foreign; break;
        case AddressStatus::unresolved: ++report.unresolved; break;
        }
        out.add(std::move(next));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cache

/// cache/<address_id>/<view>.<ext> plus cache/index.jsonl, an append-only
/// journal of CachedImage records in which the last line per key wins. The
/// journal is rewritten without superseded lines when the cache is opened.
class ImageCache {
public:
    explicit ImageCache(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw IoError("cannot create cache '" + root_.string() + "': " + ec.message());
        const auto index = root_ / "index.jsonl";
        std::size_t lines = 0;
        if (std::filesystem::exists(index)) {
            std::ifstream in(index, std::ios::binary);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                try {
                    auto c = cached_image_from_json(nlohmann::json::parse(line));
                    entries_[key(c.address_id, c.view)] = c;
                    ++lines;
                } catch (const nlohmann::json::exception& e) {
                    // An interrupted append leaves at most one torn final line.
                    if (in.peek() == std::char_traits<char>::eof()) {
                        ++lines;
                        break;
                    }
                    throw InputError("'" + index.string() + "': " + e.what());
                }
            }
        }
        if (lines != entries_.size()) {
            std::string body;
            for (const auto& [k, e] : entries_) body += to_json(e).dump() + "\n";
            write_atomically(index, body);
        }
        journal_.open(index, std::ios::binary | std::ios::app);
        if (!journal_) throw IoError("cannot open '" + index.string() + "'");
    }

    const std::filesystem::path& root() const { return root_; }

    std::optional<CachedImage> find(const std::string& address_id, View view) const {
        std::lock_guard lock(index_mutex_);
        auto it = entries_.find(key(address_id, view));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    /// Reads the cached bytes and checks them against the recorded hash.
    std::optional<std::string> read(const CachedImage& c) const {
        if (c.missing) return std::nullopt;
        std::ifstream in(root_ / c.path, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream bytes;
        bytes << in.rdbuf();
        std::string s = bytes.str();
        if (sha256_hex(s) != c.sha256) return std::nullopt;
        return s;
    }

    CachedImage store(const std::string& address_id, View view, const ImageResponse& response,
                      const std::string& provider) {
        CachedImage c{address_id, view, !response.available, "", utc_now_iso(), provider, "", response.content_type};
        if (response.available) {
            c.sha256 = sha256_hex(response.bytes);
            c.path = (std::filesystem::path(address_id) /
                      (std::string(to_string(view)) + "." + extension_for(response.content_type)))
                         .generic_string();
            const auto full = root_ / c.path;
            std::error_code ec;
            std::filesystem::create_directories(full.parent_path(), ec);
            if (ec) throw IoError("cannot create '" + full.parent_path().string() + "': " + ec.message());
            write_atomically(full, response.bytes);
        }
        std::lock_guard lock(index_mutex_);
        journal_ << to_json(c).dump() << '\n';
        journal_.flush();
        if (!journal_) throw IoError("cannot append to '" + (root_ / "index.jsonl").string() + "'");
        entries_[key(address_id, view)] = c;
        return c;
    }

    /// Mutex serializing work on one (address, view).
    std::mutex& key_mutex(const std::string& address_id, View view) {
        std::lock_guard lock(locks_mutex_);
        auto& m = key_locks_[key(address_id, view)];
        if (!m) m = std::make_unique<std::mutex>();
        return *m;
    }

    std::size_t size() const {
        std::lock_guard lock(index_mutex_);
        return entries_.size();
    }

private:
    static std::string key(const std::string& address_id, View view) { return address_id + "/" + to_string(view); }

    static void write_atomically(const std::filesystem::path& path, std::string_view bytes) {
        auto tmp = path;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
    }

    std::filesystem::path root_;
    mutable std::mutex index_mutex_;
    std::map<std::string, CachedImage> entries_;
    std::ofstream journal_;
    std::mutex locks_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> key_locks_;
};

// ---------------------------------------------------------------------------
// Client

struct FetchResult {
    CachedImage image;
    bool from_cache = false;
};

class ImageryClient {
public:
    ImageryClient(ImageryProvider& provider, ImageCache& cache, RateLimiter& limiter)
        : provider_(provider), cache_(cache), limiter_(limiter) {}

    /// Cached entry when present and intact; otherwise one provider call.
    FetchResult fetch_image(const ImageRequest& request) {
        request.validate();
        std::lock_guard lock(cache_.key_mutex(request.address_id, request.view));
        if (auto hit = cache_.find(request.address_id, request.view)) {
            if (hit->missing || cache_.read(*hit)) return {*hit, true};
        }
        limiter_.acquire();
        const auto response = provider_.fetch(request);
        return {cache_.store(request.address_id, request.view, response, provider_.tag()), false};
    }

    struct BatchOutcome {
        std::vector<std::optional<FetchResult>> results; ///< empty where an error occurred
        std::vector<std::string> errors;                 ///< parallel to results
    };

    /// Fetches concurrently with at most `parallelism` requests in flight.
    BatchOutcome fetch_all(const std::vector<ImageRequest>& requests, unsigned parallelism) {
        BatchOutcome out;
        out.results.resize(requests.size());
        out.errors.resize(requests.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < requests.size();) {
                try {
                    out.results[i] = fetch_image(requests[i]);
                } catch (const Error& e) {
                    out.errors[i] = std::string(e.kind()) + ": " + e.what();
                }
            }
        };
        parallelism = std::max(1u, parallelism);
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < parallelism; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        return out;
    }

private:
    ImageryProvider& provider_;
    ImageCache& cache_;
    RateLimiter& limiter_;
};

// ---------------------------------------------------------------------------
// Config

struct ImageryConfig {
    std::string backend = "fixture"; ///< fixture | live
    std::string geocode_fixtures = "geocode_fixtures.csv";
    std::string image_fixtures = "images";
    std::string cache_dir = "cache";
    std::string domestic_country = "PL";
    double requests_per_second = 10.0;
    unsigned parallelism = 4;
    int retry_attempts = 3;
    int width = 640, height = 640;
    double heading = 0.0, pitch = 0.0;
    int zoom = 19;
    LiveProviderConfig live;
};

inline ImageryConfig imagery_config_from_json(const nlohmann::json& j) {
    ImageryConfig c;
    c.backend = j.value("backend", c.backend);
    if (c.backend != "fixture" && c.backend != "live") throw InputError("imagery backend must be 'fixture' or 'live'");
    c.geocode_fixtures = j.value("geocode_fixtures", c.geocode_fixtures);
    c.image_fixtures = j.value("image_fixtures", c.image_fixtures);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.domestic_country = j.value("domestic_country", c.domestic_country);
    c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.retry_attempts = j.value("retry_attempts", c.retry_attempts);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.heading = j.value("heading", c.heading);
    c.pitch = j.value("pitch", c.pitch);
    c.zoom = j.value("zoom", c.zoom);
    if (j.contains("live")) {
        const auto& l = j["live"];
        c.live.geocode_url = l.value("geocode_url", c.live.geocode_url);
        c.live.street_url = l.value("street_url", c.live.street_url);
        c.live.satellite_url = l.value("satellite_url", c.live.satellite_url);
        c.live.key_env = l.value("key_env", c.live.key_env);
        c.live.timeout_seconds = l.value("timeout_seconds", c.live.timeout_seconds);
    }
    return c;
}

/// Provider for `config`, with fixture paths resolved against `base`.
inline std::unique_ptr<ImageryProvider> make_provider(const ImageryConfig& config, const std::filesystem::path& base) {
    if (config.backend == "live") return std::make_unique<LiveProvider>(config.live);
    return std::make_unique<FixtureProvider>(base / config.geocode_fixtures, base / config.image_fixtures);
}

} // namespace streetrisk
