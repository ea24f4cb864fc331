#include "topo/geocoder.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#ifdef TOPO_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace topo {

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

double read_number(const nlohmann::json& item, std::initializer_list<const char*> names,
                   const double* fallback) {
  for (const char* name : names) {
    if (item.contains(name) && item[name].is_number()) {
      return item[name].get<double>();
    }
  }
  if (fallback != nullptr) {
    return *fallback;
  }
  throw GeocodeError("geocoder response item lacks a numeric " +
                     std::string(*names.begin()) + " field");
}

std::string percent_encode(const std::string& value) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : value) {
    const bool plain = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                       (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.' || c == '~';
    if (plain) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

class SteadyClock final : public BucketClock {
public:
  double now() override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
  void sleep(double seconds) override {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }
};

BucketClock* steady_clock_instance() {
  static SteadyClock clock;
  return &clock;
}

bool in_range(const GeoCandidate& c) {
  return c.latitude >= -90.0 && c.latitude <= 90.0 && c.longitude >= -180.0 &&
         c.longitude <= 180.0;
}

}  // namespace

std::string normalize_place(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (is_space_byte(c)) {
      if (!out.empty() && out.back() != ' ') {
        out.push_back(' ');
      }
    } else if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      out.push_back(c);
    }
  }
  while (!out.empty() && out.back() == ' ') {
    out.pop_back();
  }
  return out;
}

MockGeocoder MockGeocoder::from_file(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

MockGeocoder MockGeocoder::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("mock geocoder map is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw Error("mock geocoder map must be a JSON object");
  }
  MockGeocoder mock;
  for (const auto& [place, value] : j.items()) {
    if (!value.is_object()) {
      throw Error("mock geocoder entry for \"" + place + "\" must be an object");
    }
    Entry entry;
    if (value.contains("error")) {
      if (!value["error"].is_string()) {
        throw Error("mock geocoder entry for \"" + place + "\" has a non-string error");
      }
      entry.error = value["error"].get<std::string>();
      entry.run_level = value.value("run_level", false);
    } else {
      if (!value.contains("latitude") || !value["latitude"].is_number() ||
          !value.contains("longitude") || !value["longitude"].is_number()) {
        throw Error("mock geocoder entry for \"" + place +
                    "\" needs numeric latitude and longitude");
      }
      GeoCandidate c;
      c.latitude = value["latitude"].get<double>();
      c.longitude = value["longitude"].get<double>();
      c.match_confidence = value.value("match_confidence", 1.0);
      entry.candidate = c;
    }
    mock.entries_[normalize_place(place)] = std::move(entry);
  }
  return mock;
}

std::vector<GeoCandidate> MockGeocoder::query(const std::string& place) {
  const auto it = entries_.find(normalize_place(place));
  if (it == entries_.end()) {
    return {};
  }
  if (!it->second.error.empty()) {
    if (it->second.run_level) {
      throw CredentialsError(it->second.error);
    }
    throw GeocodeError(it->second.error);
  }
  return {*it->second.candidate};
}

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  std::size_t host_begin = 0;
  if (endpoint.rfind("http://", 0) == 0) {
    host_begin = 7;
  } else if (endpoint.rfind("https://", 0) == 0) {
    host_begin = 8;
  } else {
    throw Error("geocoder endpoint must start with http:// or https://: " + endpoint);
  }
  const std::size_t path_begin = endpoint.find('/', host_begin);
  if (path_begin == std::string::npos) {
    return {endpoint, "/"};
  }
  if (path_begin == host_begin) {
    throw Error("geocoder endpoint has an empty host: " + endpoint);
  }
  return {endpoint.substr(0, path_begin), endpoint.substr(path_begin)};
}

std::vector<GeoCandidate> parse_geocode_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw GeocodeError(std::string("geocoder response is not valid JSON: ") + e.what());
  }
  const nlohmann::json* items = &j;
  if (j.is_object()) {
    if (!j.contains("results") || !j["results"].is_array()) {
      throw GeocodeError("geocoder response object lacks a results array");
    }
    items = &j["results"];
  } else if (!j.is_array()) {
    throw GeocodeError("geocoder response must be an array or a results object");
  }
  std::vector<GeoCandidate> candidates;
  for (const auto& item : *items) {
    if (!item.is_object()) {
      throw GeocodeError("geocoder response item is not an object");
    }
    GeoCandidate c;
    c.latitude = read_number(item, {"latitude", "lat"}, nullptr);
    c.longitude = read_number(item, {"longitude", "lon", "lng"}, nullptr);
    const double one = 1.0;
    c.match_confidence = read_number(item, {"match_confidence", "confidence"}, &one);
    candidates.push_back(c);
  }
  return candidates;
}

HttpGeocoder::HttpGeocoder(std::string endpoint, std::string api_key, double timeout_seconds)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  split_endpoint(endpoint_);  // validate eagerly
}

std::vector<GeoCandidate> HttpGeocoder::query(const std::string& place) {
  const auto [base, path] = split_endpoint(endpoint_);
#ifndef TOPO_HAVE_OPENSSL
  if (base.rfind("https://", 0) == 0) {
    throw GeocodeError("geocoder endpoint needs TLS but the build lacks OpenSSL");
  }
#endif
  std::string full = path;
  full += (path.find('?') == std::string::npos) ? '?' : '&';
  full += "q=" + percent_encode(place);
  if (!api_key_.empty()) {
    full += "&key=" + percent_encode(api_key_);
  }

  httplib::Client client(base);
  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::duration<double>(timeout_seconds_));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);

  const httplib::Result res = client.Get(full);
  if (!res) {
    throw GeocodeError("geocoder transport error: " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw CredentialsError("geocoder rejected the credentials (HTTP " +
                           std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    throw GeocodeError("geocoder returned HTTP " + std::to_string(res->status));
  }
  return parse_geocode_response(res->body);
}

GeocodeCache GeocodeCache::load(const std::filesystem::path& path) {
  GeocodeCache cache;
  if (!std::filesystem::exists(path)) {
    return cache;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("geocode cache " + path.string() + " is corrupt: " + e.what());
  }
  if (!j.is_object()) {
    throw Error("geocode cache " + path.string() + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    GeocodeResult r;
    try {
      r.latitude = value.at("latitude").get<double>();
      r.longitude = value.at("longitude").get<double>();
      r.provider = value.at("provider").get<std::string>();
      r.match_confidence = value.at("match_confidence").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error("geocode cache " + path.string() + " is corrupt: entry \"" + key + "\": " +
                  e.what());
    }
    cache.entries_[key] = std::move(r);
  }
  return cache;
}

void GeocodeCache::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, r] : entries_) {
    nlohmann::ordered_json entry;
    entry["latitude"] = r.latitude;
    entry["longitude"] = r.longitude;
    entry["provider"] = r.provider;
    entry["match_confidence"] = r.match_confidence;
    j[key] = std::move(entry);
  }
  write_text_file(path, j.dump(2) + "\n");
}

bool GeocodeCache::lookup(const std::string& key, GeocodeResult* out) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    return false;
  }
  if (out != nullptr) {
    *out = it->second;
  }
  return true;
}

void GeocodeCache::store(const std::string& key, const GeocodeResult& result) {
  GeocodeResult stored = result;
  stored.query.clear();  // keys carry the identity; surfaces vary per span
  stored.cached = false;
  entries_[key] = std::move(stored);
}

TokenBucket::TokenBucket(double capacity, double refill_per_second, BucketClock* clock)
    : capacity_(capacity),
      rate_(refill_per_second),
      tokens_(capacity),
      clock_(clock != nullptr ? clock : steady_clock_instance()) {
  if (capacity_ < 1.0 || rate_ <= 0.0) {
    throw Error("token bucket needs capacity >= 1 and a positive refill rate");
  }
  last_ = clock_->now();
}

void TokenBucket::refill() {
  const double now = clock_->now();
  if (now > last_) {
    tokens_ = std::min(capacity_, tokens_ + (now - last_) * rate_);
  }
  last_ = now;
}

bool TokenBucket::try_acquire() {
  refill();
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void TokenBucket::acquire() {
  while (!try_acquire()) {
    clock_->sleep((1.0 - tokens_) / rate_);
  }
}

double TokenBucket::available() {
  refill();
  return tokens_;
}

GeocodeOutcome geocode(const std::vector<ToponymSpan>& spans, GeocodeProvider& provider,
                       GeocodeCache& cache, TokenBucket& limiter) {
  GeocodeOutcome out;
  struct RunEntry {
    bool resolved = false;
    GeocodeResult result;
    std::string reason;
  };
  std::map<std::string, RunEntry> run;  // normalized text -> outcome this run

  for (const ToponymSpan& span : spans) {
    const std::string key = normalize_place(span.text);
    auto it = run.find(key);
    bool fresh_call = false;
    if (it == run.end()) {
      RunEntry entry;
      if (cache.lookup(key, &entry.result)) {
        entry.resolved = true;
      } else {
        try {
          limiter.acquire();
          const std::vector<GeoCandidate> candidates = provider.query(span.text);
          if (candidates.empty()) {
            entry.reason = "no match";
          } else if (!in_range(candidates.front())) {
            entry.reason = "provider returned out-of-range coordinates";
          } else {
            const GeoCandidate& top = candidates.front();
            entry.resolved = true;
            entry.result.latitude = top.latitude;
            entry.result.longitude = top.longitude;
            entry.result.provider = provider.name();
            entry.result.match_confidence = top.match_confidence;
            cache.store(key, entry.result);
            fresh_call = true;
          }
        } catch (const GeocodeError& e) {
          entry.reason = e.what();
        }
      }
      it = run.emplace(key, std::move(entry)).first;
    }

    if (it->second.resolved) {
      GeocodeResult r = it->second.result;
      r.query = span.text;
      r.cached = !fresh_call;
      out.results.push_back(std::move(r));
    } else {
      out.failures.push_back({span.text, it->second.reason});
    }
  }
  return out;
}

}  // namespace topo
