#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "topo/common.hpp"
#include "topo/pipeline.hpp"

namespace topo {

/// Per-query failure: the batch continues and the span gets an error record.
class GeocodeError : public Error {
public:
  using Error::Error;
};

/// Run-level failure: rejected credentials make every further call pointless.
class CredentialsError : public Error {
public:
  using Error::Error;
};

struct GeoCandidate {
  double latitude = 0.0;
  double longitude = 0.0;
  double match_confidence = 1.0;
};

/// One required method: place string in, ranked candidates out. Zero
/// candidates mean "no match"; transport problems throw GeocodeError.
class GeocodeProvider {
public:
  virtual ~GeocodeProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<GeoCandidate> query(const std::string& place) = 0;
};

/// Case-folded (ASCII), whitespace-normalized form used for cache keys and
/// mock lookups.
std::string normalize_place(const std::string& text);

/// Deterministic provider backed by a JSON map:
///   {"houston": {"latitude": 29.76, "longitude": -95.37,
///                "match_confidence": 0.97}}
/// Keys are matched after normalize_place. A value holding {"error": "..."}
/// simulates a transport failure for that place.
class MockGeocoder final : public GeocodeProvider {
public:
  static MockGeocoder from_file(const std::filesystem::path& path);
  static MockGeocoder from_json(const std::string& json_text);

  std::string name() const override { return "mock"; }
  std::vector<GeoCandidate> query(const std::string& place) override;

private:
  struct Entry {
    std::optional<GeoCandidate> candidate;  // empty plus no error = no match
    std::string error;
    bool run_level = false;  // error counts as a credentials failure
  };
  std::map<std::string, Entry> entries_;
};

/// HTTP GET client: base endpoint from configuration, place string as the
/// "q" query parameter, optional key as "key". Expects a JSON body that is
/// either a candidate array or {"results": [...]}, each item carrying
/// latitude/longitude (or lat/lon) and an optional confidence.
class HttpGeocoder final : public GeocodeProvider {
public:
  HttpGeocoder(std::string endpoint, std::string api_key, double timeout_seconds = 10.0);

  std::string name() const override { return "http"; }
  std::vector<GeoCandidate> query(const std::string& place) override;

private:
  std::string endpoint_;
  std::string api_key_;
  double timeout_seconds_;
};

/// Parses a provider response body into candidates. Exposed for tests; the
/// HTTP client calls it on every 200 response.
std::vector<GeoCandidate> parse_geocode_response(const std::string& body);

/// Splits "https://host:port/path?fixed=1" into (scheme://host:port,
/// path-with-query). Throws on anything that is not http(s).
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint);

struct GeocodeResult {
  std::string query;  // the span's surface text
  double latitude = 0.0;
  double longitude = 0.0;
  std::string provider;
  double match_confidence = 0.0;
  bool cached = false;

  bool operator==(const GeocodeResult&) const = default;
};

/// Positive lookups persisted between runs as one JSON map file keyed by
/// normalize_place output.
class GeocodeCache {
public:
  GeocodeCache() = default;
  /// A missing file is an empty cache; a corrupt one is an error.
  static GeocodeCache load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool lookup(const std::string& key, GeocodeResult* out) const;
  void store(const std::string& key, const GeocodeResult& result);
  std::size_t size() const { return entries_.size(); }

private:
  std::map<std::string, GeocodeResult> entries_;
};

/// Injectable time source so the token bucket is testable without sleeping.
class BucketClock {
public:
  virtual ~BucketClock() = default;
  virtual double now() = 0;  // seconds, monotonic
  virtual void sleep(double seconds) = 0;
};

/// Token bucket: capacity tokens, refilled continuously. acquire() blocks
/// through the clock until a token is available.
class TokenBucket {
public:
  TokenBucket(double capacity, double refill_per_second, BucketClock* clock = nullptr);

  bool try_acquire();
  void acquire();
  double available();

private:
  void refill();

  double capacity_;
  double rate_;
  double tokens_;
  double last_;
  BucketClock* clock_;
};

struct GeocodeFailure {
  std::string query;
  std::string reason;

  bool operator==(const GeocodeFailure&) const = default;
};

struct GeocodeOutcome {
  std::vector<GeocodeResult> results;    // one per resolved span, input order
  std::vector<GeocodeFailure> failures;  // one per span that did not resolve
};

/// Resolves each span's text: distinct normalized texts hit the provider at
/// most once per run, repeats and cache hits are flagged cached, failures
/// are recorded without stopping the batch. CredentialsError propagates.
GeocodeOutcome geocode(const std::vector<ToponymSpan>& spans, GeocodeProvider& provider,
                       GeocodeCache& cache, TokenBucket& limiter);

}  // namespace topo
