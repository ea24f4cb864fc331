#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topo/geocoder.hpp"
#include "topo/pipeline.hpp"

namespace topo {

/// Everything one post's document carries.
struct PostRecord {
  std::string text;  // the raw input text; all offsets refer to it
  std::vector<WordPrediction> tokens;
  std::vector<ToponymSpan> toponyms;
  std::vector<ZipMatch> zipcodes;
  std::vector<GeocodeResult> geocodes;
};

/// Fixed document schema, stable key order, floats rounded to 6 decimal
/// places:
///   {"text", "tokens":[{"word","label","confidence"}],
///    "toponyms":[{"text","start_char","end_char","confidence"}],
///    "zipcodes":[{"code","start_char","end_char"}],
///    "geocodes":[{"toponym","latitude","longitude","provider",
///                 "match_confidence"}]}
nlohmann::ordered_json to_json(const PostRecord& record);

/// Inverse of to_json up to what the schema carries: toponym word_labels
/// and geocode cached flags are not serialized and come back empty/false.
PostRecord post_record_from_json(const std::string& json_text);

/// One input post. id and geotag are arbitrary JSON values copied verbatim
/// from the input record so they pass through untouched.
struct PostInput {
  nlohmann::json id;
  std::string text;
  nlohmann::json geotag;  // null, or {"latitude":..., "longitude":...}
};

/// Accepts either newline-delimited JSON records {"id","text", optional
/// "latitude"/"longitude"} or plain text with one post per line (ids become
/// 1-based line numbers). The format is sniffed from the first non-blank
/// line.
std::vector<PostInput> parse_posts(const std::string& content);

/// Output envelope: {"id", "retained_geotag", <document schema>} as a
/// single NDJSON line without the trailing newline.
std::string ndjson_line(const PostInput& post, const PostRecord& record);

}  // namespace topo
