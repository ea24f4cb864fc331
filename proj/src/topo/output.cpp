#include "topo/output.hpp"

#include "topo/common.hpp"
#include "topo/labels.hpp"

namespace topo {

namespace {

double out6(double x) { return round_places(x, 6); }

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error("post record is missing the \"" + std::string(key) + "\" key");
  }
  return j[key];
}

}  // namespace

nlohmann::ordered_json to_json(const PostRecord& record) {
  nlohmann::ordered_json j;
  j["text"] = record.text;

  auto& tokens = j["tokens"] = nlohmann::ordered_json::array();
  for (const WordPrediction& token : record.tokens) {
    nlohmann::ordered_json t;
    t["word"] = token.word;
    t["label"] = label_name(token.label);
    t["confidence"] = out6(token.confidence);
    tokens.push_back(std::move(t));
  }

  auto& toponyms = j["toponyms"] = nlohmann::ordered_json::array();
  for (const ToponymSpan& span : record.toponyms) {
    nlohmann::ordered_json s;
    s["text"] = span.text;
    s["start_char"] = span.start_char;
    s["end_char"] = span.end_char;
    s["confidence"] = out6(span.confidence);
    toponyms.push_back(std::move(s));
  }

  auto& zipcodes = j["zipcodes"] = nlohmann::ordered_json::array();
  for (const ZipMatch& zip : record.zipcodes) {
    nlohmann::ordered_json z;
    z["code"] = zip.code;
    z["start_char"] = zip.start_char;
    z["end_char"] = zip.end_char;
    zipcodes.push_back(std::move(z));
  }

  auto& geocodes = j["geocodes"] = nlohmann::ordered_json::array();
  for (const GeocodeResult& geo : record.geocodes) {
    nlohmann::ordered_json g;
    g["toponym"] = geo.query;
    g["latitude"] = out6(geo.latitude);
    g["longitude"] = out6(geo.longitude);
    g["provider"] = geo.provider;
    g["match_confidence"] = out6(geo.match_confidence);
    geocodes.push_back(std::move(g));
  }
  return j;
}

PostRecord post_record_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("post record is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw Error("post record must be a JSON object");
  }
  PostRecord record;
  record.text = require(j, "text").get<std::string>();

  for (const auto& t : require(j, "tokens")) {
    WordPrediction token;
    token.word = require(t, "word").get<std::string>();
    const std::string name = require(t, "label").get<std::string>();
    token.label = label_id(name);
    if (token.label < 0) {
      throw Error("post record token has unknown label \"" + name + "\"");
    }
    token.confidence = require(t, "confidence").get<double>();
    record.tokens.push_back(std::move(token));
  }

  for (const auto& s : require(j, "toponyms")) {
    ToponymSpan span;
    span.text = require(s, "text").get<std::string>();
    span.start_char = require(s, "start_char").get<std::size_t>();
    span.end_char = require(s, "end_char").get<std::size_t>();
    span.confidence = require(s, "confidence").get<double>();
    record.toponyms.push_back(std::move(span));
  }

  for (const auto& z : require(j, "zipcodes")) {
    ZipMatch zip;
    zip.code = require(z, "code").get<std::string>();
    zip.start_char = require(z, "start_char").get<std::size_t>();
    zip.end_char = require(z, "end_char").get<std::size_t>();
    record.zipcodes.push_back(std::move(zip));
  }

  for (const auto& g : require(j, "geocodes")) {
    GeocodeResult geo;
    geo.query = require(g, "toponym").get<std::string>();
    geo.latitude = require(g, "latitude").get<double>();
    geo.longitude = require(g, "longitude").get<double>();
    geo.provider = require(g, "provider").get<std::string>();
    geo.match_confidence = require(g, "match_confidence").get<double>();
    record.geocodes.push_back(std::move(geo));
  }
  return record;
}

std::vector<PostInput> parse_posts(const std::string& content) {
  std::vector<std::string> lines;
  std::size_t begin = 0;
  while (begin <= content.size()) {
    std::size_t end = content.find('\n', begin);
    if (end == std::string::npos) {
      end = content.size();
    }
    std::string line = content.substr(begin, end - begin);
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
    if (end == content.size()) {
      break;
    }
    begin = end + 1;
  }

  bool ndjson = false;
  for (const std::string& line : lines) {
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    if (line[line.find_first_not_of(" \t")] == '{') {
      const auto probe = nlohmann::json::parse(line, nullptr, false);
      ndjson = probe.is_object() && probe.contains("text");
    }
    break;
  }

  std::vector<PostInput> posts;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    PostInput post;
    if (ndjson) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error("input line " + std::to_string(i + 1) + " is not valid JSON: " + e.what());
      }
      if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
        throw Error("input line " + std::to_string(i + 1) +
                    " must be an object with a \"text\" string");
      }
      post.text = j["text"].get<std::string>();
      post.id = j.contains("id") ? j["id"] : nlohmann::json(i + 1);
      if (j.contains("latitude") && j.contains("longitude")) {
        post.geotag = nlohmann::json::object();
        post.geotag["latitude"] = j["latitude"];
        post.geotag["longitude"] = j["longitude"];
      }
    } else {
      post.text = line;
      post.id = i + 1;
    }
    posts.push_back(std::move(post));
  }
  return posts;
}

std::string ndjson_line(const PostInput& post, const PostRecord& record) {
  nlohmann::ordered_json envelope;
  envelope["id"] = post.id;
  envelope["retained_geotag"] = post.geotag.is_null() ? nlohmann::ordered_json()
                                                      : nlohmann::ordered_json(post.geotag);
  nlohmann::ordered_json body = to_json(record);
  for (auto& [key, value] : body.items()) {
    envelope[key] = std::move(value);
  }
  return envelope.dump();
}

}  // namespace topo
