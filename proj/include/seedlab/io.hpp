#ifndef SEEDLAB_IO_HPP
#define SEEDLAB_IO_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seedlab/detectors.hpp"
#include "seedlab/experiments.hpp"
#include "seedlab/pipeline.hpp"

namespace seedlab {

inline constexpr std::array<std::string_view, 24> kCsvColumns = {
    "condition_id", "scheme",       "mode",         "entropy_kind", "gamma",      "delta",
    "alpha",        "b",            "p_act",        "p_min",        "sigma",      "n_tokens",
    "seed",         "z",            "green_fraction", "target_rate", "survival",  "rank_ks",
    "kl_div",       "perplexity_f", "entropy_f",    "repetition",   "loglik_f",   "trigger_count"};

/// Shortest decimal that round-trips; empty for NaN.
inline std::string format_number(double x) {
  if (std::isnan(x)) return {};
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// RFC 4180 field quoting: fields holding a comma, quote or line break are
/// wrapped in quotes with inner quotes doubled.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> row_fields(const ResultRow& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  const auto wm = [&](auto member) {
    return r.watermark ? format_number((*r.watermark).*member) : std::string();
  };
  std::vector<std::string> f = {
      r.condition_id,
      r.watermark ? std::string(to_string(r.watermark->scheme)) : std::string("none"),
      std::string(to_string(r.attack.mode)),
      std::string(to_string(r.entropy)),
      wm(&WatermarkConfig::gamma),
      wm(&WatermarkConfig::delta),
      wm(&WatermarkConfig::alpha),
      format_number(r.attack.boost),
      format_number(r.attack.activation),
      format_number(r.attack.floor),
      std::to_string(r.attack.sigma),
      std::to_string(r.n_tokens),
      std::to_string(r.seed),
      format_number(r.z),
      format_number(r.green_fraction),
      format_number(r.target_rate),
      opt(r.survival)};
  for (std::size_t k = 0; k < kDetectorCount; ++k)
    f.push_back(r.statistics ? format_number((*r.statistics)[k]) : std::string());
  f.push_back(r.trigger_count ? std::to_string(*r.trigger_count) : std::string());
  return f;
}

inline void write_csv_line(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
  os << "\r\n";
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  write_csv_line(os, {kCsvColumns.begin(), kCsvColumns.end()});
  for (const auto& r : rows) write_csv_line(os, row_fields(r));
}

/// Splits RFC 4180 text into records of fields. Accepts CRLF or LF.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json_value(double x) {
  return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x);
}

inline nlohmann::json row_to_json(const ResultRow& r) {
  nlohmann::json j = nlohmann::json::object();
  const auto fields = row_fields(r);
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    const std::string key(kCsvColumns[i]);
    if (i < 4) {
      j[key] = fields[i];
    } else if (fields[i].empty()) {
      j[key] = nullptr;
    } else if (key == "sigma" || key == "n_tokens" || key == "seed") {
      j[key] = std::stoull(fields[i]);
    } else if (key == "trigger_count") {
      j[key] = std::stoi(fields[i]);
    } else {
      j[key] = std::stod(fields[i]);
    }
  }
  return j;
}

inline nlohmann::json rows_to_json(const std::vector<ResultRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back(row_to_json(r));
  return arr;
}

inline nlohmann::json record_to_json(const SequenceRecord& rec) {
  nlohmann::json steps = nlohmann::json::object();
  std::vector<std::uint64_t> seed;
  std::vector<std::uint32_t> rank;
  std::vector<int> green, target, activated;
  std::vector<double> logprob, entropy;
  for (const auto& s : rec.steps) {
    seed.push_back(s.seed);
    rank.push_back(s.rank);
    green.push_back(s.green);
    target.push_back(s.target);
    activated.push_back(s.activated);
    logprob.push_back(s.logprob);
    entropy.push_back(s.entropy);
  }
  steps["seed"] = seed;
  steps["rank"] = rank;
  steps["green"] = green;
  steps["target"] = target;
  steps["activated"] = activated;
  steps["logprob"] = logprob;
  steps["entropy"] = entropy;
  nlohmann::json j;
  j["prompt"] = rec.prompt;
  j["tokens"] = rec.tokens;
  j["has_green"] = rec.has_green;
  j["steps"] = std::move(steps);
  return j;
}

/// Inverse of record_to_json. The config snapshot is not serialized; the
/// caller supplies it.
inline SequenceRecord record_from_json(const nlohmann::json& j, const PipelineConfig& config) {
  SequenceRecord rec;
  rec.config = config;
  try {
    rec.prompt = j.at("prompt").get<Tokens>();
    rec.tokens = j.at("tokens").get<Tokens>();
    rec.has_green = j.at("has_green").get<bool>();
    const auto& s = j.at("steps");
    const auto seed = s.at("seed").get<std::vector<std::uint64_t>>();
    const auto rank = s.at("rank").get<std::vector<std::uint32_t>>();
    const auto green = s.at("green").get<std::vector<int>>();
    const auto target = s.at("target").get<std::vector<int>>();
    const auto activated = s.at("activated").get<std::vector<int>>();
    const auto logprob = s.at("logprob").get<std::vector<double>>();
    const auto entropy = s.at("entropy").get<std::vector<double>>();
    const std::size_t n = rec.tokens.size();
    for (std::size_t len : {seed.size(), rank.size(), green.size(), target.size(), activated.size(),
                            logprob.size(), entropy.size()})
      if (len != n) throw Error("record step arrays differ in length");
    rec.steps.resize(n);
    for (std::size_t t = 0; t < n; ++t)
      rec.steps[t] = {seed[t], rank[t], green[t] != 0, target[t] != 0, activated[t] != 0, logprob[t], entropy[t]};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
  return rec;
}

}  // namespace seedlab

#endif  // SEEDLAB_IO_HPP
