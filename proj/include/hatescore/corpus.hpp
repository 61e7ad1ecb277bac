#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatescore/attributes.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"

namespace hatescore {

/// Maps logical corpus fields to column names in the input file. Defaults
/// follow the flat column names of the public Measuring Hate Speech release.
struct CorpusSchema {
  std::string comment_id = "comment_id";
  std::string text = "text";
  std::string annotator_id = "annotator_id";
  std::string hate_score = "hate_speech_score";
  PerAttribute<std::string> attributes = [] {
    PerAttribute<std::string> names;
    for (const auto& s : registry()) names[index_of(s.id)] = std::string(s.name);
    return names;
  }();
  std::string gender = "annotator_gender";
  std::string age = "annotator_age";
  std::string race = "annotator_race";
  std::string religion = "annotator_religion";
  std::string ideology = "annotator_ideology";
  // Optional; when empty the category is derived from `age` and the cutoff.
  std::string age_category;
  int old_age_cutoff = 40;  // age >= cutoff is "old"
  char delimiter = ',';

  /// Column names in canonical serialization order.
  std::vector<std::string> columns() const {
    std::vector<std::string> cols{comment_id, text, annotator_id};
    cols.insert(cols.end(), attributes.begin(), attributes.end());
    cols.insert(cols.end(), {hate_score, gender, age, race, religion, ideology});
    if (!age_category.empty()) cols.push_back(age_category);
    return cols;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["comment_id"] = comment_id;
    j["text"] = text;
    j["annotator_id"] = annotator_id;
    j["hate_score"] = hate_score;
    for (const auto& s : registry()) j["attributes"][std::string(s.name)] = attributes[index_of(s.id)];
    j["gender"] = gender;
    j["age"] = age;
    j["race"] = race;
    j["religion"] = religion;
    j["ideology"] = ideology;
    j["age_category"] = age_category;
    j["old_age_cutoff"] = old_age_cutoff;
    j["delimiter"] = std::string(1, delimiter);
    return j;
  }

  /// Overlays any keys present in `j` on the defaults.
  static CorpusSchema from_json(const nlohmann::json& j) {
    CorpusSchema s;
    auto take = [&](const char* key, std::string& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::string>();
    };
    try {
      take("comment_id", s.comment_id);
      take("text", s.text);
      take("annotator_id", s.annotator_id);
      take("hate_score", s.hate_score);
      take("gender", s.gender);
      take("age", s.age);
      take("race", s.race);
      take("religion", s.religion);
      take("ideology", s.ideology);
      take("age_category", s.age_category);
      if (j.contains("old_age_cutoff")) s.old_age_cutoff = j.at("old_age_cutoff").get<int>();
      if (j.contains("delimiter")) {
        auto d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw SchemaError("delimiter must be a single character");
        s.delimiter = d[0];
      }
      if (j.contains("attributes")) {
        for (const auto& [name, col] : j.at("attributes").items())
          s.attributes[index_of(attribute_from_name(name))] = col.get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed schema: ") + e.what());
    }
    return s;
  }

  static CorpusSchema from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
    }
  }
};

struct AnnotatorProfile {
  std::string annotator_id;
  std::string gender;
  std::optional<int> age;
  std::string age_category;  // "old" or "young"
  std::string race;
  std::string religion;
  std::string ideology;

  /// All five demographic fields present; required for persona prompting.
  bool complete() const noexcept {
    return !gender.empty() && age.has_value() && !age_category.empty() && !race.empty() &&
           !religion.empty() && !ideology.empty();
  }
};

/// One annotator's ratings of one comment. Absent values were blank cells.
struct AnnotatorRatings {
  std::string annotator_id;
  PerAttribute<std::optional<int>> values;
};

struct CommentRecord {
  std::string comment_id;
  std::string text;
  double hate_score = 0.0;  // IRT score, read from the corpus
  std::vector<AnnotatorRatings> ratings;

  const AnnotatorRatings* find_ratings(std::string_view annotator_id) const noexcept {
    for (const auto& r : ratings)
      if (r.annotator_id == annotator_id) return &r;
    return nullptr;
  }
};

/// An accepted input row, kept verbatim (schema column order) so the corpus
/// can be re-serialized exactly.
struct CorpusRow {
  std::size_t row = 0;
  std::vector<std::string> fields;
};

struct ValidationReport {
  std::size_t rows_read = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t incomplete_profiles = 0;
  std::size_t hate_score_mismatches = 0;
  std::map<std::string, std::size_t> error_tallies;
  std::vector<RowError> errors;

  std::string to_text() const {
    std::ostringstream os;
    os << "rows_read: " << rows_read << "\n"
       << "accepted: " << accepted << "\n"
       << "rejected: " << rejected << "\n"
       << "incomplete_profiles: " << incomplete_profiles << "\n"
       << "hate_score_mismatches: " << hate_score_mismatches << "\n";
    for (const auto& [kind, n] : error_tallies) os << "error." << kind << ": " << n << "\n";
    for (const auto& e : errors) os << "row " << e.row << ": " << e.reason << "\n";
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"rows_read", rows_read},
                     {"accepted", accepted},
                     {"rejected", rejected},
                     {"incomplete_profiles", incomplete_profiles},
                     {"hate_score_mismatches", hate_score_mismatches},
                     {"error_tallies", error_tallies}};
    j["errors"] = nlohmann::json::array();
    for (const auto& e : errors) j["errors"].push_back({{"row", e.row}, {"reason", e.reason}});
    return j;
  }
};

/// Immutable, indexed view of a loaded corpus. Comments iterate in
/// lexicographic comment-id order; annotators in annotator-id order.
class Corpus {
 public:
  const std::vector<CommentRecord>& comments() const noexcept { return comments_; }
  const std::vector<AnnotatorProfile>& annotators() const noexcept { return annotators_; }
  const std::vector<CorpusRow>& rows() const noexcept { return rows_; }
  const ValidationReport& report() const noexcept { return report_; }
  const CorpusSchema& schema() const noexcept { return schema_; }

  std::size_t comment_count() const noexcept { return comments_.size(); }
  std::size_t annotator_count() const noexcept { return annotators_.size(); }

  const CommentRecord* find_comment(std::string_view id) const {
    auto it = comment_index_.find(std::string(id));
    return it == comment_index_.end() ? nullptr : &comments_[it->second];
  }
  const CommentRecord& comment(std::string_view id) const {
    if (const auto* c = find_comment(id)) return *c;
    throw LookupError("unknown comment_id '" + std::string(id) + "'");
  }
  const AnnotatorProfile* find_annotator(std::string_view id) const {
    auto it = annotator_index_.find(std::string(id));
    return it == annotator_index_.end() ? nullptr : &annotators_[it->second];
  }
  const AnnotatorProfile& annotator(std::string_view id) const {
    if (const auto* a = find_annotator(id)) return *a;
    throw LookupError("unknown annotator_id '" + std::string(id) + "'");
  }

 private:
  friend Corpus load_corpus(std::istream& in, const CorpusSchema& schema);

  CorpusSchema schema_;
  std::vector<CommentRecord> comments_;
  std::vector<AnnotatorProfile> annotators_;
  std::vector<CorpusRow> rows_;
  std::unordered_map<std::string, std::size_t> comment_index_;
  std::unordered_map<std::string, std::size_t> annotator_index_;
  ValidationReport report_;
};

namespace detail {

inline std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc{} && p == s.data() + s.size()) return v;
  // Accept integral floats such as "3.0", which some exports produce.
  double d = 0;
  auto [p2, ec2] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec2 == std::errc{} && p2 == s.data() + s.size() && std::isfinite(d) && d == std::floor(d))
    return static_cast<long long>(d);
  return std::nullopt;
}

inline std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double d = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return d;
}

}  // namespace detail

inline bool binary_ground_truth(double hate_score) {
  if (!std::isfinite(hate_score)) throw ValueError("hate score is not finite");
  return hate_score > 0.5;
}

/// Loads and validates a corpus of (comment, annotator) rows.
inline Corpus load_corpus(std::istream& in, const CorpusSchema& schema) {
  DelimitedReader reader(in, schema.delimiter);
  std::vector<std::string> header;
  if (!reader.next(header) || (header.size() == 1 && trim(header[0]).empty()))
    throw CorpusError("corpus file is empty");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  const auto wanted = schema.columns();
  std::vector<std::size_t> col;  // canonical position -> file column
  col.reserve(wanted.size());
  for (const auto& name : wanted) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == name; });
    if (it == header.end()) throw SchemaError("missing required column '" + name + "'");
    col.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  constexpr std::size_t kId = 0, kText = 1, kAnnot = 2, kAttr0 = 3;
  constexpr std::size_t kScore = kAttr0 + kAttributeCount;
  constexpr std::size_t kGender = kScore + 1, kAge = kScore + 2, kRace = kScore + 3,
                        kReligion = kScore + 4, kIdeology = kScore + 5, kAgeCat = kScore + 6;

  Corpus corpus;
  corpus.schema_ = schema;
  auto& report = corpus.report_;
  std::map<std::string, CommentRecord> by_comment;
  std::map<std::string, AnnotatorProfile> by_annotator;

  auto reject = [&](std::size_t row, const std::string& kind, const std::string& reason) {
    ++report.rejected;
    ++report.error_tallies[kind];
    report.errors.push_back({row, reason});
  };

  std::vector<std::string> fields;
  std::size_t row = 0;
  while (true) {
    try {
      if (!reader.next(fields)) break;
    } catch (const InputError& e) {
      ++row;
      ++report.rows_read;
      reject(row, "unparseable", e.what());
      break;
    }
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    ++row;
    ++report.rows_read;
    if (fields.size() != header.size()) {
      reject(row, "field_count",
             "expected " + std::to_string(header.size()) + " fields, found " +
                 std::to_string(fields.size()));
      continue;
    }
    CorpusRow kept{row, {}};
    kept.fields.reserve(wanted.size());
    for (auto c : col) kept.fields.push_back(fields[c]);
    const auto& f = kept.fields;

    std::string comment_id(trim(f[kId]));
    std::string annotator_id(trim(f[kAnnot]));
    if (comment_id.empty()) {
      reject(row, "missing_id", "empty comment id");
      continue;
    }
    if (annotator_id.empty()) {
      reject(row, "missing_id", "empty annotator id");
      continue;
    }
    auto score = detail::parse_real(f[kScore]);
    if (!score) {
      reject(row, "unparseable", "hate score '" + f[kScore] + "' is not a number");
      continue;
    }
    if (!std::isfinite(*score)) {
      reject(row, "non_finite", "hate score is not finite");
      continue;
    }

    AnnotatorRatings ratings{annotator_id, {}};
    std::string bad;
    std::string bad_kind;
    for (std::size_t a = 0; a < kAttributeCount && bad.empty(); ++a) {
      const auto& cell = f[kAttr0 + a];
      const auto& as = registry()[a];
      if (trim(cell).empty()) continue;
      auto v = detail::parse_integer(cell);
      if (!v) {
        bad_kind = "unparseable";
        bad = std::string(as.name) + " value '" + cell + "' is not an integer";
      } else if (*v < 0 || *v > as.scale_max) {
        bad_kind = "out_of_range";
        bad = std::string(as.name) + " value " + std::to_string(*v) + " outside 0.." +
              std::to_string(as.scale_max);
      } else {
        ratings.values[a] = static_cast<int>(*v);
      }
    }
    if (!bad.empty()) {
      reject(row, bad_kind, bad);
      continue;
    }

    auto [it, inserted] = by_comment.try_emplace(comment_id);
    auto& rec = it->second;
    if (inserted) {
      rec.comment_id = comment_id;
      rec.text = f[kText];
      rec.hate_score = *score;
    } else {
      if (rec.find_ratings(annotator_id)) {
        reject(row, "duplicate", "duplicate ratings for comment '" + comment_id +
                                     "' by annotator '" + annotator_id + "'");
        continue;
      }
      if (rec.hate_score != *score) ++report.hate_score_mismatches;
    }
    rec.ratings.push_back(std::move(ratings));

    if (!by_annotator.contains(annotator_id)) {
      AnnotatorProfile p;
      p.annotator_id = annotator_id;
      p.gender = std::string(trim(f[kGender]));
      if (auto age = detail::parse_integer(f[kAge])) p.age = static_cast<int>(*age);
      p.race = std::string(trim(f[kRace]));
      p.religion = std::string(trim(f[kReligion]));
      p.ideology = std::string(trim(f[kIdeology]));
      if (!schema.age_category.empty())
        p.age_category = std::string(trim(f[kAgeCat]));
      else if (p.age)
        p.age_category = *p.age >= schema.old_age_cutoff ? "old" : "young";
      if (!p.complete()) ++report.incomplete_profiles;
      by_annotator.emplace(annotator_id, std::move(p));
    }
    ++report.accepted;
    corpus.rows_.push_back(std::move(kept));
  }

  if (report.accepted == 0)
    throw CorpusError("corpus contains no valid rows (" + std::to_string(report.rejected) +
                      " rejected)");

  corpus.comments_.reserve(by_comment.size());
  for (auto& [id, rec] : by_comment) {
    corpus.comment_index_.emplace(id, corpus.comments_.size());
    corpus.comments_.push_back(std::move(rec));
  }
  corpus.annotators_.reserve(by_annotator.size());
  for (auto& [id, p] : by_annotator) {
    corpus.annotator_index_.emplace(id, corpus.annotators_.size());
    corpus.annotators_.push_back(std::move(p));
  }
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, const CorpusSchema& schema = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  return load_corpus(in, schema);
}

/// Writes the accepted rows back out, header first, in original row order.
inline void write_corpus(const Corpus& corpus, std::ostream& out) {
  const char d = corpus.schema().delimiter;
  write_record(out, corpus.schema().columns(), d);
  for (const auto& r : corpus.rows()) write_record(out, r.fields, d);
}

/// Per-attribute mean of the comment's human ratings; attributes nobody
/// rated are empty.
inline PerAttribute<std::optional<double>> mean_human_ratings(const CommentRecord& comment) {
  PerAttribute<std::optional<double>> out;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    double sum = 0;
    int n = 0;
    for (const auto& r : comment.ratings) {
      if (r.values[a]) {
        sum += *r.values[a];
        ++n;
      }
    }
    if (n > 0) out[a] = sum / n;
  }
  return out;
}

inline PerAttribute<std::optional<double>> mean_human_ratings(const Corpus& corpus,
                                                              std::string_view comment_id) {
  return mean_human_ratings(corpus.comment(comment_id));
}

}  // namespace hatescore
