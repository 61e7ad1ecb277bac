#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "hatescore/corpus.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/stats.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "hatescore_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct Row {
  std::string comment_id;
  std::string annotator_id;
  std::vector<std::string> values;  // ten cells in registry order
  double score = 0.0;
  std::string text = "some comment";
  std::string gender = "woman";
  std::string age = "35";
  std::string race = "white";
  std::string religion = "nothing";
  std::string ideology = "liberal";
};

inline std::vector<std::string> cells(std::initializer_list<int> v) {
  std::vector<std::string> out;
  for (int x : v) out.push_back(std::to_string(x));
  return out;
}

inline std::vector<std::string> fields_of(const Row& r) {
  std::vector<std::string> f{r.comment_id, r.text, r.annotator_id};
  f.insert(f.end(), r.values.begin(), r.values.end());
  f.insert(f.end(), {hatescore::format_exact(r.score), r.gender, r.age, r.race, r.religion, r.ideology});
  return f;
}

/// Corpus text in the default schema.
inline std::string corpus_text(const std::vector<Row>& rows) {
  std::ostringstream os;
  hatescore::write_record(os, hatescore::CorpusSchema{}.columns());
  for (const auto& r : rows) hatescore::write_record(os, fields_of(r));
  return os.str();
}

inline hatescore::Corpus load(const std::string& text, const hatescore::CorpusSchema& schema = {}) {
  std::istringstream in(text);
  return hatescore::load_corpus(in, schema);
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil
