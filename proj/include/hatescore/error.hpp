#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace hatescore {

/// Base of every exception thrown by the library. `kind()` is a short stable
/// tag used by the CLI when printing machine-parseable error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define HATESCORE_DEFINE_ERROR(Name, tag)                                 \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(tag, message) {}    \
  };

HATESCORE_DEFINE_ERROR(SchemaError, "schema")
HATESCORE_DEFINE_ERROR(CorpusError, "corpus")
HATESCORE_DEFINE_ERROR(LookupError, "lookup")
HATESCORE_DEFINE_ERROR(ValueError, "value")
HATESCORE_DEFINE_ERROR(RegistryError, "registry")
HATESCORE_DEFINE_ERROR(PromptError, "prompt")
HATESCORE_DEFINE_ERROR(PersonaError, "persona")
HATESCORE_DEFINE_ERROR(ConfigError, "config")
HATESCORE_DEFINE_ERROR(CapabilityError, "capability")
HATESCORE_DEFINE_ERROR(CacheCorruptionError, "cache_corruption")
HATESCORE_DEFINE_ERROR(InvalidLabelError, "invalid_label")
HATESCORE_DEFINE_ERROR(ExtractionError, "extraction")
HATESCORE_DEFINE_ERROR(DegenerateInputError, "degenerate_input")
HATESCORE_DEFINE_ERROR(SolverError, "solver")
HATESCORE_DEFINE_ERROR(FoldError, "fold")
HATESCORE_DEFINE_ERROR(AblationError, "ablation")
HATESCORE_DEFINE_ERROR(InputError, "input")
HATESCORE_DEFINE_ERROR(WorldError, "world")
HATESCORE_DEFINE_ERROR(IoError, "io")

#undef HATESCORE_DEFINE_ERROR

/// Transport-level failure after retries are exhausted. Carries the content
/// hash of the prompt so the failing request can be located in logs/caches.
class InferenceError : public Error {
 public:
  InferenceError(const std::string& message, std::string prompt_hash)
      : Error("inference", message + " [prompt " + prompt_hash + "]"),
        prompt_hash_(std::move(prompt_hash)) {}

  const std::string& prompt_hash() const noexcept { return prompt_hash_; }

 private:
  std::string prompt_hash_;
};

/// A single rejected input row.
struct RowError {
  std::size_t row = 0;  // 1-based data row number (header excluded)
  std::string reason;
};

}  // namespace hatescore
