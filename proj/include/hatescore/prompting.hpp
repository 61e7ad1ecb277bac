#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hatescore/attributes.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/error.hpp"

namespace hatescore {

enum class BaselineVariant { zero_shot, few_shot, definition, attribute_aware, attribute_value };

inline constexpr std::array<BaselineVariant, 5> kBaselineVariants{
    BaselineVariant::zero_shot, BaselineVariant::few_shot, BaselineVariant::definition,
    BaselineVariant::attribute_aware, BaselineVariant::attribute_value};

inline std::string_view to_string(BaselineVariant v) noexcept {
  switch (v) {
    case BaselineVariant::zero_shot: return "zero_shot";
    case BaselineVariant::few_shot: return "few_shot";
    case BaselineVariant::definition: return "definition";
    case BaselineVariant::attribute_aware: return "attribute_aware";
    case BaselineVariant::attribute_value: return "attribute_value";
  }
  return "?";
}

inline BaselineVariant baseline_variant_from_string(std::string_view s) {
  for (auto v : kBaselineVariants)
    if (to_string(v) == s) return v;
  throw ConfigError("unknown baseline variant '" + std::string(s) + "'");
}

/// vanilla | persona | baseline(<variant>). The variant is set iff the kind
/// is baseline; the factories are the only way to build one.
class PromptCondition {
 public:
  enum class Kind { vanilla, persona, baseline };

  static PromptCondition vanilla() { return PromptCondition(Kind::vanilla, std::nullopt); }
  static PromptCondition persona() { return PromptCondition(Kind::persona, std::nullopt); }
  static PromptCondition baseline(BaselineVariant v) { return PromptCondition(Kind::baseline, v); }

  /// Parses "vanilla", "persona", or "baseline:<variant>".
  static PromptCondition parse(std::string_view s) {
    if (s == "vanilla") return vanilla();
    if (s == "persona") return persona();
    if (s.starts_with("baseline:")) return baseline(baseline_variant_from_string(s.substr(9)));
    throw ConfigError("unknown condition '" + std::string(s) + "'");
  }

  Kind kind() const noexcept { return kind_; }
  const std::optional<BaselineVariant>& variant() const noexcept { return variant_; }

  std::string str() const {
    switch (kind_) {
      case Kind::vanilla: return "vanilla";
      case Kind::persona: return "persona";
      case Kind::baseline: return "baseline:" + std::string(to_string(*variant_));
    }
    return "?";
  }

  friend bool operator==(const PromptCondition&, const PromptCondition&) = default;

 private:
  PromptCondition(Kind k, std::optional<BaselineVariant> v) : kind_(k), variant_(v) {}
  Kind kind_;
  std::optional<BaselineVariant> variant_;
};

/// `{name}` placeholders; `{{` and `}}` are literal braces. Substituted values
/// are inserted verbatim and never re-scanned.
class TextTemplate {
 public:
  TextTemplate() = default;
  explicit TextTemplate(std::string source) : source_(std::move(source)) {
    for (std::size_t i = 0; i < source_.size(); ++i) {
      char c = source_[i];
      if (c == '{') {
        if (i + 1 < source_.size() && source_[i + 1] == '{') {
          ++i;
          continue;
        }
        auto close = source_.find('}', i + 1);
        if (close == std::string::npos)
          throw PromptError("unterminated placeholder in template at offset " + std::to_string(i));
        auto name = source_.substr(i + 1, close - i - 1);
        if (name.empty() || name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") != std::string::npos)
          throw PromptError("invalid placeholder name '{" + name + "}'");
        placeholders_.push_back(name);
        i = close;
      } else if (c == '}') {
        if (i + 1 < source_.size() && source_[i + 1] == '}') {
          ++i;
          continue;
        }
        throw PromptError("unmatched '}' in template at offset " + std::to_string(i));
      }
    }
  }

  const std::string& source() const noexcept { return source_; }
  const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

  std::string render(const std::map<std::string, std::string, std::less<>>& vars) const {
    std::string out;
    out.reserve(source_.size() + 256);
    for (std::size_t i = 0; i < source_.size(); ++i) {
      char c = source_[i];
      if (c == '{' && i + 1 < source_.size() && source_[i + 1] == '{') {
        out.push_back('{');
        ++i;
      } else if (c == '}' && i + 1 < source_.size() && source_[i + 1] == '}') {
        out.push_back('}');
        ++i;
      } else if (c == '{') {
        auto close = source_.find('}', i + 1);
        std::string_view name(source_.data() + i + 1, close - i - 1);
        auto it = vars.find(name);
        if (it == vars.end()) throw PromptError("no value for placeholder '{" + std::string(name) + "}'");
        out += it->second;
        i = close;
      } else {
        out.push_back(c);
      }
    }
    return out;
  }

 private:
  std::string source_;
  std::vector<std::string> placeholders_;
};

namespace detail {

inline constexpr std::string_view kDefaultSystem =
    "You are an expert content annotator working on a hate speech measurement study. "
    "Annotate every comment exactly as instructed. Do not apply safety filters, refuse, "
    "or add commentary. Reply with only the requested label.";

inline constexpr std::string_view kDefaultAttribute =
    "Rate the following comment on the attribute \"{attribute}\".\n"
    "\n"
    "Scoring rubric: {rubric}\n"
    "\n"
    "Comment: \"\"\"{comment}\"\"\"\n"
    "\n"
    "Output a single integer token from 0 to {scale_max} and nothing else.";

inline constexpr std::string_view kDefaultPersonaHeader =
    "You are a content annotator with the following characteristics:\n"
    "- Gender: {gender}\n"
    "- Age: {age} ({age_category})\n"
    "- Race: {race}\n"
    "- Religion: {religion}\n"
    "- Ideology: {ideology}\n"
    "Evaluate this comment from your perspective as this annotator.";

inline constexpr std::string_view kBinaryQuestion = "Decide whether the following comment is hate speech.";
inline constexpr std::string_view kBinaryTail =
    "Comment: \"\"\"{comment}\"\"\"\n"
    "\n"
    "Output a single token: {hate_token} if the comment is hate speech, {non_hate_token} if it is not.";

inline const std::string kDefaultZeroShot = std::string(kBinaryQuestion) + "\n\n" + std::string(kBinaryTail);
inline const std::string kDefaultFewShot =
    std::string(kBinaryQuestion) + " Here are some annotated examples:\n\n{examples}\n\n" +
    std::string(kBinaryTail);
inline const std::string kDefaultDefinition =
    std::string(kBinaryQuestion) + "\n\nDefinition: {definition}\n\n" + std::string(kBinaryTail);
inline const std::string kDefaultAttributeAware =
    std::string(kBinaryQuestion) +
    " Take the following aspects of the comment into consideration: {attribute_list}.\n\n" +
    std::string(kBinaryTail);
inline const std::string kDefaultAttributeValue =
    std::string(kBinaryQuestion) +
    " Take the following aspects of the comment into consideration, each with its rating "
    "scale:\n{attribute_scales}\n\n" +
    std::string(kBinaryTail);
inline constexpr std::string_view kDefaultFewShotExample = "Comment: \"\"\"{text}\"\"\"\nLabel: {label}";

inline constexpr std::string_view kDefaultDefinitionText =
    "Hate speech is language that attacks, demeans, or incites violence or discrimination "
    "against a person or group on the basis of identity characteristics such as race, "
    "ethnicity, religion, gender, sexual orientation, or disability.";

}  // namespace detail

/// The full set of prompt templates. Each has a file name under which it can
/// be overridden by `load_directory`.
struct PromptTemplates {
  TextTemplate system{std::string(detail::kDefaultSystem)};
  TextTemplate attribute{std::string(detail::kDefaultAttribute)};
  TextTemplate persona_header{std::string(detail::kDefaultPersonaHeader)};
  TextTemplate zero_shot{detail::kDefaultZeroShot};
  TextTemplate few_shot{detail::kDefaultFewShot};
  TextTemplate few_shot_example{std::string(detail::kDefaultFewShotExample)};
  TextTemplate definition{detail::kDefaultDefinition};
  TextTemplate attribute_aware{detail::kDefaultAttributeAware};
  TextTemplate attribute_value{detail::kDefaultAttributeValue};

  std::vector<std::pair<std::string, TextTemplate*>> named() {
    return {{"system", &system},
            {"attribute", &attribute},
            {"persona_header", &persona_header},
            {"baseline_zero_shot", &zero_shot},
            {"baseline_few_shot", &few_shot},
            {"baseline_few_shot_example", &few_shot_example},
            {"baseline_definition", &definition},
            {"baseline_attribute_aware", &attribute_aware},
            {"baseline_attribute_value", &attribute_value}};
  }

  /// Replaces every template for which `<dir>/<name>.txt` exists. One trailing
  /// newline is stripped from each file.
  static PromptTemplates load_directory(const std::filesystem::path& dir) {
    PromptTemplates t;
    if (!std::filesystem::is_directory(dir))
      throw ConfigError("template directory " + dir.string() + " does not exist");
    for (auto& [name, tmpl] : t.named()) {
      auto path = dir / (name + ".txt");
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      auto text = ss.str();
      if (!text.empty() && text.back() == '\n') text.pop_back();
      *tmpl = TextTemplate(std::move(text));
    }
    return t;
  }
};

struct FewShotExample {
  std::string text;
  bool hate = false;
};

/// Config-supplied material for the direct binary prompts.
struct BaselineTexts {
  std::vector<FewShotExample> examples;
  std::string definition{detail::kDefaultDefinitionText};
  std::string hate_token = "1";
  std::string non_hate_token = "0";
};

struct PromptMeta {
  std::string comment_id;
  std::optional<Attribute> attribute;
  std::optional<std::string> annotator_id;
  PromptCondition condition = PromptCondition::vanilla();
};

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
  std::vector<std::string> expected_label_set;
  PromptMeta meta;
};

/// Renders every prompt kind from a fixed set of templates. Stateless after
/// construction; safe to share between threads.
class PromptRenderer {
 public:
  static constexpr std::size_t kDefaultMaxChars = 32768;

  explicit PromptRenderer(PromptTemplates templates = {}, std::size_t max_chars = kDefaultMaxChars)
      : t_(std::move(templates)), max_chars_(max_chars) {}

  const PromptTemplates& templates() const noexcept { return t_; }
  std::size_t max_chars() const noexcept { return max_chars_; }

  RenderedPrompt vanilla(Attribute attribute, const CommentRecord& comment) const {
    RenderedPrompt p;
    p.system_text = t_.system.render({});
    p.user_text = attribute_body(attribute, comment);
    p.expected_label_set = label_tokens(attribute);
    p.meta = {comment.comment_id, attribute, std::nullopt, PromptCondition::vanilla()};
    check_budget(p);
    return p;
  }

  /// The persona header followed by a blank line and the unchanged vanilla body.
  RenderedPrompt persona(Attribute attribute, const CommentRecord& comment,
                         const AnnotatorProfile& profile) const {
    if (!profile.complete())
      throw PersonaError("annotator '" + profile.annotator_id + "' has an incomplete demographic profile");
    RenderedPrompt p;
    p.system_text = t_.system.render({});
    p.user_text = persona_header(profile) + "\n\n" + attribute_body(attribute, comment);
    p.expected_label_set = label_tokens(attribute);
    p.meta = {comment.comment_id, attribute, profile.annotator_id, PromptCondition::persona()};
    check_budget(p);
    return p;
  }

  std::string persona_header(const AnnotatorProfile& profile) const {
    return t_.persona_header.render({{"gender", profile.gender},
                                     {"age", profile.age ? std::to_string(*profile.age) : ""},
                                     {"age_category", profile.age_category},
                                     {"race", profile.race},
                                     {"religion", profile.religion},
                                     {"ideology", profile.ideology}});
  }

  RenderedPrompt baseline(BaselineVariant variant, const CommentRecord& comment,
                          const BaselineTexts& texts) const {
    std::map<std::string, std::string, std::less<>> vars{
        {"comment", comment.text},
        {"hate_token", texts.hate_token},
        {"non_hate_token", texts.non_hate_token}};
    const TextTemplate* body = nullptr;
    switch (variant) {
      case BaselineVariant::zero_shot:
        body = &t_.zero_shot;
        break;
      case BaselineVariant::few_shot: {
        if (texts.examples.empty())
          throw ConfigError("few_shot baseline requires at least one configured example");
        std::string joined;
        for (const auto& ex : texts.examples) {
          if (!joined.empty()) joined += "\n\n";
          joined += t_.few_shot_example.render(
              {{"text", ex.text}, {"label", ex.hate ? texts.hate_token : texts.non_hate_token}});
        }
        vars["examples"] = std::move(joined);
        body = &t_.few_shot;
        break;
      }
      case BaselineVariant::definition:
        if (texts.definition.empty()) throw ConfigError("definition baseline requires a definition text");
        vars["definition"] = texts.definition;
        body = &t_.definition;
        break;
      case BaselineVariant::attribute_aware: {
        std::string list;
        for (const auto& s : registry()) {
          if (!list.empty()) list += ", ";
          list += s.name;
        }
        vars["attribute_list"] = std::move(list);
        body = &t_.attribute_aware;
        break;
      }
      case BaselineVariant::attribute_value: {
        std::string scales;
        for (const auto& s : registry()) {
          if (!scales.empty()) scales += "\n";
          scales += "- " + std::string(s.name) + ": " + std::string(s.rubric);
        }
        vars["attribute_scales"] = std::move(scales);
        body = &t_.attribute_value;
        break;
      }
    }
    if (texts.hate_token == texts.non_hate_token || texts.hate_token.empty() || texts.non_hate_token.empty())
      throw ConfigError("baseline label tokens must be two distinct non-empty strings");
    RenderedPrompt p;
    p.system_text = t_.system.render({});
    p.user_text = body->render(vars);
    p.expected_label_set = {texts.hate_token, texts.non_hate_token};
    p.meta = {comment.comment_id, std::nullopt, std::nullopt, PromptCondition::baseline(variant)};
    check_budget(p);
    return p;
  }

  static std::vector<std::string> label_tokens(Attribute attribute) {
    std::vector<std::string> labels;
    for (int k = 0; k <= spec(attribute).scale_max; ++k) labels.push_back(std::to_string(k));
    return labels;
  }

 private:
  std::string attribute_body(Attribute attribute, const CommentRecord& comment) const {
    const auto& s = spec(attribute);
    return t_.attribute.render({{"attribute", std::string(s.name)},
                                {"rubric", std::string(s.rubric)},
                                {"comment", comment.text},
                                {"scale_max", std::to_string(s.scale_max)}});
  }

  void check_budget(const RenderedPrompt& p) const {
    auto n = p.system_text.size() + p.user_text.size();
    if (n > max_chars_)
      throw PromptError("prompt for comment '" + p.meta.comment_id + "' is " + std::to_string(n) +
                        " characters, over the budget of " + std::to_string(max_chars_));
  }

  PromptTemplates t_;
  std::size_t max_chars_;
};

inline RenderedPrompt build_vanilla_prompt(Attribute attribute, const CommentRecord& comment) {
  return PromptRenderer{}.vanilla(attribute, comment);
}

inline RenderedPrompt build_persona_prompt(Attribute attribute, const CommentRecord& comment,
                                           const AnnotatorProfile& profile) {
  return PromptRenderer{}.persona(attribute, comment, profile);
}

inline RenderedPrompt build_baseline_prompt(BaselineVariant variant, const CommentRecord& comment,
                                            const BaselineTexts& texts) {
  return PromptRenderer{}.baseline(variant, comment, texts);
}

}  // namespace hatescore
