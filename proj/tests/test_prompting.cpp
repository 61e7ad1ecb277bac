#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "hatescore/prompting.hpp"
#include "test_util.hpp"

using namespace hatescore;
namespace fs = std::filesystem;

namespace {

CommentRecord sample_comment() {
  CommentRecord c;
  c.comment_id = "c042";
  c.text = "They should all go back where they came from. {not a placeholder}";
  c.hate_score = 1.25;
  return c;
}

AnnotatorProfile sample_profile() {
  AnnotatorProfile p;
  p.annotator_id = "a007";
  p.gender = "woman";
  p.age = 52;
  p.age_category = "old";
  p.race = "black";
  p.religion = "christian";
  p.ideology = "moderate";
  return p;
}

BaselineTexts sample_texts() {
  BaselineTexts t;
  t.examples = {{"I hope you have a lovely day.", false}, {"People like them are vermin.", true}};
  return t;
}

std::string serialize(const RenderedPrompt& p) {
  std::string out = "[system]\n" + p.system_text + "\n[user]\n" + p.user_text + "\n[labels]\n";
  for (std::size_t i = 0; i < p.expected_label_set.size(); ++i) out += (i ? " " : "") + p.expected_label_set[i];
  return out + "\n";
}

void check_golden(const std::string& name, const RenderedPrompt& p) {
  const fs::path path = fs::path(HATESCORE_GOLDEN_DIR) / (name + ".txt");
  const auto actual = serialize(p);
  if (std::getenv("HATESCORE_UPDATE_GOLDEN")) {
    testutil::write_file(path, actual);
    return;
  }
  ASSERT_TRUE(fs::exists(path)) << "missing golden file " << path << " (set HATESCORE_UPDATE_GOLDEN=1)";
  EXPECT_EQ(actual, testutil::read_file(path)) << "golden mismatch: " << name;
}

}  // namespace

TEST(PromptGolden, VanillaEveryAttribute) {
  for (auto a : all_attributes()) check_golden("vanilla." + to_string(a), build_vanilla_prompt(a, sample_comment()));
}

TEST(PromptGolden, PersonaEveryAttribute) {
  for (auto a : all_attributes())
    check_golden("persona." + to_string(a), build_persona_prompt(a, sample_comment(), sample_profile()));
}

TEST(PromptGolden, EveryBaselineVariant) {
  for (auto v : kBaselineVariants)
    check_golden("baseline." + std::string(to_string(v)), build_baseline_prompt(v, sample_comment(), sample_texts()));
}

TEST(Prompting, VanillaContainsRubricCommentAndInstruction) {
  auto hs = build_vanilla_prompt(Attribute::hatespeech, sample_comment());
  EXPECT_NE(hs.user_text.find("0=no, 1=unclear/neutral, 2=yes"), std::string::npos);
  EXPECT_NE(hs.user_text.find(sample_comment().text), std::string::npos);
  EXPECT_NE(hs.user_text.find("single integer"), std::string::npos);
  EXPECT_EQ(hs.expected_label_set, (std::vector<std::string>{"0", "1", "2"}));

  auto respect = build_vanilla_prompt(Attribute::respect, sample_comment());
  EXPECT_NE(respect.user_text.find("0=strongly disrespectful"), std::string::npos);
  EXPECT_EQ(respect.expected_label_set.size(), 5u);
  EXPECT_NE(respect.system_text.find("safety filters"), std::string::npos);

  for (auto a : all_attributes()) {
    auto p = build_vanilla_prompt(a, sample_comment());
    EXPECT_NE(p.user_text.find(spec(a).rubric), std::string::npos) << to_string(a);
    EXPECT_EQ(p.meta.attribute, a);
    EXPECT_EQ(p.meta.condition, PromptCondition::vanilla());
  }
}

TEST(Prompting, RenderingIsByteDeterministic) {
  for (auto a : all_attributes()) {
    EXPECT_EQ(serialize(build_vanilla_prompt(a, sample_comment())), serialize(build_vanilla_prompt(a, sample_comment())));
    EXPECT_EQ(serialize(build_persona_prompt(a, sample_comment(), sample_profile())),
              serialize(build_persona_prompt(a, sample_comment(), sample_profile())));
  }
}

TEST(Prompting, PersonaIsHeaderPlusUnchangedVanillaBody) {
  std::vector<AnnotatorProfile> profiles{sample_profile()};
  auto p2 = sample_profile();
  p2.annotator_id = "a008";
  p2.gender = "non-binary";
  p2.age = 19;
  p2.age_category = "young";
  p2.ideology = "very conservative";
  profiles.push_back(p2);
  PromptRenderer r;
  for (const auto& profile : profiles) {
    for (auto a : all_attributes()) {
      const auto vanilla = r.vanilla(a, sample_comment());
      const auto persona = r.persona(a, sample_comment(), profile);
      const auto header = r.persona_header(profile);
      EXPECT_EQ(persona.user_text, header + "\n\n" + vanilla.user_text);
      EXPECT_EQ(persona.system_text, vanilla.system_text);
      EXPECT_EQ(persona.expected_label_set, vanilla.expected_label_set);
      EXPECT_EQ(persona.meta.annotator_id, profile.annotator_id);
      EXPECT_NE(header.find(profile.ideology), std::string::npos);
    }
  }
}

TEST(Prompting, PersonaRequiresCompleteProfile) {
  auto p = sample_profile();
  p.religion.clear();
  EXPECT_THROW(build_persona_prompt(Attribute::insult, sample_comment(), p), PersonaError);
}

TEST(Prompting, ZeroShotHasNoExamplesOrDefinition) {
  auto texts = sample_texts();
  auto p = build_baseline_prompt(BaselineVariant::zero_shot, sample_comment(), texts);
  EXPECT_NE(p.user_text.find(sample_comment().text), std::string::npos);
  EXPECT_EQ(p.user_text.find(texts.examples[0].text), std::string::npos);
  EXPECT_EQ(p.user_text.find(texts.definition), std::string::npos);
  EXPECT_EQ(p.expected_label_set, (std::vector<std::string>{"1", "0"}));
  EXPECT_EQ(p.meta.condition, PromptCondition::baseline(BaselineVariant::zero_shot));
  EXPECT_FALSE(p.meta.attribute.has_value());
}

TEST(Prompting, AttributeAwareListsAllTenNames) {
  auto p = build_baseline_prompt(BaselineVariant::attribute_aware, sample_comment(), {});
  for (const auto& s : registry()) EXPECT_NE(p.user_text.find(s.name), std::string::npos) << s.name;
  EXPECT_EQ(p.user_text.find(spec(Attribute::respect).rubric), std::string::npos);

  auto v = build_baseline_prompt(BaselineVariant::attribute_value, sample_comment(), {});
  for (const auto& s : registry()) EXPECT_NE(v.user_text.find(s.rubric), std::string::npos) << s.name;
}

TEST(Prompting, FewShotExamplesPrecedeTargetComment) {
  auto texts = sample_texts();
  auto p = build_baseline_prompt(BaselineVariant::few_shot, sample_comment(), texts);
  const auto target = p.user_text.find(sample_comment().text);
  ASSERT_NE(target, std::string::npos);
  for (const auto& ex : texts.examples) {
    const auto pos = p.user_text.find(ex.text);
    ASSERT_NE(pos, std::string::npos);
    EXPECT_LT(pos, target);
  }
  EXPECT_THROW(build_baseline_prompt(BaselineVariant::few_shot, sample_comment(), BaselineTexts{}), ConfigError);
}

TEST(Prompting, DefinitionAndTokensComeFromConfig) {
  BaselineTexts t;
  t.definition = "Custom definition text.";
  t.hate_token = "yes";
  t.non_hate_token = "no";
  auto p = build_baseline_prompt(BaselineVariant::definition, sample_comment(), t);
  EXPECT_NE(p.user_text.find("Custom definition text."), std::string::npos);
  EXPECT_EQ(p.expected_label_set, (std::vector<std::string>{"yes", "no"}));
  t.non_hate_token = "yes";
  EXPECT_THROW(build_baseline_prompt(BaselineVariant::zero_shot, sample_comment(), t), ConfigError);
}

TEST(Prompting, OverBudgetIsAnErrorNotATruncation) {
  auto c = sample_comment();
  c.text = std::string(5000, 'x');
  PromptRenderer small(PromptTemplates{}, 4000);
  EXPECT_THROW(small.vanilla(Attribute::insult, c), PromptError);
  PromptRenderer big(PromptTemplates{}, 10000);
  EXPECT_NE(big.vanilla(Attribute::insult, c).user_text.find(c.text), std::string::npos);
}

TEST(TextTemplate, EscapesAndVerbatimSubstitution) {
  TextTemplate t("{{literal}} {name} }}");
  EXPECT_EQ(t.placeholders(), (std::vector<std::string>{"name"}));
  EXPECT_EQ(t.render({{"name", "{name}"}}), "{literal} {name} }");
  EXPECT_THROW(t.render({}), PromptError);
  EXPECT_THROW(TextTemplate("{open"), PromptError);
  EXPECT_THROW(TextTemplate("close}"), PromptError);
  EXPECT_THROW(TextTemplate("{Bad-Name}"), PromptError);
}

TEST(PromptCondition, ParseAndPrintRoundTrip) {
  for (const char* s : {"vanilla", "persona", "baseline:zero_shot", "baseline:attribute_value"}) {
    auto c = PromptCondition::parse(s);
    EXPECT_EQ(c.str(), s);
    EXPECT_EQ(c.variant().has_value(), c.kind() == PromptCondition::Kind::baseline);
  }
  EXPECT_THROW(PromptCondition::parse("baseline"), ConfigError);
  EXPECT_THROW(PromptCondition::parse("baseline:two_shot"), ConfigError);
  EXPECT_THROW(PromptCondition::parse("Vanilla"), ConfigError);
}

TEST(PromptTemplates, DirectoryOverridesReplaceNamedTemplates) {
  testutil::TempDir dir;
  testutil::write_file(dir / "system.txt", "Custom system.\n");
  testutil::write_file(dir / "attribute.txt", "{attribute}|{scale_max}|{comment}");
  PromptRenderer r(PromptTemplates::load_directory(dir.path()));
  auto p = r.vanilla(Attribute::hatespeech, sample_comment());
  EXPECT_EQ(p.system_text, "Custom system.");
  EXPECT_EQ(p.user_text, "hatespeech|2|" + sample_comment().text);
  EXPECT_EQ(r.baseline(BaselineVariant::zero_shot, sample_comment(), {}).user_text,
            PromptRenderer{}.baseline(BaselineVariant::zero_shot, sample_comment(), {}).user_text);
  EXPECT_THROW(PromptTemplates::load_directory(dir / "missing"), ConfigError);
}

TEST(PromptTemplates, ShippedTemplateFilesMatchBuiltIns) {
  const fs::path dir = fs::path(HATESCORE_SOURCE_DIR) / "templates";
  PromptTemplates defaults;
  for (const auto& [name, tmpl] : defaults.named()) {
    const auto path = dir / (name + ".txt");
    ASSERT_TRUE(fs::exists(path)) << path;
    auto text = testutil::read_file(path);
    ASSERT_FALSE(text.empty());
    text.pop_back();
    EXPECT_EQ(text, tmpl->source()) << name;
  }
  PromptRenderer shipped(PromptTemplates::load_directory(dir));
  for (auto a : all_attributes())
    EXPECT_EQ(serialize(shipped.persona(a, sample_comment(), sample_profile())),
              serialize(build_persona_prompt(a, sample_comment(), sample_profile())));
}
