#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hatescore/error.hpp"

namespace hatescore {

/// The ten ordinal annotation attributes. The enumerator order is the fixed
/// feature order used everywhere a per-attribute vector appears.
enum class Attribute : std::uint8_t {
  sentiment,
  hatespeech,
  insult,
  humiliate,
  dehumanize,
  violence,
  genocide,
  status,
  respect,
  attack_defend,
};

inline constexpr std::size_t kAttributeCount = 10;

template <typename T>
using PerAttribute = std::array<T, kAttributeCount>;

struct AttributeSpec {
  Attribute id;
  std::string_view name;
  int scale_max;  // labels are 0..scale_max
  std::string_view rubric;
  std::string_view display_name;
};

namespace detail {

inline constexpr std::array<AttributeSpec, kAttributeCount> kRegistry{{
    {Attribute::sentiment, "sentiment", 4,
     "Sentiment polarity: 0=strongly negative, 1=somewhat negative, 2=neutral, "
     "3=somewhat positive, 4=strongly positive.",
     "Sentiment"},
    {Attribute::hatespeech, "hatespeech", 2,
     "Presence of hate speech: 0=no, 1=unclear/neutral, 2=yes.", "Hate speech"},
    {Attribute::insult, "insult", 4,
     "Insult toward the group: 0=none, 1=mild, 2=neutral/unsure, 3=clear, 4=severe.",
     "Insult"},
    {Attribute::humiliate, "humiliate", 4,
     "Humiliation toward the group: 0=none, 1=mild, 2=neutral/unsure, "
     "3=attempted humiliation, 4=degrading.",
     "Humiliate"},
    {Attribute::dehumanize, "dehumanize", 4,
     "Dehumanization of the group: 0=strongly no, 1=no, 2=unclear/neutral, "
     "3=yes, 4=strongly yes.",
     "Dehumanize"},
    {Attribute::violence, "violence", 4,
     "Call for violence against the group: 0=strongly no, 1=no, "
     "2=unclear/neutral, 3=yes, 4=strongly yes.",
     "Violence"},
    {Attribute::genocide, "genocide", 4,
     "Call for deliberate large-scale killing of the group: 0=strongly no, "
     "1=no, 2=unclear/neutral, 3=yes, 4=strongly yes.",
     "Genocide"},
    {Attribute::status, "status", 4,
     "Relative social status framing: 0=strongly inferior, 1=inferior, "
     "2=equal/neutral, 3=superior, 4=strongly superior.",
     "Status"},
    {Attribute::respect, "respect", 4,
     "Respect toward the group: 0=strongly disrespectful, 1=disrespectful/rude, "
     "2=neutral, 3=respectful/polite, 4=strongly respectful.",
     "Respect"},
    {Attribute::attack_defend, "attack_defend", 4,
     "Stance toward the group: 0=strongly defending, 1=defending, "
     "2=neutral/mixed, 3=attacking, 4=strongly attacking.",
     "Attack-defend"},
}};

}  // namespace detail

inline constexpr std::size_t index_of(Attribute a) noexcept {
  return static_cast<std::size_t>(a);
}

inline constexpr const AttributeSpec& spec(Attribute a) noexcept {
  return detail::kRegistry[index_of(a)];
}

inline constexpr const std::array<AttributeSpec, kAttributeCount>& registry() noexcept {
  return detail::kRegistry;
}

inline constexpr std::array<Attribute, kAttributeCount> all_attributes() noexcept {
  std::array<Attribute, kAttributeCount> out{};
  for (std::size_t i = 0; i < kAttributeCount; ++i) out[i] = static_cast<Attribute>(i);
  return out;
}

inline std::optional<Attribute> find_attribute(std::string_view name) noexcept {
  for (const auto& s : detail::kRegistry)
    if (s.name == name) return s.id;
  return std::nullopt;
}

inline Attribute attribute_from_name(std::string_view name) {
  if (auto a = find_attribute(name)) return *a;
  throw RegistryError("unknown attribute '" + std::string(name) + "'");
}

inline std::string to_string(Attribute a) { return std::string(spec(a).name); }

// Column order used by the alignment tables: evaluative attributes first,
// then the behavioural ones.
inline constexpr std::array<Attribute, kAttributeCount> kAlignmentColumnOrder{
    Attribute::respect,  Attribute::sentiment,     Attribute::status,
    Attribute::hatespeech, Attribute::genocide,    Attribute::dehumanize,
    Attribute::attack_defend, Attribute::violence, Attribute::humiliate,
    Attribute::insult,
};

}  // namespace hatescore
