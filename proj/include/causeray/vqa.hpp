#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causeray/scene.hpp"

namespace causeray {

// Question templates. Rendered English is bit-exact; see render_question.
enum class TemplateId {
    member_present,
    damage_present,
    damage_on_member,
    any_damage_on_member,
    what_damage_on_member,
    what_damage_in_image,
    which_member_has_damage,
};

std::string_view to_string(TemplateId id);
TemplateId template_from_string(std::string_view name);

// Lowercase, trim, collapse internal whitespace. Idempotent.
std::string normalize_text(std::string_view s);

// Member and damage name lists, ordered. Order is load-bearing: what-/which-
// answers resolve ties by the first matching name in this order.
struct Vocabulary {
    std::vector<std::string> members;
    std::vector<std::string> damages;
    std::map<std::string, std::string> synonyms;  // normalized alias -> canonical name

    // The names attested in the source inspection domain; extensible via config.
    static Vocabulary defaults();

    bool has_member(std::string_view name) const;
    bool has_damage(std::string_view name) const;
    // Rank in vocabulary order; npos when absent.
    std::size_t member_rank(std::string_view name) const;
    std::size_t damage_rank(std::string_view name) const;
};

// Config document: {"members": [...], "damages": [...], "synonyms": {...}};
// omitted sections fall back to the defaults.
Vocabulary parse_vocabulary(std::string_view text);

// normalize_text plus the vocabulary synonym table.
std::string normalize_answer(std::string_view s, const Vocabulary& vocab);

struct MemberAnnotation {
    std::string name;
    std::vector<std::string> damages;
};

struct Annotation {
    std::string image_id;
    std::vector<MemberAnnotation> members;

    const MemberAnnotation* find_member(std::string_view name) const;
};

// Annotation document: array (or {"annotations": [...]}) of
// {image_id, members: [{name, damages: [...]}]}. Names are validated against
// the vocabulary; member names must be unique per image.
std::vector<Annotation> parse_annotations(std::string_view text, const Vocabulary& vocab);
std::string serialize_annotations(const std::vector<Annotation>& annotations);

struct Question {
    TemplateId template_id = TemplateId::member_present;
    std::string member;  // empty when the template has no member slot
    std::string damage;  // empty when the template has no damage slot
    std::string text;
};

struct Answer {
    std::string value;  // member name | damage name | "yes" | "no"
    std::optional<double> confidence;
};

struct Slots {
    std::string member;
    std::string damage;
};

// Deterministic rendering per the template table; throws std::invalid_argument
// on a missing slot.
Question render_question(TemplateId id, const Slots& slots);

struct QaPair {
    Question question;
    Answer answer;
};

struct QaGenOptions {
    // Negative samples per image: this many absent members and absent damages,
    // drawn deterministically from a hash of the image id salted with seed.
    std::size_t negatives = 2;
    std::uint64_t seed = 0;
};

// Mechanical QA generation from one annotated image. Deterministic and pure;
// answering every question with the annotation oracle reproduces the answers.
std::vector<QaPair> generate_qa(const Annotation& annotation, const Vocabulary& vocab,
                                const QaGenOptions& options = {});

// One JSONL record per generated pair, in generation order.
std::string corpus_to_jsonl(const std::vector<Annotation>& annotations, const Vocabulary& vocab,
                            const QaGenOptions& options = {});

}  // namespace causeray
