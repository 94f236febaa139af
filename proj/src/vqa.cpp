#include "causeray/vqa.hpp"

#include "causeray/scene.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace causeray {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64; stable across platforms, unlike std::uniform_int_distribution.
struct StableRng {
    std::uint64_t state;
    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::size_t below(std::size_t bound) { return static_cast<std::size_t>(next() % bound); }
};

}  // namespace

std::string_view to_string(TemplateId id) {
    switch (id) {
        case TemplateId::member_present: return "member_present";
        case TemplateId::damage_present: return "damage_present";
        case TemplateId::damage_on_member: return "damage_on_member";
        case TemplateId::any_damage_on_member: return "any_damage_on_member";
        case TemplateId::what_damage_on_member: return "what_damage_on_member";
        case TemplateId::what_damage_in_image: return "what_damage_in_image";
        case TemplateId::which_member_has_damage: return "which_member_has_damage";
    }
    throw std::invalid_argument("unknown template id");
}

TemplateId template_from_string(std::string_view name) {
    for (const TemplateId id :
         {TemplateId::member_present, TemplateId::damage_present, TemplateId::damage_on_member,
          TemplateId::any_damage_on_member, TemplateId::what_damage_on_member,
          TemplateId::what_damage_in_image, TemplateId::which_member_has_damage}) {
        if (to_string(id) == name) return id;
    }
    throw std::invalid_argument("unknown template '" + std::string(name) + "'");
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (const char raw : s) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

Vocabulary Vocabulary::defaults() {
    Vocabulary v;
    v.members = {"main girder",      "cross beam",   "slab",
                 "abutment",         "drainage pipe", "wheel guard",
                 "expansion joint",  "bearing",       "utility attachment",
                 "wall"};
    v.damages = {"corrosion",        "cracking", "leaking",
                 "free lime",        "degradation of the anticorrosive",
                 "fracture",         "fissure",
                 "sinking/displacement/slanting"};
    v.synonyms = {{"water leakage", "leaking"}};
    return v;
}

bool Vocabulary::has_member(std::string_view name) const {
    return member_rank(name) != std::string::npos;
}

bool Vocabulary::has_damage(std::string_view name) const {
    return damage_rank(name) != std::string::npos;
}

std::size_t Vocabulary::member_rank(std::string_view name) const {
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (members[i] == name) return i;
    }
    return std::string::npos;
}

std::size_t Vocabulary::damage_rank(std::string_view name) const {
    for (std::size_t i = 0; i < damages.size(); ++i) {
        if (damages[i] == name) return i;
    }
    return std::string::npos;
}

namespace {

std::vector<std::string> parse_name_list(const ordered_json& arr, const char* what) {
    std::vector<std::string> names;
    std::unordered_set<std::string> seen;
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw ParseError(std::string("vocabulary: ") + what + " entries must be strings");
        }
        std::string name = normalize_text(item.get<std::string>());
        if (name.empty()) {
            throw ParseError(std::string("vocabulary: empty ") + what + " name");
        }
        if (!seen.insert(name).second) {
            throw ParseError(std::string("vocabulary: duplicate ") + what + " '" + name + "'");
        }
        names.push_back(std::move(name));
    }
    return names;
}

}  // namespace

Vocabulary parse_vocabulary(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("vocabulary document: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("vocabulary document: expected a JSON object");
    }
    Vocabulary v = Vocabulary::defaults();
    if (doc.contains("members")) v.members = parse_name_list(doc.at("members"), "member");
    if (doc.contains("damages")) v.damages = parse_name_list(doc.at("damages"), "damage");
    if (doc.contains("synonyms")) {
        v.synonyms.clear();
        for (const auto& [alias, target] : doc.at("synonyms").items()) {
            if (!target.is_string()) {
                throw ParseError("vocabulary: synonym targets must be strings");
            }
            v.synonyms[normalize_text(alias)] = normalize_text(target.get<std::string>());
        }
    }
    if (v.members.empty() || v.damages.empty()) {
        throw ParseError("vocabulary: member and damage lists must be non-empty");
    }
    return v;
}

std::string normalize_answer(std::string_view s, const Vocabulary& vocab) {
    std::string n = normalize_text(s);
    const auto it = vocab.synonyms.find(n);
    return it == vocab.synonyms.end() ? n : it->second;
}

const MemberAnnotation* Annotation::find_member(std::string_view name) const {
    for (const auto& m : members) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

std::vector<Annotation> parse_annotations(std::string_view text, const Vocabulary& vocab) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("annotation document: ") + e.what());
    }
    const ordered_json* records = &doc;
    if (doc.is_object()) {
        if (!doc.contains("annotations")) {
            throw ParseError("annotation document: expected a top-level array or 'annotations' key");
        }
        records = &doc.at("annotations");
    }
    if (!records->is_array()) {
        throw ParseError("annotation document: annotation list must be an array");
    }

    std::vector<Annotation> annotations;
    std::unordered_set<std::string> seen_images;
    std::size_t index = 0;
    for (const auto& record : *records) {
        if (!record.is_object() || !record.contains("image_id") ||
            !record.at("image_id").is_string()) {
            throw ParseError("annotation record " + std::to_string(index) +
                             ": missing string 'image_id'");
        }
        Annotation ann;
        ann.image_id = record.at("image_id").get<std::string>();
        if (!seen_images.insert(ann.image_id).second) {
            throw ParseError("annotation record " + std::to_string(index) +
                             ": duplicate image_id '" + ann.image_id + "'");
        }
        if (record.contains("members")) {
            if (!record.at("members").is_array()) {
                throw ParseError("annotation record " + std::to_string(index) +
                                 ": 'members' must be an array");
            }
            std::unordered_set<std::string> seen_members;
            for (const auto& mj : record.at("members")) {
                if (!mj.is_object() || !mj.contains("name") || !mj.at("name").is_string()) {
                    throw ParseError("annotation record " + std::to_string(index) +
                                     ": member entries need a string 'name'");
                }
                MemberAnnotation member;
                member.name = normalize_text(mj.at("name").get<std::string>());
                if (!vocab.has_member(member.name)) {
                    throw ParseError("annotation record " + std::to_string(index) + " ('" +
                                     ann.image_id + "'): unknown member '" + member.name + "'");
                }
                if (!seen_members.insert(member.name).second) {
                    throw ParseError("annotation record " + std::to_string(index) + " ('" +
                                     ann.image_id + "'): duplicate member '" + member.name + "'");
                }
                if (mj.contains("damages")) {
                    for (const auto& dj : mj.at("damages")) {
                        if (!dj.is_string()) {
                            throw ParseError("annotation record " + std::to_string(index) +
                                             ": damages must be strings");
                        }
                        std::string damage = normalize_text(dj.get<std::string>());
                        if (!vocab.has_damage(damage)) {
                            throw ParseError("annotation record " + std::to_string(index) + " ('" +
                                             ann.image_id + "'): unknown damage '" + damage + "'");
                        }
                        if (std::find(member.damages.begin(), member.damages.end(), damage) ==
                            member.damages.end()) {
                            member.damages.push_back(std::move(damage));
                        }
                    }
                }
                ann.members.push_back(std::move(member));
            }
        }
        annotations.push_back(std::move(ann));
        ++index;
    }
    return annotations;
}

std::string serialize_annotations(const std::vector<Annotation>& annotations) {
    ordered_json list = ordered_json::array();
    for (const auto& ann : annotations) {
        ordered_json record;
        record["image_id"] = ann.image_id;
        record["members"] = ordered_json::array();
        for (const auto& m : ann.members) {
            ordered_json mj;
            mj["name"] = m.name;
            mj["damages"] = m.damages;
            record["members"].push_back(std::move(mj));
        }
        list.push_back(std::move(record));
    }
    ordered_json doc;
    doc["annotations"] = std::move(list);
    return doc.dump(2) + "\n";
}

Question render_question(TemplateId id, const Slots& slots) {
    const auto need_member = [&] {
        if (slots.member.empty()) {
            throw std::invalid_argument(std::string("template '") + std::string(to_string(id)) +
                                        "' needs a member slot");
        }
    };
    const auto need_damage = [&] {
        if (slots.damage.empty()) {
            throw std::invalid_argument(std::string("template '") + std::string(to_string(id)) +
                                        "' needs a damage slot");
        }
    };
    Question q;
    q.template_id = id;
    switch (id) {
        case TemplateId::member_present:
            need_member();
            q.member = slots.member;
            q.text = "Is the " + slots.member + " in the image?";
            break;
        case TemplateId::damage_present:
            need_damage();
            q.damage = slots.damage;
            q.text = "Is there " + slots.damage + " in the image?";
            break;
        case TemplateId::damage_on_member:
            need_member();
            need_damage();
            q.member = slots.member;
            q.damage = slots.damage;
            q.text = "Is there " + slots.damage + " on the " + slots.member + "?";
            break;
        case TemplateId::any_damage_on_member:
            need_member();
            q.member = slots.member;
            q.text = "Is there damage on the " + slots.member + "?";
            break;
        case TemplateId::what_damage_on_member:
            need_member();
            q.member = slots.member;
            q.text = "What kind of damage has occurred to the " + slots.member + "?";
            break;
        case TemplateId::what_damage_in_image:
            q.text = "What kind of damage is occurring in the image?";
            break;
        case TemplateId::which_member_has_damage:
            need_damage();
            q.damage = slots.damage;
            q.text = "What is the member that has " + slots.damage + "?";
            break;
    }
    return q;
}

namespace {

// First of the member's damages in vocabulary order. Multi-damage members get
// a single deterministic answer; the dataset convention is one answer per
// question.
std::string first_damage_in_vocab_order(const MemberAnnotation& member, const Vocabulary& vocab) {
    std::string best;
    std::size_t best_rank = std::string::npos;
    for (const auto& d : member.damages) {
        const std::size_t rank = vocab.damage_rank(d);
        if (rank < best_rank) {
            best_rank = rank;
            best = d;
        }
    }
    return best;
}

std::vector<std::string> distinct_damages_in_vocab_order(const Annotation& ann,
                                                         const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (const auto& d : vocab.damages) {
        for (const auto& m : ann.members) {
            if (std::find(m.damages.begin(), m.damages.end(), d) != m.damages.end()) {
                out.push_back(d);
                break;
            }
        }
    }
    return out;
}

std::string first_member_with_damage(const Annotation& ann, std::string_view damage,
                                     const Vocabulary& vocab) {
    std::string best;
    std::size_t best_rank = std::string::npos;
    for (const auto& m : ann.members) {
        if (std::find(m.damages.begin(), m.damages.end(), damage) == m.damages.end()) continue;
        const std::size_t rank = vocab.member_rank(m.name);
        if (rank < best_rank) {
            best_rank = rank;
            best = m.name;
        }
    }
    return best;
}

// Draws k names (without replacement) from `pool`, keyed by the image id.
std::vector<std::string> draw_negatives(const std::vector<std::string>& pool, std::size_t k,
                                        const std::string& image_id, std::uint64_t seed,
                                        std::uint64_t stream) {
    std::vector<std::string> candidates = pool;
    std::vector<std::string> out;
    StableRng rng{fnv1a(image_id) ^ (seed * 0x9e3779b97f4a7c15ull) ^ stream};
    while (!candidates.empty() && out.size() < k) {
        const std::size_t pick = rng.below(candidates.size());
        out.push_back(candidates[pick]);
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

}  // namespace

std::vector<QaPair> generate_qa(const Annotation& annotation, const Vocabulary& vocab,
                                const QaGenOptions& options) {
    for (const auto& m : annotation.members) {
        if (!vocab.has_member(m.name)) {
            throw std::invalid_argument("annotation '" + annotation.image_id +
                                        "' references unknown member '" + m.name + "'");
        }
        for (const auto& d : m.damages) {
            if (!vocab.has_damage(d)) {
                throw std::invalid_argument("annotation '" + annotation.image_id +
                                            "' references unknown damage '" + d + "'");
            }
        }
    }

    std::vector<QaPair> pairs;
    for (const auto& member : annotation.members) {
        pairs.push_back({render_question(TemplateId::member_present, {member.name, ""}),
                         Answer{"yes", std::nullopt}});
        pairs.push_back({render_question(TemplateId::any_damage_on_member, {member.name, ""}),
                         Answer{member.damages.empty() ? "no" : "yes", std::nullopt}});
        for (const auto& damage : member.damages) {
            pairs.push_back({render_question(TemplateId::damage_on_member, {member.name, damage}),
                             Answer{"yes", std::nullopt}});
        }
        if (!member.damages.empty()) {
            pairs.push_back({render_question(TemplateId::what_damage_on_member, {member.name, ""}),
                             Answer{first_damage_in_vocab_order(member, vocab), std::nullopt}});
        }
    }
    for (const auto& damage : distinct_damages_in_vocab_order(annotation, vocab)) {
        pairs.push_back({render_question(TemplateId::damage_present, {"", damage}),
                         Answer{"yes", std::nullopt}});
        pairs.push_back({render_question(TemplateId::which_member_has_damage, {"", damage}),
                         Answer{first_member_with_damage(annotation, damage, vocab), std::nullopt}});
    }

    std::vector<std::string> absent_members;
    for (const auto& name : vocab.members) {
        if (annotation.find_member(name) == nullptr) absent_members.push_back(name);
    }
    std::vector<std::string> present_damages = distinct_damages_in_vocab_order(annotation, vocab);
    std::vector<std::string> absent_damages;
    for (const auto& name : vocab.damages) {
        if (std::find(present_damages.begin(), present_damages.end(), name) ==
            present_damages.end()) {
            absent_damages.push_back(name);
        }
    }
    for (const auto& name :
         draw_negatives(absent_members, options.negatives, annotation.image_id, options.seed, 1)) {
        pairs.push_back(
            {render_question(TemplateId::member_present, {name, ""}), Answer{"no", std::nullopt}});
    }
    for (const auto& name :
         draw_negatives(absent_damages, options.negatives, annotation.image_id, options.seed, 2)) {
        pairs.push_back(
            {render_question(TemplateId::damage_present, {"", name}), Answer{"no", std::nullopt}});
    }
    return pairs;
}

std::string corpus_to_jsonl(const std::vector<Annotation>& annotations, const Vocabulary& vocab,
                            const QaGenOptions& options) {
    std::string out;
    for (const auto& ann : annotations) {
        for (const auto& pair : generate_qa(ann, vocab, options)) {
            ordered_json line;
            line["image_id"] = ann.image_id;
            line["question_text"] = pair.question.text;
            line["answer"] = pair.answer.value;
            line["template_id"] = std::string(to_string(pair.question.template_id));
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

}  // namespace causeray
