#include "causeray/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace causeray {

std::string_view to_string(OracleStatus status) {
    switch (status) {
        case OracleStatus::ok: return "ok";
        case OracleStatus::unknown_image: return "unknown_image";
        case OracleStatus::not_applicable: return "not_applicable";
        case OracleStatus::transport_error: return "transport_error";
        case OracleStatus::bad_answer: return "bad_answer";
    }
    throw std::invalid_argument("unknown oracle status");
}

AnnotationOracle::AnnotationOracle(std::vector<Annotation> annotations, Vocabulary vocabulary)
    : vocab_(std::move(vocabulary)) {
    for (auto& ann : annotations) {
        std::string key = ann.image_id;
        if (!by_image_.emplace(key, std::move(ann)).second) {
            throw std::invalid_argument("duplicate annotation for image '" + key + "'");
        }
    }
}

namespace {

bool member_has_damage(const MemberAnnotation& member, std::string_view damage) {
    return std::find(member.damages.begin(), member.damages.end(), damage) !=
           member.damages.end();
}

OracleReply yes_no(bool value) {
    return {OracleStatus::ok, value ? "yes" : "no", std::nullopt, ""};
}

OracleReply not_applicable(std::string detail) {
    return {OracleStatus::not_applicable, "", std::nullopt, std::move(detail)};
}

}  // namespace

OracleReply AnnotationOracle::ask(const std::string& image_id, const Question& question) {
    const auto it = by_image_.find(image_id);
    if (it == by_image_.end()) {
        return {OracleStatus::unknown_image, "", std::nullopt,
                "no annotation for image '" + image_id + "'"};
    }
    const Annotation& ann = it->second;

    switch (question.template_id) {
        case TemplateId::member_present:
            return yes_no(ann.find_member(question.member) != nullptr);

        case TemplateId::damage_present: {
            const bool present = std::any_of(
                ann.members.begin(), ann.members.end(),
                [&](const MemberAnnotation& m) { return member_has_damage(m, question.damage); });
            return yes_no(present);
        }

        case TemplateId::damage_on_member: {
            const MemberAnnotation* member = ann.find_member(question.member);
            return yes_no(member != nullptr && member_has_damage(*member, question.damage));
        }

        case TemplateId::any_damage_on_member: {
            const MemberAnnotation* member = ann.find_member(question.member);
            return yes_no(member != nullptr && !member->damages.empty());
        }

        case TemplateId::what_damage_on_member: {
            const MemberAnnotation* member = ann.find_member(question.member);
            if (member == nullptr || member->damages.empty()) {
                return not_applicable("no damage recorded on '" + question.member + "' in '" +
                                      image_id + "'");
            }
            // First of the member's damages in vocabulary order.
            std::string best;
            std::size_t best_rank = std::string::npos;
            for (const auto& d : member->damages) {
                const std::size_t rank = vocab_.damage_rank(d);
                if (rank < best_rank) {
                    best_rank = rank;
                    best = d;
                }
            }
            return {OracleStatus::ok, best, std::nullopt, ""};
        }

        case TemplateId::what_damage_in_image: {
            for (const auto& d : vocab_.damages) {
                for (const auto& m : ann.members) {
                    if (member_has_damage(m, d)) return {OracleStatus::ok, d, std::nullopt, ""};
                }
            }
            return not_applicable("no damage recorded in '" + image_id + "'");
        }

        case TemplateId::which_member_has_damage: {
            std::string best;
            std::size_t best_rank = std::string::npos;
            for (const auto& m : ann.members) {
                if (!member_has_damage(m, question.damage)) continue;
                const std::size_t rank = vocab_.member_rank(m.name);
                if (rank < best_rank) {
                    best_rank = rank;
                    best = m.name;
                }
            }
            if (best.empty()) {
                return not_applicable("no member with '" + question.damage + "' in '" + image_id +
                                      "'");
            }
            return {OracleStatus::ok, best, std::nullopt, ""};
        }
    }
    throw std::logic_error("unhandled template id");
}

}  // namespace causeray
