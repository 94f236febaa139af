#include "causeray/diagnosis.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "causeray/parallel.hpp"

#include "json.hpp"

namespace causeray {

namespace {

using ordered_json = nlohmann::ordered_json;

}  // namespace

std::vector<CauseRule> default_corrosion_rules() {
    return {
        {"leaking from cracking on the slab", "corrosion", "slab", "", {"cracking", "leaking"}},
        {"leaking from the expansion joint", "corrosion", "abutment", "expansion joint",
         {"leaking"}},
        {"leaking from the drainage pipe", "corrosion", "drainage pipe", "",
         {"corrosion", "fissure", "fracture", "leaking"}},
        {"leaking from cracking on the wheel guard", "corrosion", "wheel guard", "", {"leaking"}},
    };
}

std::vector<CauseRule> parse_rules(std::string_view text, const Vocabulary& vocab) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("rule document: ") + e.what());
    }
    const ordered_json* records = &doc;
    if (doc.is_object()) {
        if (!doc.contains("rules")) {
            throw ParseError("rule document: expected a top-level array or 'rules' key");
        }
        records = &doc.at("rules");
    }
    if (!records->is_array()) {
        throw ParseError("rule document: rule list must be an array");
    }

    std::vector<CauseRule> rules;
    std::unordered_set<std::string> seen;
    std::size_t index = 0;
    for (const auto& rj : *records) {
        const auto fail = [&](const std::string& what) {
            throw ParseError("rule " + std::to_string(index) + ": " + what);
        };
        if (!rj.is_object()) fail("expected an object");
        for (const char* field : {"cause_name", "trigger_damage", "related_member"}) {
            if (!rj.contains(field) || !rj.at(field).is_string()) {
                fail(std::string("missing string '") + field + "'");
            }
        }
        CauseRule rule;
        rule.cause_name = rj.at("cause_name").get<std::string>();
        rule.trigger_damage = normalize_text(rj.at("trigger_damage").get<std::string>());
        rule.related_member = normalize_text(rj.at("related_member").get<std::string>());
        if (rj.contains("proxy_for")) {
            if (!rj.at("proxy_for").is_string()) fail("'proxy_for' must be a string");
            rule.proxy_for = normalize_text(rj.at("proxy_for").get<std::string>());
        }
        if (rule.cause_name.empty()) fail("empty cause_name");
        if (!seen.insert(rule.cause_name).second) {
            fail("duplicate cause_name '" + rule.cause_name + "'");
        }
        if (!vocab.has_damage(rule.trigger_damage)) {
            fail("unknown trigger_damage '" + rule.trigger_damage + "'");
        }
        if (!vocab.has_member(rule.related_member)) {
            fail("unknown related_member '" + rule.related_member + "'");
        }
        if (!rj.contains("events") || !rj.at("events").is_array()) {
            fail("missing 'events' array");
        }
        for (const auto& ej : rj.at("events")) {
            if (!ej.is_string()) fail("events must be strings");
            std::string event = normalize_text(ej.get<std::string>());
            if (!vocab.has_damage(event)) fail("unknown event '" + event + "'");
            if (std::find(rule.events.begin(), rule.events.end(), event) == rule.events.end()) {
                rule.events.push_back(std::move(event));
            }
        }
        if (rule.events.empty()) fail("events must be non-empty");
        rules.push_back(std::move(rule));
        ++index;
    }
    return rules;
}

namespace {

ordered_json rule_to_json(const CauseRule& rule) {
    ordered_json rj;
    rj["cause_name"] = rule.cause_name;
    rj["trigger_damage"] = rule.trigger_damage;
    rj["related_member"] = rule.related_member;
    if (!rule.proxy_for.empty()) rj["proxy_for"] = rule.proxy_for;
    rj["events"] = rule.events;
    return rj;
}

}  // namespace

std::string serialize_rules(const std::vector<CauseRule>& rules) {
    ordered_json doc;
    doc["rules"] = ordered_json::array();
    for (const auto& rule : rules) doc["rules"].push_back(rule_to_json(rule));
    return doc.dump(2) + "\n";
}

namespace {

TranscriptEntry make_entry(const std::string& image_id, std::string phase, Question question,
                           const OracleReply& reply) {
    TranscriptEntry entry;
    entry.image_id = image_id;
    entry.phase = std::move(phase);
    entry.question = std::move(question);
    entry.answer = reply.answer;
    entry.status = reply.status;
    entry.detail = reply.detail;
    return entry;
}

}  // namespace

Identification identify_damage_and_member(Oracle& oracle, const std::string& interest_image,
                                          std::vector<TranscriptEntry>& transcript) {
    Question what = render_question(TemplateId::what_damage_in_image, {});
    const OracleReply damage_reply = oracle.ask(interest_image, what);
    transcript.push_back(make_entry(interest_image, "identify", std::move(what), damage_reply));
    if (damage_reply.status != OracleStatus::ok) {
        throw DiagnosisError("cannot identify damage in '" + interest_image + "': " +
                                 std::string(to_string(damage_reply.status)) +
                                 (damage_reply.detail.empty() ? "" : " (" + damage_reply.detail +
                                                                         ")"),
                             transcript);
    }

    Question which =
        render_question(TemplateId::which_member_has_damage, {"", damage_reply.answer});
    const OracleReply member_reply = oracle.ask(interest_image, which);
    transcript.push_back(make_entry(interest_image, "identify", std::move(which), member_reply));
    if (member_reply.status != OracleStatus::ok) {
        throw DiagnosisError("cannot identify the member with '" + damage_reply.answer + "' in '" +
                                 interest_image + "': " +
                                 std::string(to_string(member_reply.status)) +
                                 (member_reply.detail.empty() ? "" : " (" + member_reply.detail +
                                                                         ")"),
                             transcript);
    }
    return {damage_reply.answer, member_reply.answer};
}

namespace {

struct ImageOutcome {
    std::vector<TranscriptEntry> lines;
    bool present = false;
    bool event_yes = false;
    std::size_t degraded = 0;
};

ImageOutcome evaluate_image(Oracle& oracle, const std::string& image_id, const CauseRule& rule,
                            bool short_circuit) {
    ImageOutcome out;
    const auto ask = [&](Question question) {
        const OracleReply reply = oracle.ask(image_id, question);
        const bool yes = reply.status == OracleStatus::ok && reply.answer == "yes";
        if (reply.status != OracleStatus::ok) ++out.degraded;
        out.lines.push_back(make_entry(image_id, rule.cause_name, std::move(question), reply));
        return yes;
    };

    out.present = ask(render_question(TemplateId::member_present, {rule.related_member, ""}));
    if (!out.present) return out;
    for (const auto& event : rule.events) {
        const bool yes =
            ask(render_question(TemplateId::damage_on_member, {rule.related_member, event}));
        out.event_yes = out.event_yes || yes;
        if (out.event_yes && short_circuit) break;
    }
    return out;
}

}  // namespace

CauseEvidence evaluate_cause(Oracle& oracle, const std::vector<std::string>& images,
                             const CauseRule& rule, const EvaluateOptions& options,
                             std::vector<TranscriptEntry>& transcript) {
    std::vector<ImageOutcome> outcomes(images.size());
    parallel_for(images.size(), options.concurrency, [&](std::size_t i) {
        outcomes[i] = evaluate_image(oracle, images[i], rule, options.short_circuit);
    });

    CauseEvidence evidence;
    evidence.rule = rule;
    for (auto& outcome : outcomes) {
        if (outcome.present) {
            ++evidence.n;
            if (outcome.event_yes) ++evidence.m;
        }
        evidence.degraded += outcome.degraded;
        for (auto& line : outcome.lines) transcript.push_back(std::move(line));
    }
    if (evidence.n > 0) {
        evidence.ratio = static_cast<double>(evidence.m) / static_cast<double>(evidence.n);
    }
    return evidence;
}

void rank_evidence(std::vector<CauseEvidence>& evidence) {
    std::sort(evidence.begin(), evidence.end(), [](const CauseEvidence& a, const CauseEvidence& b) {
        if (a.ratio.has_value() != b.ratio.has_value()) return a.ratio.has_value();
        if (a.ratio.has_value() && *a.ratio != *b.ratio) return *a.ratio > *b.ratio;
        return a.rule.cause_name < b.rule.cause_name;
    });
}

DiagnosisReport diagnose(const Scene& scene, const std::string& interest_id,
                         const std::vector<CauseRule>& rules, Oracle& oracle,
                         const DiagnoseOptions& options) {
    // Unknown or mesh-missing interest surfaces as NeighborhoodError: a bad
    // run configuration, not an oracle failure.
    const ShootingPointMap points = shooting_points(scene, options.concurrency);
    const NeighborhoodSelection selection =
        select_surrounding(points, interest_id, options.radius);

    DiagnosisReport report;
    report.interest_image = interest_id;
    report.rules = rules;
    report.radius = options.radius;
    report.oracle_kind = oracle.kind();

    report.analysed_images.push_back(interest_id);
    for (const auto& s : selection.surrounding) report.analysed_images.push_back(s.image_id);
    std::sort(report.analysed_images.begin(), report.analysed_images.end());

    const Identification id =
        identify_damage_and_member(oracle, interest_id, report.transcript);
    report.identified_damage = id.damage;
    report.identified_member = id.member;

    EvaluateOptions eval;
    eval.short_circuit = options.short_circuit;
    eval.concurrency = options.concurrency;
    for (const auto& rule : rules) {
        if (rule.trigger_damage != report.identified_damage) continue;
        report.evidence.push_back(
            evaluate_cause(oracle, report.analysed_images, rule, eval, report.transcript));
    }
    report.no_applicable_rules = report.evidence.empty();
    rank_evidence(report.evidence);
    for (const auto& e : report.evidence) report.degraded_questions += e.degraded;
    return report;
}

namespace {

std::string format_ratio(const std::optional<double>& ratio) {
    if (!ratio.has_value()) return "N/A";
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", *ratio);
    return buffer;
}

}  // namespace

std::string report_to_json(const DiagnosisReport& report) {
    ordered_json doc;
    doc["interest_image"] = report.interest_image;
    doc["identified_damage"] = report.identified_damage;
    doc["identified_member"] = report.identified_member;
    doc["no_applicable_rules"] = report.no_applicable_rules;

    doc["evidence"] = ordered_json::array();
    for (const auto& e : report.evidence) {
        ordered_json ej;
        ej["cause_name"] = e.rule.cause_name;
        ej["related_member"] = e.rule.related_member;
        if (!e.rule.proxy_for.empty()) ej["proxy_for"] = e.rule.proxy_for;
        ej["events"] = e.rule.events;
        ej["n"] = e.n;
        ej["m"] = e.m;
        if (e.ratio.has_value()) {
            ej["ratio"] = *e.ratio;
        } else {
            ej["ratio"] = nullptr;
        }
        ej["ratio_display"] = format_ratio(e.ratio);
        ej["degraded_questions"] = e.degraded;
        doc["evidence"].push_back(std::move(ej));
    }

    ordered_json config;
    config["radius"] = report.radius;
    config["oracle"] = report.oracle_kind;
    config["rules"] = ordered_json::array();
    for (const auto& rule : report.rules) config["rules"].push_back(rule_to_json(rule));
    doc["config"] = std::move(config);

    doc["analysed_images"] = report.analysed_images;
    doc["degraded_questions"] = report.degraded_questions;

    doc["transcript"] = ordered_json::array();
    for (const auto& t : report.transcript) {
        ordered_json tj;
        tj["image_id"] = t.image_id;
        tj["phase"] = t.phase;
        tj["template"] = std::string(to_string(t.question.template_id));
        tj["question"] = t.question.text;
        tj["answer"] = t.answer;
        if (t.status != OracleStatus::ok) {
            tj["error"] = std::string(to_string(t.status));
            if (!t.detail.empty()) tj["detail"] = t.detail;
        }
        doc["transcript"].push_back(std::move(tj));
    }
    return doc.dump(2) + "\n";
}

std::string render_report_table(const DiagnosisReport& report) {
    std::string out;
    out += "interest image:    " + report.interest_image + "\n";
    out += "identified damage: " + report.identified_damage + "\n";
    out += "identified member: " + report.identified_member + "\n";
    out += "analysed images:   " + std::to_string(report.analysed_images.size()) + "\n";
    if (report.no_applicable_rules) {
        out += "\nno applicable rules for '" + report.identified_damage + "'\n";
        return out;
    }

    std::size_t width = std::string("damage cause").size();
    for (const auto& e : report.evidence) width = std::max(width, e.rule.cause_name.size());

    const auto pad = [&](const std::string& s) {
        return s + std::string(width - s.size(), ' ');
    };
    out += "\n" + pad("damage cause") + "    N    M  M/N\n";
    for (const auto& e : report.evidence) {
        char counts[32];
        std::snprintf(counts, sizeof(counts), "  %3zu  %3zu  ", e.n, e.m);
        out += pad(e.rule.cause_name) + counts + format_ratio(e.ratio) + "\n";
    }
    if (report.degraded_questions > 0) {
        out += "\ndegraded questions: " + std::to_string(report.degraded_questions) + "\n";
    }
    return out;
}

}  // namespace causeray
