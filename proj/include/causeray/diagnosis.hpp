#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "causeray/neighborhood.hpp"
#include "causeray/oracle.hpp"
#include "causeray/scene.hpp"
#include "causeray/vqa.hpp"

namespace causeray {

/// One assumed damage cause: if `related_member` is visible and any of
/// `events` has occurred on it, the cause gains evidence. `proxy_for` names
/// the member the related member stands in for when the real one cannot be
/// photographed (e.g. abutment for expansion joint); it only affects
/// reporting.
struct CauseRule {
    std::string cause_name;
    std::string trigger_damage;
    std::string related_member;
    std::string proxy_for;  // empty when the member is the real one
    std::vector<std::string> events;
};

/// The four built-in corrosion causes.
std::vector<CauseRule> default_corrosion_rules();

/// Parses a JSON rule document: either a bare array of rule objects or
/// {"rules": [...]}. Each rule: {"cause_name", "trigger_damage",
/// "related_member", "proxy_for"?, "events": [...]}. All names must be in the
/// vocabulary; events must be non-empty; cause names must be unique.
/// Throws ParseError.
std::vector<CauseRule> parse_rules(std::string_view text, const Vocabulary& vocab);

std::string serialize_rules(const std::vector<CauseRule>& rules);

/// One oracle exchange. `phase` is "identify" for step 1 or the cause name
/// for step 2. status != ok means the answer was degraded to "no" for
/// counting (or, in step 1, aborted the diagnosis).
struct TranscriptEntry {
    std::string image_id;
    std::string phase;
    Question question;
    std::string answer;
    OracleStatus status = OracleStatus::ok;
    std::string detail;
};

/// Evidence for one cause over the analysed images. Image-level counting:
/// one image contributes at most 1 to n and at most 1 to m.
struct CauseEvidence {
    CauseRule rule;
    std::size_t n = 0;            // images where related_member is present
    std::size_t m = 0;            // of those, images with >=1 event answered yes
    std::optional<double> ratio;  // m/n, absent when n == 0
    std::size_t degraded = 0;     // questions degraded to "no" by oracle errors
};

/// Thrown when diagnosis cannot proceed (step-1 oracle failure, interest
/// image misses the mesh, ...). Carries whatever transcript accumulated.
class DiagnosisError : public std::runtime_error {
public:
    explicit DiagnosisError(const std::string& message,
                            std::vector<TranscriptEntry> transcript = {})
        : std::runtime_error(message), transcript_(std::move(transcript)) {}

    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

private:
    std::vector<TranscriptEntry> transcript_;
};

struct Identification {
    std::string damage;
    std::string member;
};

/// Step 1: asks what damage is occurring in the interest image, then which
/// member carries it. Both exchanges are appended to `transcript`. Throws
/// DiagnosisError (carrying the transcript) if either question fails.
Identification identify_damage_and_member(Oracle& oracle, const std::string& interest_image,
                                          std::vector<TranscriptEntry>& transcript);

struct EvaluateOptions {
    // Stop asking event questions for an image after the first yes: cannot
    // change m under image-level counting. Disable for a complete transcript.
    bool short_circuit = true;
    int concurrency = 1;
};

/// Step 2 for one rule: counts n (member present) and m (member present and
/// some event yes) over `images`. Oracle errors degrade that answer to "no"
/// and increment the degraded count. Transcript lines are appended in image
/// order regardless of concurrency.
CauseEvidence evaluate_cause(Oracle& oracle, const std::vector<std::string>& images,
                             const CauseRule& rule, const EvaluateOptions& options,
                             std::vector<TranscriptEntry>& transcript);

/// Orders evidence for reporting: descending ratio, N/A entries last,
/// ties broken by cause_name.
void rank_evidence(std::vector<CauseEvidence>& evidence);

struct DiagnoseOptions {
    double radius = 1.0;  // metres
    bool short_circuit = true;
    int concurrency = 1;
};

struct DiagnosisReport {
    std::string interest_image;
    std::string identified_damage;
    std::string identified_member;
    bool no_applicable_rules = false;
    std::vector<CauseEvidence> evidence;  // ranked
    std::vector<TranscriptEntry> transcript;
    std::vector<std::string> analysed_images;  // id-sorted interest + surrounding
    std::vector<CauseRule> rules;              // the full configured rule set
    double radius = 1.0;
    std::string oracle_kind;
    std::size_t degraded_questions = 0;
};

/// Full pipeline: shooting points -> 1 m-ball neighborhood -> step 1 on the
/// interest image -> step 2 for every rule whose trigger_damage matches ->
/// ranked report. Throws NeighborhoodError when the interest image is
/// unknown or misses the mesh, DiagnosisError when step 1 fails; an
/// identified damage with no matching rule is not an error
/// (no_applicable_rules is set instead).
DiagnosisReport diagnose(const Scene& scene, const std::string& interest_id,
                         const std::vector<CauseRule>& rules, Oracle& oracle,
                         const DiagnoseOptions& options = {});

/// Structured report document (stable field order, no timestamp).
std::string report_to_json(const DiagnosisReport& report);

/// Human-readable table: per-cause N, M, and M/N rounded to 2 decimals
/// ("N/A" when undefined).
std::string render_report_table(const DiagnosisReport& report);

}  // namespace causeray
