#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causeray/vqa.hpp"

namespace causeray {

enum class OracleStatus {
    ok,              // `answer` holds a normalized answer
    unknown_image,   // the oracle has no knowledge of this image_id
    not_applicable,  // what-/which- question with no true answer; not evidence
    transport_error, // remote exchange failed after retries
    bad_answer,      // reply could not be normalized into the vocabulary
};

std::string_view to_string(OracleStatus status);

struct OracleReply {
    OracleStatus status = OracleStatus::ok;
    std::string answer;                // empty unless status == ok
    std::optional<double> confidence;  // only some oracles report one
    std::string detail;                // human-readable context for failures
};

/// Answers templated questions about images. Implementations must be safe for
/// concurrent ask() calls.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual OracleReply ask(const std::string& image_id, const Question& question) = 0;

    /// Stable identifier echoed into reports ("annotation", "remote").
    virtual std::string kind() const = 0;
};

/// Answers mechanically from a set of image annotations. Immutable after
/// construction. Presence questions answer yes/no from membership;
/// what_damage_on_member returns the member's first damage in Vocabulary
/// order; which_member_has_damage returns the first member in Vocabulary
/// order carrying that damage; unanswerable what-/which- questions report
/// not_applicable. Never answers outside Vocabulary ∪ {yes, no}.
class AnnotationOracle final : public Oracle {
public:
    AnnotationOracle(std::vector<Annotation> annotations, Vocabulary vocabulary);

    OracleReply ask(const std::string& image_id, const Question& question) override;
    std::string kind() const override { return "annotation"; }

    const Vocabulary& vocabulary() const { return vocab_; }

private:
    std::map<std::string, Annotation> by_image_;
    Vocabulary vocab_;
};

struct RemoteOracleOptions {
    std::string endpoint;             // e.g. "http://127.0.0.1:8080"
    std::string path = "/answer";
    int attempts = 3;                 // total tries per question
    double backoff_base_seconds = 0.25;  // delay before retry i is base * 2^(i-1)
    double timeout_seconds = 30.0;    // per-question read timeout
    int max_in_flight = 8;            // concurrent request bound
};

/// Forwards questions to an HTTP service: POST {image_id, question_text} to
/// `path`, expecting {"answer": ..., "confidence"?: ...}. Replies are
/// normalized against the vocabulary; answers that normalize outside
/// Vocabulary ∪ {yes, no} report bad_answer. Transport failures retry with
/// exponential backoff and then report transport_error.
std::unique_ptr<Oracle> make_remote_oracle(RemoteOracleOptions options, Vocabulary vocabulary);

}  // namespace causeray
