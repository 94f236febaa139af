#include "causeray/oracle.hpp"

#include <chrono>
#include <cmath>
#include <semaphore>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace causeray {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_yes_no_template(TemplateId id) {
    switch (id) {
        case TemplateId::member_present:
        case TemplateId::damage_present:
        case TemplateId::damage_on_member:
        case TemplateId::any_damage_on_member:
            return true;
        case TemplateId::what_damage_on_member:
        case TemplateId::what_damage_in_image:
        case TemplateId::which_member_has_damage:
            return false;
    }
    throw std::logic_error("unhandled template id");
}

class RemoteOracle final : public Oracle {
public:
    RemoteOracle(RemoteOracleOptions options, Vocabulary vocabulary)
        : options_(std::move(options)),
          vocab_(std::move(vocabulary)),
          in_flight_(options_.max_in_flight >= 1 ? options_.max_in_flight : 1) {
        if (options_.endpoint.empty()) {
            throw std::invalid_argument("remote oracle needs an endpoint");
        }
        if (options_.attempts < 1) {
            throw std::invalid_argument("remote oracle needs at least one attempt");
        }
        if (options_.max_in_flight < 1) {
            throw std::invalid_argument("remote oracle in-flight bound must be positive");
        }
    }

    OracleReply ask(const std::string& image_id, const Question& question) override {
        struct Permit {
            std::counting_semaphore<>& sem;
            explicit Permit(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
            ~Permit() { sem.release(); }
        } permit(in_flight_);
        return exchange(image_id, question);
    }

    std::string kind() const override { return "remote"; }

private:
    OracleReply exchange(const std::string& image_id, const Question& question) {
        ordered_json request;
        request["image_id"] = image_id;
        request["question_text"] = question.text;
        const std::string body = request.dump();

        std::string last_error;
        for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
            if (attempt > 1) {
                const double delay =
                    options_.backoff_base_seconds * std::pow(2.0, attempt - 2);
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
            // One client per exchange: httplib clients are not safe for
            // concurrent requests on a shared connection.
            httplib::Client client(options_.endpoint);
            const auto timeout = std::chrono::duration<double>(options_.timeout_seconds);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);

            const httplib::Result result =
                client.Post(options_.path, body, "application/json");
            if (!result) {
                last_error = "transport: " + httplib::to_string(result.error());
                continue;
            }
            if (result->status == 404) {
                return {OracleStatus::unknown_image, "", std::nullopt,
                        "endpoint reported unknown image '" + image_id + "'"};
            }
            if (result->status != 200) {
                last_error = "HTTP status " + std::to_string(result->status);
                continue;
            }
            return parse_reply(result->body, question);
        }
        return {OracleStatus::transport_error, "", std::nullopt,
                last_error + " after " + std::to_string(options_.attempts) + " attempts"};
    }

    OracleReply parse_reply(const std::string& body, const Question& question) const {
        ordered_json doc;
        try {
            doc = ordered_json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            return {OracleStatus::bad_answer, "", std::nullopt,
                    std::string("unparseable reply: ") + e.what()};
        }
        if (!doc.is_object() || !doc.contains("answer") || !doc.at("answer").is_string()) {
            return {OracleStatus::bad_answer, "", std::nullopt,
                    "reply missing string 'answer' field"};
        }
        OracleReply reply;
        reply.answer = normalize_answer(doc.at("answer").get<std::string>(), vocab_);
        if (doc.contains("confidence") && doc.at("confidence").is_number()) {
            reply.confidence = doc.at("confidence").get<double>();
        }
        // Validate against the slot the template fills: a yes/no question
        // answered with a member name is as unusable as gibberish.
        bool valid = false;
        if (is_yes_no_template(question.template_id)) {
            valid = reply.answer == "yes" || reply.answer == "no";
        } else if (question.template_id == TemplateId::which_member_has_damage) {
            valid = vocab_.has_member(reply.answer);
        } else {
            valid = vocab_.has_damage(reply.answer);
        }
        if (!valid) {
            return {OracleStatus::bad_answer, "", std::nullopt,
                    "answer '" + reply.answer + "' is outside the vocabulary for this question"};
        }
        reply.status = OracleStatus::ok;
        return reply;
    }

    RemoteOracleOptions options_;
    Vocabulary vocab_;
    std::counting_semaphore<> in_flight_;
};

}  // namespace

std::unique_ptr<Oracle> make_remote_oracle(RemoteOracleOptions options, Vocabulary vocabulary) {
    return std::make_unique<RemoteOracle>(std::move(options), std::move(vocabulary));
}

}  // namespace causeray
