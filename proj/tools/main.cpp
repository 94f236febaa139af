// causeray: estimate bridge damage causes from camera poses, a mesh, and a
// VQA oracle. Subcommands: shoot | neighbors | diagnose | genqa.

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "causeray/diagnosis.hpp"
#include "causeray/neighborhood.hpp"
#include "causeray/oracle.hpp"
#include "causeray/scene.hpp"
#include "causeray/vqa.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitOracle = 4;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::fwrite(content.data(), 1, content.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write output file '" + path + "'");
}

struct SceneArgs {
    std::string mesh_path;
    std::string poses_path;
};

void add_scene_args(CLI::App& cmd, SceneArgs& args) {
    cmd.add_option("--mesh", args.mesh_path, "Triangulated mesh (Wavefront OBJ)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd.add_option("--poses", args.poses_path, "Camera pose document (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
}

struct OracleArgs {
    std::string annotations_path;
    std::string vocabulary_path;
    std::string endpoint;
    std::string endpoint_path = "/answer";
    double timeout_seconds = 30.0;
    int attempts = 3;
    double backoff_seconds = 0.25;
    int max_in_flight = 8;
};

void add_oracle_args(CLI::App& cmd, OracleArgs& args) {
    auto* ann = cmd.add_option("--annotations", args.annotations_path,
                               "Answer from an image annotation document (JSON)")
                    ->check(CLI::ExistingFile);
    auto* ep = cmd.add_option("--endpoint", args.endpoint,
                              "Answer from a remote VQA service (http://host:port)");
    ann->excludes(ep);
    ep->excludes(ann);
    cmd.add_option("--vocabulary", args.vocabulary_path,
                   "Member/damage vocabulary document (JSON; built-in default)")
        ->check(CLI::ExistingFile);
    cmd.add_option("--endpoint-path", args.endpoint_path, "Request path on the remote service");
    cmd.add_option("--timeout", args.timeout_seconds, "Per-question timeout in seconds")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--attempts", args.attempts, "Remote attempts per question")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--backoff", args.backoff_seconds, "Base retry backoff in seconds")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--max-in-flight", args.max_in_flight, "Concurrent remote request bound")
        ->check(CLI::PositiveNumber);
}

causeray::Vocabulary load_vocabulary(const OracleArgs& args) {
    if (args.vocabulary_path.empty()) return causeray::Vocabulary::defaults();
    return causeray::parse_vocabulary(causeray::read_file(args.vocabulary_path));
}

std::unique_ptr<causeray::Oracle> make_oracle(const OracleArgs& args,
                                              const causeray::Vocabulary& vocab) {
    if (args.annotations_path.empty() == args.endpoint.empty()) {
        throw CLI::ValidationError("oracle",
                                   "exactly one of --annotations or --endpoint is required");
    }
    if (!args.annotations_path.empty()) {
        auto annotations =
            causeray::parse_annotations(causeray::read_file(args.annotations_path), vocab);
        return std::make_unique<causeray::AnnotationOracle>(std::move(annotations), vocab);
    }
    causeray::RemoteOracleOptions options;
    options.endpoint = args.endpoint;
    options.path = args.endpoint_path;
    options.attempts = args.attempts;
    options.backoff_base_seconds = args.backoff_seconds;
    options.timeout_seconds = args.timeout_seconds;
    options.max_in_flight = args.max_in_flight;
    return causeray::make_remote_oracle(std::move(options), vocab);
}

ordered_json oracle_config_echo(const OracleArgs& args) {
    ordered_json config;
    if (!args.annotations_path.empty()) {
        config["annotations"] = args.annotations_path;
    } else {
        config["endpoint"] = args.endpoint;
        config["endpoint_path"] = args.endpoint_path;
        config["timeout_seconds"] = args.timeout_seconds;
        config["attempts"] = args.attempts;
        config["max_in_flight"] = args.max_in_flight;
    }
    if (!args.vocabulary_path.empty()) config["vocabulary"] = args.vocabulary_path;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bridge damage cause estimation from camera poses and a VQA oracle"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read option defaults from a TOML/INI file");

    // --- shoot ---------------------------------------------------------
    auto* shoot = app.add_subcommand("shoot", "Compute per-image shooting points on the mesh");
    SceneArgs shoot_scene;
    add_scene_args(*shoot, shoot_scene);
    std::string shoot_output;
    int shoot_concurrency = 1;
    shoot->add_option("-o,--output", shoot_output, "Output path (default: stdout)");
    shoot->add_option("--concurrency", shoot_concurrency, "Worker thread count")
        ->check(CLI::PositiveNumber);

    // --- neighbors -----------------------------------------------------
    auto* neighbors =
        app.add_subcommand("neighbors", "Select surrounding images within a radius ball");
    SceneArgs neighbors_scene;
    add_scene_args(*neighbors, neighbors_scene);
    std::string neighbors_interest;
    double neighbors_radius = 1.0;
    std::string neighbors_output;
    int neighbors_concurrency = 1;
    neighbors->add_option("--interest", neighbors_interest, "Image id of the image of interest")
        ->required();
    neighbors->add_option("--radius", neighbors_radius, "Ball radius in metres (default 1.0)")
        ->check(CLI::NonNegativeNumber);
    neighbors->add_option("-o,--output", neighbors_output, "Output path (default: stdout)");
    neighbors->add_option("--concurrency", neighbors_concurrency, "Worker thread count")
        ->check(CLI::PositiveNumber);

    // --- diagnose ------------------------------------------------------
    auto* diagnose = app.add_subcommand(
        "diagnose", "Identify the damage on the interest image and rank cause evidence");
    SceneArgs diagnose_scene;
    add_scene_args(*diagnose, diagnose_scene);
    OracleArgs diagnose_oracle;
    add_oracle_args(*diagnose, diagnose_oracle);
    std::string diagnose_interest;
    double diagnose_radius = 1.0;
    std::string diagnose_rules_path;
    std::string diagnose_output;
    std::string diagnose_format = "json";
    bool diagnose_full_transcript = false;
    int diagnose_concurrency = 1;
    diagnose->add_option("--interest", diagnose_interest, "Image id of the image of interest")
        ->required();
    diagnose->add_option("--radius", diagnose_radius, "Ball radius in metres (default 1.0)")
        ->check(CLI::PositiveNumber);
    diagnose->add_option("--rules", diagnose_rules_path,
                         "Cause rule document (JSON; built-in corrosion rules by default)")
        ->check(CLI::ExistingFile);
    diagnose->add_option("-o,--output", diagnose_output, "Output path (default: stdout)");
    diagnose
        ->add_option("--format", diagnose_format, "Output format: json or table (default json)")
        ->check(CLI::IsMember({"json", "table"}));
    diagnose->add_flag("--full-transcript", diagnose_full_transcript,
                       "Ask every event question instead of short-circuiting after a yes");
    diagnose->add_option("--concurrency", diagnose_concurrency, "Worker thread count")
        ->check(CLI::PositiveNumber);

    // --- genqa ---------------------------------------------------------
    auto* genqa =
        app.add_subcommand("genqa", "Generate a question/answer corpus from annotations");
    std::string genqa_annotations;
    std::string genqa_vocabulary;
    std::string genqa_output;
    int genqa_negatives = 2;
    std::uint64_t genqa_seed = 0;
    genqa->add_option("--annotations", genqa_annotations, "Image annotation document (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    genqa->add_option("--vocabulary", genqa_vocabulary,
                      "Member/damage vocabulary document (JSON; built-in default)")
        ->check(CLI::ExistingFile);
    genqa->add_option("-o,--output", genqa_output, "Output path (default: stdout)");
    genqa->add_option("--negatives", genqa_negatives,
                      "Negative questions drawn per template class (default 2)")
        ->check(CLI::NonNegativeNumber);
    genqa->add_option("--seed", genqa_seed, "Seed for negative-question draws");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*shoot) {
            const causeray::Scene scene =
                causeray::load_scene(shoot_scene.mesh_path, shoot_scene.poses_path);
            const auto points = causeray::shooting_points(scene, shoot_concurrency);
            ordered_json doc = causeray::shooting_points_to_json(points);
            ordered_json config;
            config["mesh"] = shoot_scene.mesh_path;
            config["poses"] = shoot_scene.poses_path;
            config["concurrency"] = shoot_concurrency;
            doc["config"] = std::move(config);
            write_output(shoot_output, doc.dump(2) + "\n");
            return kExitOk;
        }

        if (*neighbors) {
            const causeray::Scene scene =
                causeray::load_scene(neighbors_scene.mesh_path, neighbors_scene.poses_path);
            const auto points = causeray::shooting_points(scene, neighbors_concurrency);
            const auto selection =
                causeray::select_surrounding(points, neighbors_interest, neighbors_radius);
            ordered_json doc = causeray::selection_to_json(selection);
            ordered_json config;
            config["mesh"] = neighbors_scene.mesh_path;
            config["poses"] = neighbors_scene.poses_path;
            config["interest"] = neighbors_interest;
            config["radius"] = neighbors_radius;
            config["concurrency"] = neighbors_concurrency;
            doc["config"] = std::move(config);
            write_output(neighbors_output, doc.dump(2) + "\n");
            return kExitOk;
        }

        if (*diagnose) {
            const causeray::Vocabulary vocab = load_vocabulary(diagnose_oracle);
            const std::vector<causeray::CauseRule> rules =
                diagnose_rules_path.empty()
                    ? causeray::default_corrosion_rules()
                    : causeray::parse_rules(causeray::read_file(diagnose_rules_path), vocab);
            const std::unique_ptr<causeray::Oracle> oracle = make_oracle(diagnose_oracle, vocab);
            const causeray::Scene scene =
                causeray::load_scene(diagnose_scene.mesh_path, diagnose_scene.poses_path);

            causeray::DiagnoseOptions options;
            options.radius = diagnose_radius;
            options.short_circuit = !diagnose_full_transcript;
            options.concurrency = diagnose_concurrency;
            const causeray::DiagnosisReport report =
                causeray::diagnose(scene, diagnose_interest, rules, *oracle, options);

            if (diagnose_format == "table") {
                write_output(diagnose_output, causeray::render_report_table(report));
            } else {
                ordered_json doc = ordered_json::parse(causeray::report_to_json(report));
                doc["config"]["mesh"] = diagnose_scene.mesh_path;
                doc["config"]["poses"] = diagnose_scene.poses_path;
                doc["config"]["interest"] = diagnose_interest;
                doc["config"]["concurrency"] = diagnose_concurrency;
                doc["config"]["short_circuit"] = !diagnose_full_transcript;
                const ordered_json oracle_echo = oracle_config_echo(diagnose_oracle);
                for (const auto& [key, value] : oracle_echo.items()) {
                    doc["config"][key] = value;
                }
                doc["generated_at"] = utc_timestamp();
                write_output(diagnose_output, doc.dump(2) + "\n");
            }
            return kExitOk;
        }

        if (*genqa) {
            OracleArgs vocab_args;
            vocab_args.vocabulary_path = genqa_vocabulary;
            const causeray::Vocabulary vocab = load_vocabulary(vocab_args);
            const auto annotations =
                causeray::parse_annotations(causeray::read_file(genqa_annotations), vocab);
            causeray::QaGenOptions options;
            options.negatives = static_cast<std::size_t>(genqa_negatives);
            options.seed = genqa_seed;
            const std::string corpus = causeray::corpus_to_jsonl(annotations, vocab, options);
            const auto pair_count =
                static_cast<std::size_t>(std::count(corpus.begin(), corpus.end(), '\n'));
            write_output(genqa_output, corpus);
            if (!annotations.empty()) {
                std::fprintf(stderr, "generated %zu question/answer pairs over %zu images (%.1f per image)\n",
                             pair_count, annotations.size(),
                             static_cast<double>(pair_count) /
                                 static_cast<double>(annotations.size()));
            }
            return kExitOk;
        }
    } catch (const causeray::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitParse;
    } catch (const causeray::NeighborhoodError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const causeray::DiagnosisError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitOracle;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
    return kExitInternal;
}
