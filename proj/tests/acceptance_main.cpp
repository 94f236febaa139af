// Acceptance gate: exercises the shipped behavior end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//
// Thresholds are pinned here, not in a config: counts are exact integers,
// ratios compare at two decimals, geometric agreement is 1e-9 relative, and
// the BVH performance budget is 1 s soft / 5 s hard for the full query set.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "causeray/diagnosis.hpp"
#include "harness.hpp"

using causeray::AnnotationOracle;
using causeray::Question;
using causeray::Ray;
using causeray::Scene;
using causeray::TemplateId;
using causeray::Triangle;
using causeray::Vec3;
using causeray::Vocabulary;
using nlohmann::ordered_json;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail = "") {
    std::string line = pass ? "PASS  " : "FAIL  ";
    line += name;
    if (!detail.empty()) line += " (" + detail + ")";
    std::puts(line.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f s", s);
    return buf;
}

struct Check {
    bool ok = true;
    std::string why;

    void expect(bool condition, const std::string& message) {
        if (!condition && ok) {
            ok = false;
            why = message;
        }
    }
};

Scene fixture_scene(const harness::Fixture& fixture) {
    Scene scene;
    scene.mesh = causeray::parse_mesh_obj(fixture.obj_text);
    scene.cameras = causeray::parse_poses(fixture.poses_json);
    causeray::build_bvh(scene.mesh);
    return scene;
}

AnnotationOracle fixture_oracle(const harness::Fixture& fixture, const Vocabulary& vocab) {
    return {causeray::parse_annotations(fixture.annotations_json, vocab), vocab};
}

// --------------------------------------------------------------------------
// 1. Table reproduction on the scripted 64-image fixture
// --------------------------------------------------------------------------
void criterion_table_reproduction() {
    const auto fixture = harness::field_test_fixture();
    const Scene scene = fixture_scene(fixture);
    const Vocabulary vocab = Vocabulary::defaults();
    AnnotationOracle oracle = fixture_oracle(fixture, vocab);

    const auto start = std::chrono::steady_clock::now();
    const auto result = causeray::diagnose(scene, fixture.interest_id,
                                           causeray::default_corrosion_rules(), oracle, {});
    const double elapsed = seconds_since(start);

    const auto doc = ordered_json::parse(causeray::report_to_json(result));
    const auto& ev = doc.at("evidence");

    Check c;
    c.expect(ev.size() == 4, "expected 4 ranked causes");
    if (c.ok) {
        c.expect(ev[0].at("cause_name") == "leaking from cracking on the slab", "rank 1 cause");
        c.expect(ev[0].at("n") == 61 && ev[0].at("m") == 58, "slab counts");
        c.expect(ev[0].at("ratio_display") == "0.95", "slab ratio to 2 decimals");
        c.expect(ev[1].at("cause_name") == "leaking from the expansion joint", "rank 2 cause");
        c.expect(ev[1].at("n") == 22 && ev[1].at("m") == 18, "abutment counts");
        c.expect(ev[1].at("ratio_display") == "0.82", "abutment ratio to 2 decimals");
        c.expect(ev[2].at("n") == 0 && ev[2].at("ratio").is_null(), "rank 3 is N/A");
        c.expect(ev[3].at("n") == 0 && ev[3].at("ratio").is_null(), "rank 4 is N/A");
        c.expect(ev[2].at("ratio_display") == "N/A" && ev[3].at("ratio_display") == "N/A",
                 "N/A cells");
    }
    c.expect(elapsed < 5.0, "diagnose exceeded 5 s");
    report(c.ok, "Table 2 reproduction on the 64-image fixture",
           c.ok ? "diagnose " + format_seconds(elapsed) : c.why);
}

// --------------------------------------------------------------------------
// 2. Step-1 identification on the interest image
// --------------------------------------------------------------------------
void criterion_identification() {
    const auto fixture = harness::field_test_fixture();
    const Vocabulary vocab = Vocabulary::defaults();
    AnnotationOracle oracle = fixture_oracle(fixture, vocab);

    std::vector<causeray::TranscriptEntry> transcript;
    const auto id = causeray::identify_damage_and_member(oracle, fixture.interest_id, transcript);

    Check c;
    c.expect(id.damage == "corrosion", "damage '" + id.damage + "' != 'corrosion'");
    c.expect(id.member == "cross beam", "member '" + id.member + "' != 'cross beam'");
    report(c.ok, "Step-1 identification (corrosion on the cross beam)", c.why);
}

// --------------------------------------------------------------------------
// 3. BVH equivalence against the exhaustive scan, with the time budget
// --------------------------------------------------------------------------
void criterion_bvh_equivalence() {
    constexpr std::size_t kTriangles = 100000;
    constexpr std::size_t kRays = 10000;

    auto mesh = harness::random_soup(kTriangles, 424242);
    causeray::build_bvh(mesh);

    std::vector<Triangle> cached;
    cached.reserve(mesh.faces.size());
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) cached.push_back(mesh.triangle(i));

    harness::Rng rng(5150);
    std::vector<Ray> rays;
    rays.reserve(kRays);
    for (std::size_t i = 0; i < kRays; ++i) rays.push_back(harness::random_ray(rng, 12.0));

    // Reference pass: exhaustive scan, ties to the lowest index.
    std::vector<std::optional<causeray::Hit>> reference(kRays);
    for (std::size_t r = 0; r < kRays; ++r) {
        std::optional<causeray::Hit> best;
        for (std::size_t i = 0; i < cached.size(); ++i) {
            const auto hit = causeray::intersect_triangle(rays[r], cached[i]);
            if (hit && (!best || hit->t < best->t)) {
                best = *hit;
                best->triangle_index = i;
            }
        }
        reference[r] = best;
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::optional<causeray::Hit>> indexed(kRays);
    for (std::size_t r = 0; r < kRays; ++r) indexed[r] = causeray::nearest_hit(mesh, rays[r]);
    const double bvh_elapsed = seconds_since(start);

    std::size_t mismatches = 0;
    std::size_t hit_count = 0;
    for (std::size_t r = 0; r < kRays; ++r) {
        const auto& a = reference[r];
        const auto& b = indexed[r];
        if (a.has_value() != b.has_value()) {
            ++mismatches;
            continue;
        }
        if (!a) continue;
        ++hit_count;
        const double tol = 1e-9 * std::max(1.0, a->t);
        if (a->triangle_index != b->triangle_index || std::abs(a->t - b->t) > tol) ++mismatches;
    }

    Check c;
    c.expect(hit_count > 0, "query set produced no hits");
    c.expect(mismatches == 0, std::to_string(mismatches) + " disagreements with the naive scan");
    c.expect(bvh_elapsed < 5.0, "BVH pass exceeded the 5 s hard budget");
    std::string detail = "BVH " + format_seconds(bvh_elapsed) + " for 10k rays x 100k tris, " +
                         std::to_string(hit_count) + " hits";
    if (c.ok && bvh_elapsed >= 1.0) detail += ", over the 1 s soft budget";
    report(c.ok, "BVH nearest-hit equals the exhaustive scan", c.ok ? detail : c.why);
}

// --------------------------------------------------------------------------
// 4. Intersection properties: barycentric bounds, reconstruction, analytic cases
// --------------------------------------------------------------------------
void criterion_intersection_properties() {
    constexpr std::size_t kRandomCases = 20000;
    constexpr std::size_t kAimedCases = 20000;
    harness::Rng rng(20240612);

    std::size_t hits = 0;
    std::size_t violations = 0;
    const auto check_case = [&](const Ray& ray, const Triangle& tri) {
        const auto hit = causeray::intersect_triangle(ray, tri);
        if (!hit) return;
        ++hits;
        const bool bounds_ok =
            hit->u >= 0.0 && hit->u <= 1.0 && hit->v >= 0.0 && hit->v <= 1.0 &&
            hit->u + hit->v <= 1.0;
        const Vec3 bary = (1.0 - hit->u - hit->v) * tri.a + hit->u * tri.b + hit->v * tri.c;
        const bool recon_ok = causeray::distance(bary, ray.at(hit->t)) <= 1e-9;
        if (!bounds_ok || !recon_ok) ++violations;
    };

    for (std::size_t i = 0; i < kRandomCases; ++i) {
        const Triangle tri = harness::random_triangle(rng);
        check_case(harness::random_ray(rng), tri);
    }
    // Rays aimed at a sampled interior point keep the hit sample dense.
    for (std::size_t i = 0; i < kAimedCases; ++i) {
        const Triangle tri = harness::random_triangle(rng);
        double u = rng.uniform(0.0, 1.0);
        double v = rng.uniform(0.0, 1.0);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3 target = (1.0 - u - v) * tri.a + u * tri.b + v * tri.c;
        const Vec3 origin{rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0),
                          rng.uniform(-12.0, 12.0)};
        const Vec3 toward = target - origin;
        const double length = causeray::norm(toward);
        if (length < 1e-6) continue;
        check_case(Ray{origin, (1.0 / length) * toward}, tri);
    }

    const Triangle tri{Vec3{0, 0, 0}, Vec3{4, 0, 0}, Vec3{0, 4, 0}};
    const auto unit = causeray::intersect_triangle(Ray{{0, 0, -1}, {0, 0, 1}}, tri);
    const auto two = causeray::intersect_triangle(Ray{{0, 0, -2}, {0, 0, 1}}, tri);
    const auto parallel = causeray::intersect_triangle(Ray{{0, 0, 1}, {1, 0, 0}}, tri);
    const auto coplanar = causeray::intersect_triangle(Ray{{-2, 0.5, 0}, {1, 0, 0}}, tri);

    Check c;
    c.expect(hits >= 1000, "too few hits (" + std::to_string(hits) + ") for a meaningful sample");
    c.expect(violations == 0, std::to_string(violations) + " hits violate the invariants");
    c.expect(unit.has_value() && unit->t == 1.0 && unit->u == 0.0 && unit->v == 0.0,
             "analytic t=1 case not exact");
    c.expect(two.has_value() && two->t == 2.0, "analytic t=2 case not exact");
    c.expect(!parallel.has_value() && !coplanar.has_value(), "parallel rays must miss");
    report(c.ok,
           "Intersection invariants over " + std::to_string(kRandomCases + kAimedCases) +
               " seeded cases",
           c.ok ? std::to_string(hits) + " hits checked" : c.why);
}

// --------------------------------------------------------------------------
// 5. Neighborhood selection properties over seeded scenes
// --------------------------------------------------------------------------
void criterion_neighborhood_properties() {
    constexpr std::size_t kScenes = 1000;
    const Vec3 offset{13.25, -4.5, 9.0};

    Check c;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; checked < kScenes && c.ok; ++seed) {
        Scene scene = harness::random_plane_scene(12, seed);
        const auto points = causeray::shooting_points(scene);

        std::string interest;
        for (const auto& [id, sp] : points) {
            if (sp.has_value()) {
                interest = id;
                break;
            }
        }
        if (interest.empty()) continue;
        ++checked;

        const auto sel = causeray::select_surrounding(points, interest, 7.5);

        // Partition: every camera lands in exactly one bucket.
        std::set<std::string> seen;
        seen.insert(interest);
        for (const auto& sp : sel.surrounding) seen.insert(sp.image_id);
        for (const auto& id : sel.excluded) seen.insert(id);
        for (const auto& id : sel.missed) seen.insert(id);
        const std::size_t bucketed =
            1 + sel.surrounding.size() + sel.excluded.size() + sel.missed.size();
        c.expect(seen.size() == scene.cameras.size() && bucketed == scene.cameras.size(),
                 "partition broken at seed " + std::to_string(seed));

        // Boundary inclusivity: a radius equal to an attained distance includes it.
        const auto& interest_point = points.at(interest)->point;
        for (const auto& [id, sp] : points) {
            if (id == interest || !sp.has_value()) continue;
            const double attained = causeray::distance(sp->point, interest_point);
            const auto at_boundary = causeray::select_surrounding(points, interest, attained);
            const bool included = std::any_of(
                at_boundary.surrounding.begin(), at_boundary.surrounding.end(),
                [&](const causeray::ShootingPoint& p) { return p.image_id == id; });
            c.expect(included, "boundary point excluded at seed " + std::to_string(seed));
            break;  // one boundary probe per scene
        }

        // Monotonicity: growing the radius never drops an image.
        std::vector<std::string> previous;
        for (const double radius : {1.0, 5.0, 25.0, 100.0}) {
            const auto grown = causeray::select_surrounding(points, interest, radius);
            std::vector<std::string> ids;
            for (const auto& sp : grown.surrounding) ids.push_back(sp.image_id);
            std::sort(ids.begin(), ids.end());
            c.expect(std::includes(ids.begin(), ids.end(), previous.begin(), previous.end()),
                     "monotonicity broken at seed " + std::to_string(seed));
            previous = std::move(ids);
        }

        // Translation invariance: shifting the whole scene preserves membership.
        Scene shifted = harness::random_plane_scene(12, seed);
        for (auto& v : shifted.mesh.vertices) v = v + offset;
        causeray::build_bvh(shifted.mesh);
        for (auto& cam : shifted.cameras) cam.position = cam.position + offset;
        const auto shifted_points = causeray::shooting_points(shifted);
        const auto shifted_sel = causeray::select_surrounding(shifted_points, interest, 7.5);
        c.expect(shifted_sel.surrounding.size() == sel.surrounding.size(),
                 "translation changed the selection at seed " + std::to_string(seed));
        if (shifted_sel.surrounding.size() == sel.surrounding.size()) {
            for (std::size_t i = 0; i < sel.surrounding.size(); ++i) {
                c.expect(shifted_sel.surrounding[i].image_id == sel.surrounding[i].image_id,
                         "translation reordered the selection at seed " + std::to_string(seed));
            }
        }
    }
    c.expect(checked >= kScenes, "only " + std::to_string(checked) + " scenes were usable");

    const auto fixture = harness::field_test_fixture();
    const Scene scene = fixture_scene(fixture);
    const auto points = causeray::shooting_points(scene);
    const auto sel = causeray::select_surrounding(points, fixture.interest_id, 1.0);
    c.expect(sel.surrounding.size() == 63,
             "fixture selected " + std::to_string(sel.surrounding.size()) + " surrounding images");

    report(c.ok, "Neighborhood selection properties over 1000 seeded scenes", c.why);
}

// --------------------------------------------------------------------------
// 6. QA round-trip and corpus determinism
// --------------------------------------------------------------------------
void criterion_qa_round_trip() {
    const Vocabulary vocab = Vocabulary::defaults();
    constexpr std::uint64_t kSeeds = 500;

    Check c;
    std::size_t asked = 0;
    std::size_t mismatches = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        harness::Rng rng(seed);
        std::vector<std::string> ids;
        for (int i = 0; i < 6; ++i) {
            ids.push_back("img_" + std::to_string(seed) + "_" + std::to_string(i));
        }
        const auto annotations = harness::random_annotations(ids, vocab, rng);
        AnnotationOracle oracle(annotations, vocab);

        causeray::QaGenOptions options;
        options.seed = seed;
        for (const auto& ann : annotations) {
            for (const auto& pair : causeray::generate_qa(ann, vocab, options)) {
                ++asked;
                const auto reply = oracle.ask(ann.image_id, pair.question);
                if (reply.status != causeray::OracleStatus::ok ||
                    reply.answer != pair.answer.value) {
                    ++mismatches;
                }
            }
        }

        const std::string once = causeray::corpus_to_jsonl(annotations, vocab, options);
        const std::string twice = causeray::corpus_to_jsonl(annotations, vocab, options);
        c.expect(once == twice, "corpus not byte-deterministic at seed " + std::to_string(seed));
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " oracle answers diverged");
    report(c.ok, "QA round-trip over 500 seeded annotation sets",
           c.ok ? std::to_string(asked) + " questions answered" : c.why);
}

// --------------------------------------------------------------------------
// 7. Report determinism across concurrency bounds and repeated runs
// --------------------------------------------------------------------------
void criterion_report_determinism() {
    const auto fixture = harness::field_test_fixture();
    const Scene scene = fixture_scene(fixture);
    const Vocabulary vocab = Vocabulary::defaults();
    AnnotationOracle oracle = fixture_oracle(fixture, vocab);

    Check c;
    std::string reference;
    for (const int threads : {1, 4, 8}) {
        for (int run = 0; run < 3; ++run) {
            causeray::DiagnoseOptions options;
            options.concurrency = threads;
            const auto result = causeray::diagnose(
                scene, fixture.interest_id, causeray::default_corrosion_rules(), oracle, options);
            const std::string json = causeray::report_to_json(result);
            if (reference.empty()) {
                reference = json;
            } else {
                c.expect(json == reference, "report bytes changed at concurrency " +
                                                std::to_string(threads) + " run " +
                                                std::to_string(run + 1));
            }
        }
    }
    report(c.ok, "Report bytes identical across concurrency 1/4/8, three runs each", c.why);
}

// --------------------------------------------------------------------------
// 8. Remote-oracle protocol conformance against a scripted endpoint
// --------------------------------------------------------------------------
void criterion_remote_conformance() {
    const auto fixture = harness::field_test_fixture();
    const Scene scene = fixture_scene(fixture);
    const Vocabulary vocab = Vocabulary::defaults();
    const auto annotations = causeray::parse_annotations(fixture.annotations_json, vocab);

    // Index every renderable question by its text so the endpoint can reverse
    // the lookup; answers come from the same annotations the local oracle sees.
    std::map<std::string, Question> index;
    const auto add = [&](TemplateId id, const causeray::Slots& slots) {
        Question q = causeray::render_question(id, slots);
        index.emplace(q.text, std::move(q));
    };
    for (const auto& member : vocab.members) {
        add(TemplateId::member_present, {member, ""});
        add(TemplateId::any_damage_on_member, {member, ""});
        add(TemplateId::what_damage_on_member, {member, ""});
        for (const auto& damage : vocab.damages) add(TemplateId::damage_on_member, {member, damage});
    }
    for (const auto& damage : vocab.damages) {
        add(TemplateId::damage_present, {"", damage});
        add(TemplateId::which_member_has_damage, {"", damage});
    }
    add(TemplateId::what_damage_in_image, {"", ""});

    AnnotationOracle backing(annotations, vocab);
    httplib::Server server;
    server.Post("/answer", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            res.status = 400;
            return;
        }
        const auto it = index.find(body.at("question_text").get<std::string>());
        if (it == index.end()) {
            res.status = 400;
            return;
        }
        const auto reply = backing.ask(body.at("image_id").get<std::string>(), it->second);
        if (reply.status == causeray::OracleStatus::unknown_image) {
            res.status = 404;
            return;
        }
        ordered_json out;
        out["answer"] = reply.status == causeray::OracleStatus::ok ? reply.answer : "nothing";
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        report(false, "Remote oracle conformance on the fixture", "could not bind a local port");
        return;
    }
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    AnnotationOracle local(annotations, vocab);
    causeray::DiagnoseOptions options;
    options.concurrency = 4;
    const auto local_report = causeray::diagnose(scene, fixture.interest_id,
                                                 causeray::default_corrosion_rules(), local, options);

    causeray::RemoteOracleOptions remote_options;
    remote_options.endpoint = "http://127.0.0.1:" + std::to_string(port);
    remote_options.backoff_base_seconds = 0.05;
    remote_options.timeout_seconds = 10.0;
    const auto remote = causeray::make_remote_oracle(remote_options, vocab);
    const auto remote_report = causeray::diagnose(scene, fixture.interest_id,
                                                  causeray::default_corrosion_rules(), *remote,
                                                  options);
    server.stop();
    listener.join();

    auto local_doc = ordered_json::parse(causeray::report_to_json(local_report));
    auto remote_doc = ordered_json::parse(causeray::report_to_json(remote_report));
    Check c;
    c.expect(local_doc.at("config").at("oracle") == "annotation" &&
                 remote_doc.at("config").at("oracle") == "remote",
             "oracle kinds not echoed");
    local_doc.erase("config");   // the config echo names the oracle kind,
    remote_doc.erase("config");  // which differs by design
    c.expect(local_doc == remote_doc, "remote report diverged from the annotation report");
    report(c.ok, "Remote oracle conformance on the fixture", c.why);
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        void (*run)();
    };
    const Criterion criteria[] = {
        {"Table 2 reproduction on the 64-image fixture", criterion_table_reproduction},
        {"Step-1 identification (corrosion on the cross beam)", criterion_identification},
        {"BVH nearest-hit equals the exhaustive scan", criterion_bvh_equivalence},
        {"Intersection invariants over 40000 seeded cases", criterion_intersection_properties},
        {"Neighborhood selection properties over 1000 seeded scenes",
         criterion_neighborhood_properties},
        {"QA round-trip over 500 seeded annotation sets", criterion_qa_round_trip},
        {"Report bytes identical across concurrency 1/4/8, three runs each",
         criterion_report_determinism},
        {"Remote oracle conformance on the fixture", criterion_remote_conformance},
    };
    for (const auto& criterion : criteria) {
        try {
            criterion.run();
        } catch (const std::exception& e) {
            report(false, criterion.name, std::string("unexpected exception: ") + e.what());
        }
    }
    return failures == 0 ? 0 : 1;
}
