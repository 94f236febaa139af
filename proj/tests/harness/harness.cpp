#include "harness.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace harness {

using causeray::Annotation;
using causeray::CameraPose;
using causeray::Hit;
using causeray::Ray;
using causeray::Scene;
using causeray::Triangle;
using causeray::TriangleMesh;
using causeray::Vec3;

std::optional<Hit> plane_barycentric_intersect(const Ray& ray, const Triangle& tri) {
    const Vec3 v0 = tri.b - tri.a;
    const Vec3 v1 = tri.c - tri.a;
    const Vec3 normal = cross(v0, v1);
    // |dot(normal, d)| equals the production determinant magnitude, so the
    // parallel rejection threshold lines up exactly.
    const double denom = dot(normal, ray.direction);
    if (std::abs(denom) < causeray::kParallelDetEps) return std::nullopt;

    const double t = dot(normal, tri.a - ray.origin) / denom;
    if (t < causeray::kRayTMin) return std::nullopt;

    const Vec3 p = ray.at(t);
    const Vec3 v2 = p - tri.a;
    const double d00 = dot(v0, v0);
    const double d01 = dot(v0, v1);
    const double d11 = dot(v1, v1);
    const double d20 = dot(v2, v0);
    const double d21 = dot(v2, v1);
    const double bden = d00 * d11 - d01 * d01;
    if (bden <= 0.0) return std::nullopt;  // degenerate triangle

    const double u = (d11 * d20 - d01 * d21) / bden;  // weight on b
    const double v = (d00 * d21 - d01 * d20) / bden;  // weight on c
    if (u < 0.0 || v < 0.0 || u + v > 1.0) return std::nullopt;
    return Hit{t, u, v, 0};
}

std::optional<Hit> naive_nearest_hit(const TriangleMesh& mesh, const Ray& ray) {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        auto hit = causeray::intersect_triangle(ray, mesh.triangle(i));
        if (!hit) continue;
        hit->triangle_index = static_cast<std::uint32_t>(i);
        if (!best || hit->t < best->t) best = hit;
    }
    return best;
}

Triangle random_triangle(Rng& rng, double extent) {
    const auto point = [&] {
        return Vec3{rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                    rng.uniform(-extent, extent)};
    };
    return Triangle{point(), point(), point()};
}

Ray random_ray(Rng& rng, double extent) {
    const Vec3 origin{rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent)};
    Vec3 dir;
    double n = 0.0;
    do {
        dir = Vec3{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        n = norm(dir);
    } while (n < 1e-3 || n > 1.0);
    return Ray{origin, (1.0 / n) * dir};
}

TriangleMesh random_soup(std::size_t count, std::uint64_t seed, double extent) {
    Rng rng(seed);
    TriangleMesh mesh;
    mesh.vertices.reserve(count * 3);
    mesh.faces.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        // Mostly small triangles around a random center, with the occasional
        // large one so the hierarchy has to handle mixed scales.
        const double size = (i % 97 == 0) ? extent * 0.5 : 0.5;
        const Vec3 center{rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                          rng.uniform(-extent, extent)};
        const auto corner = [&] {
            return center + Vec3{rng.uniform(-size, size), rng.uniform(-size, size),
                                 rng.uniform(-size, size)};
        };
        const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(corner());
        mesh.vertices.push_back(corner());
        mesh.vertices.push_back(corner());
        mesh.faces.push_back({base, base + 1, base + 2});
    }
    return mesh;
}

namespace {

void append_quad(TriangleMesh& mesh, double extent, double z) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back({-extent, -extent, z});
    mesh.vertices.push_back({extent, -extent, z});
    mesh.vertices.push_back({extent, extent, z});
    mesh.vertices.push_back({-extent, extent, z});
    mesh.faces.push_back({base, base + 1, base + 2});
    mesh.faces.push_back({base, base + 2, base + 3});
}

std::string camera_id(std::size_t i) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "cam_%03zu", i);
    return buffer;
}

}  // namespace

Scene two_plane_scene(std::size_t cameras, std::uint64_t seed, double upper_z, double extent) {
    Scene scene;
    append_quad(scene.mesh, extent, 0.0);
    append_quad(scene.mesh, extent, upper_z);
    causeray::build_bvh(scene.mesh);

    Rng rng(seed);
    for (std::size_t i = 0; i < cameras; ++i) {
        CameraPose cam;
        cam.image_id = camera_id(i);
        cam.position = Vec3{rng.uniform(-extent * 0.8, extent * 0.8),
                            rng.uniform(-extent * 0.8, extent * 0.8),
                            upper_z + 1.0 + rng.uniform(0.0, 3.0)};
        cam.view_dir = Vec3{0.0, 0.0, -1.0};
        scene.cameras.push_back(std::move(cam));
    }
    return scene;
}

Scene random_plane_scene(std::size_t cameras, std::uint64_t seed) {
    Scene scene;
    append_quad(scene.mesh, 100.0, 0.0);
    causeray::build_bvh(scene.mesh);

    Rng rng(seed);
    for (std::size_t i = 0; i < cameras; ++i) {
        CameraPose cam;
        cam.image_id = camera_id(i);
        cam.position =
            Vec3{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0), rng.uniform(2.0, 30.0)};
        const double dz = (rng.below(5) == 0) ? 1.0 : -1.0;  // 1 in 5 looks away
        Vec3 dir{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), dz};
        cam.view_dir = normalized(dir);
        scene.cameras.push_back(std::move(cam));
    }
    return scene;
}

std::vector<Annotation> random_annotations(const std::vector<std::string>& image_ids,
                                           const causeray::Vocabulary& vocab, Rng& rng) {
    std::vector<Annotation> annotations;
    annotations.reserve(image_ids.size());
    for (const auto& id : image_ids) {
        Annotation ann;
        ann.image_id = id;

        std::vector<std::size_t> member_pool(vocab.members.size());
        for (std::size_t i = 0; i < member_pool.size(); ++i) member_pool[i] = i;
        const std::size_t member_count = rng.below(vocab.members.size() + 1);
        for (std::size_t k = 0; k < member_count; ++k) {
            const std::size_t pick = rng.below(member_pool.size());
            causeray::MemberAnnotation member;
            member.name = vocab.members[member_pool[pick]];
            member_pool.erase(member_pool.begin() + static_cast<std::ptrdiff_t>(pick));

            std::vector<std::size_t> damage_pool(vocab.damages.size());
            for (std::size_t i = 0; i < damage_pool.size(); ++i) damage_pool[i] = i;
            const std::size_t damage_count = rng.below(4);  // bias toward few damages
            for (std::size_t d = 0; d < damage_count && !damage_pool.empty(); ++d) {
                const std::size_t dpick = rng.below(damage_pool.size());
                member.damages.push_back(vocab.damages[damage_pool[dpick]]);
                damage_pool.erase(damage_pool.begin() + static_cast<std::ptrdiff_t>(dpick));
            }
            ann.members.push_back(std::move(member));
        }
        annotations.push_back(std::move(ann));
    }
    return annotations;
}

namespace {

std::string image_id(std::size_t i) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "img_%03zu", i);
    return buffer;
}

std::string box_obj_text() {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "# box girder segment, 8 x 4 x 1 m\n";
    out << "o segment\n";
    out << "usemtl concrete\n";
    const double xs[] = {0.0, 8.0};
    const double ys[] = {0.0, 4.0};
    const double zs[] = {0.0, 1.0};
    // 1-4 bottom ring (z=0), 5-8 top ring (z=1)
    for (const double z : zs) {
        out << "v " << xs[0] << " " << ys[0] << " " << z << "\n";
        out << "v " << xs[1] << " " << ys[0] << " " << z << "\n";
        out << "v " << xs[1] << " " << ys[1] << " " << z << "\n";
        out << "v " << xs[0] << " " << ys[1] << " " << z << "\n";
    }
    out << "f 1 2 3\nf 1 3 4\n";          // bottom
    out << "f 5 7 6\nf 5 8 7\n";          // top
    out << "f 1 5 6\nf 1 6 2\n";          // y = 0 side
    out << "f 2 6 7\nf 2 7 3\n";          // x = 8 side
    out << "f 3 7 8\nf 3 8 4\n";          // y = 4 side
    out << "f 4 8 5\nf 4 5 1\n";          // x = 0 side
    return out.str();
}

}  // namespace

Fixture field_test_fixture() {
    Fixture fixture;
    fixture.interest_id = image_id(0);
    fixture.obj_text = box_obj_text();

    // Cameras hang below the girder looking straight up; each shooting point
    // is the camera's (x, y) on the bottom face. The 63 surrounding targets
    // sit on a spiral of radius 0.1..0.8 m around the interest point, all
    // inside the 1 m ball.
    const Vec3 center{4.0, 2.0, 0.0};
    std::vector<CameraPose> cameras;
    {
        CameraPose cam;
        cam.image_id = fixture.interest_id;
        cam.position = Vec3{center.x, center.y, -0.5};
        cam.view_dir = Vec3{0.0, 0.0, 1.0};
        cameras.push_back(std::move(cam));
    }
    const double golden = 2.399963229728653;  // radians
    for (std::size_t i = 1; i <= 63; ++i) {
        const double r = 0.1 + 0.7 * static_cast<double>(i - 1) / 62.0;
        const double theta = golden * static_cast<double>(i);
        const double standoff = 0.4 + 0.005 * static_cast<double>(i);
        CameraPose cam;
        cam.image_id = image_id(i);
        cam.position =
            Vec3{center.x + r * std::cos(theta), center.y + r * std::sin(theta), -standoff};
        cam.view_dir = Vec3{0.0, 0.0, 1.0};
        cameras.push_back(std::move(cam));
    }
    fixture.poses_json = causeray::serialize_poses(cameras);

    // Annotation script. Counts, over the 64 analysed images:
    //   slab present in img_001..img_061 (61); cracking/leaking on it in
    //   img_001..img_058 (58); abutment present in img_042..img_063 (22);
    //   leaking on it in img_042..img_059 (18); drainage pipe and wheel
    //   guard nowhere.
    std::vector<Annotation> annotations;
    for (std::size_t i = 0; i <= 63; ++i) {
        Annotation ann;
        ann.image_id = image_id(i);
        ann.members.push_back({"main girder", {}});
        if (i == 0) {
            ann.members.push_back({"cross beam", {"corrosion"}});
        }
        if (i >= 1 && i <= 61) {
            causeray::MemberAnnotation slab;
            slab.name = "slab";
            if (i <= 58) slab.damages.push_back(i % 2 == 1 ? "cracking" : "leaking");
            ann.members.push_back(std::move(slab));
        }
        if (i >= 42 && i <= 63) {
            causeray::MemberAnnotation abutment;
            abutment.name = "abutment";
            if (i <= 59) abutment.damages.push_back("leaking");
            ann.members.push_back(std::move(abutment));
        }
        annotations.push_back(std::move(ann));
    }
    fixture.annotations_json = causeray::serialize_annotations(annotations);
    return fixture;
}

}  // namespace harness
