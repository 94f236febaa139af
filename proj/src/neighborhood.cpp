#include "causeray/neighborhood.hpp"

#include <algorithm>

#include "causeray/parallel.hpp"

namespace causeray {

ShootingPointMap shooting_points(const Scene& scene, int threads) {
    std::vector<std::optional<ShootingPoint>> slots(scene.cameras.size());
    parallel_for(scene.cameras.size(), threads, [&](std::size_t i) {
        const CameraPose& cam = scene.cameras[i];
        const auto hit = nearest_hit(scene.mesh, cam.ray());
        if (hit) {
            slots[i] = ShootingPoint{cam.image_id, cam.ray().at(hit->t), hit->t, hit->triangle_index};
        }
    });
    ShootingPointMap out;
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        out.emplace(scene.cameras[i].image_id, std::move(slots[i]));
    }
    return out;
}

NeighborhoodSelection select_surrounding(const ShootingPointMap& points,
                                         const std::string& interest_id, double radius) {
    if (radius < 0.0) {
        throw NeighborhoodError("radius must be non-negative");
    }
    const auto it = points.find(interest_id);
    if (it == points.end()) {
        throw NeighborhoodError("interest image '" + interest_id + "' is not in the scene");
    }
    if (!it->second.has_value()) {
        throw NeighborhoodError("interest image '" + interest_id +
                                "' has no shooting point (camera ray misses the mesh)");
    }

    NeighborhoodSelection sel;
    sel.interest = *it->second;
    sel.radius = radius;
    for (const auto& [id, sp] : points) {
        if (id == interest_id) continue;
        if (!sp.has_value()) {
            sel.missed.push_back(id);
            continue;
        }
        if (distance(sp->point, sel.interest.point) <= radius) {
            sel.surrounding.push_back(*sp);
        } else {
            sel.excluded.push_back(id);
        }
    }
    std::sort(sel.surrounding.begin(), sel.surrounding.end(),
              [&](const ShootingPoint& a, const ShootingPoint& b) {
                  const double da = distance(a.point, sel.interest.point);
                  const double db = distance(b.point, sel.interest.point);
                  if (da != db) return da < db;
                  return a.image_id < b.image_id;
              });
    // excluded/missed inherit the map's id order, already sorted.
    return sel;
}

namespace {

nlohmann::ordered_json point_to_json(const ShootingPoint& sp) {
    nlohmann::ordered_json j;
    j["image_id"] = sp.image_id;
    j["point"] = {sp.point.x, sp.point.y, sp.point.z};
    j["t"] = sp.t;
    j["triangle_index"] = sp.triangle_index;
    return j;
}

}  // namespace

nlohmann::ordered_json shooting_points_to_json(const ShootingPointMap& points) {
    nlohmann::ordered_json doc;
    doc["points"] = nlohmann::ordered_json::array();
    doc["missed"] = nlohmann::ordered_json::array();
    for (const auto& [id, sp] : points) {
        if (sp.has_value()) {
            doc["points"].push_back(point_to_json(*sp));
        } else {
            doc["missed"].push_back(id);
        }
    }
    return doc;
}

nlohmann::ordered_json selection_to_json(const NeighborhoodSelection& selection) {
    nlohmann::ordered_json doc;
    doc["interest"] = point_to_json(selection.interest);
    doc["radius"] = selection.radius;
    doc["surrounding"] = nlohmann::ordered_json::array();
    for (const auto& sp : selection.surrounding) {
        auto j = point_to_json(sp);
        j["distance"] = distance(sp.point, selection.interest.point);
        doc["surrounding"].push_back(std::move(j));
    }
    doc["excluded"] = selection.excluded;
    doc["missed"] = selection.missed;
    return doc;
}

}  // namespace causeray
