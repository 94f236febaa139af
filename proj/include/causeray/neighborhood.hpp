#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "causeray/scene.hpp"
#include "json.hpp"

namespace causeray {

class NeighborhoodError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Nearest camera-ray/mesh intersection; stands in for where the image was taken.
struct ShootingPoint {
    std::string image_id;
    Vec3 point;
    double t = 0.0;
    std::size_t triangle_index = 0;
};

// Keyed by image_id (sorted); cameras that miss the mesh map to nullopt.
using ShootingPointMap = std::map<std::string, std::optional<ShootingPoint>>;

ShootingPointMap shooting_points(const Scene& scene, int threads = 1);

struct NeighborhoodSelection {
    ShootingPoint interest;
    std::vector<ShootingPoint> surrounding;  // sorted by (distance to interest, image_id)
    std::vector<std::string> excluded;       // shooting point outside the ball
    std::vector<std::string> missed;         // no mesh hit
    double radius = 1.0;
};

// Ball membership is boundary-inclusive (distance <= radius). Throws
// NeighborhoodError when interest_id is unknown or missed the mesh.
NeighborhoodSelection select_surrounding(const ShootingPointMap& points,
                                         const std::string& interest_id, double radius = 1.0);

nlohmann::ordered_json shooting_points_to_json(const ShootingPointMap& points);
nlohmann::ordered_json selection_to_json(const NeighborhoodSelection& selection);

}  // namespace causeray
