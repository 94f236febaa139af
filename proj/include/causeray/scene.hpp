#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "causeray/geometry.hpp"

namespace causeray {

// Raised for malformed mesh/pose/annotation/rule documents. Messages always
// carry a location (line number or record index).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& message, std::size_t line = 0)
        : std::runtime_error(message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct CameraPose {
    std::string image_id;
    Vec3 position;   // meters
    Vec3 view_dir;   // unit optical-axis direction
    std::optional<std::string> image_path;
    Ray ray() const { return {position, view_dir}; }
};

struct Scene {
    TriangleMesh mesh;
    std::vector<CameraPose> cameras;
};

// ASCII OBJ subset: `v x y z` and `f i j k [l...]` (fan-triangulated),
// `#` comments; other directives are counted and ignored. Degenerate faces
// are dropped; their count lands in TriangleMesh::dropped_faces.
TriangleMesh parse_mesh_obj(std::string_view text);

// Pose document: JSON, either a top-level array or {"cameras": [...]}.
// Each record: {"image_id": ..., "position": [x,y,z]} plus exactly one of
// "view_dir": [x,y,z] or "rotation": [9 row-major camera-to-world numbers];
// optional "image_path". Rotation records resolve to view_dir = R * (0,0,1).
std::vector<CameraPose> parse_poses(std::string_view text);

std::string serialize_poses(const std::vector<CameraPose>& cameras);

std::string read_file(const std::string& path);

// Parses both inputs, builds the BVH, and validates the Scene invariants
// (non-empty mesh, at least one camera).
Scene load_scene(const std::string& mesh_path, const std::string& poses_path);

}  // namespace causeray
