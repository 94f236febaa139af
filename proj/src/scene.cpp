#include "causeray/scene.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace causeray {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_double(std::string_view token, std::size_t line_no, const char* what) {
    double value = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed " + what + " '" +
                             std::string(token) + "'",
                         line_no);
    }
    return value;
}

// Face vertex references may carry /texture/normal suffixes; only the
// leading vertex index is used.
long parse_face_index(std::string_view token, std::size_t line_no) {
    const std::size_t slash = token.find('/');
    const std::string_view head = slash == std::string_view::npos ? token : token.substr(0, slash);
    long value = 0;
    const auto* end = head.data() + head.size();
    auto [ptr, ec] = std::from_chars(head.data(), end, value);
    if (ec != std::errc{} || ptr != end || head.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed face index '" +
                             std::string(token) + "'",
                         line_no);
    }
    return value;
}

}  // namespace

TriangleMesh parse_mesh_obj(std::string_view text) {
    TriangleMesh mesh;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            eol == std::string_view::npos ? text.substr(pos) : text.substr(pos, eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const std::size_t comment = line.find('#');
        if (comment != std::string_view::npos) line = line.substr(0, comment);
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;

        if (tokens[0] == "v") {
            if (tokens.size() < 4) {
                throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates",
                                 line_no);
            }
            mesh.vertices.push_back({parse_double(tokens[1], line_no, "coordinate"),
                                     parse_double(tokens[2], line_no, "coordinate"),
                                     parse_double(tokens[3], line_no, "coordinate")});
        } else if (tokens[0] == "f") {
            if (tokens.size() < 4) {
                throw ParseError("line " + std::to_string(line_no) + ": face needs at least 3 indices",
                                 line_no);
            }
            std::vector<std::uint32_t> corners;
            corners.reserve(tokens.size() - 1);
            for (std::size_t i = 1; i < tokens.size(); ++i) {
                long idx = parse_face_index(tokens[i], line_no);
                if (idx < 0) idx += static_cast<long>(mesh.vertices.size()) + 1;
                if (idx < 1 || idx > static_cast<long>(mesh.vertices.size())) {
                    throw ParseError("line " + std::to_string(line_no) + ": face index " +
                                         std::string(tokens[i]) + " out of range (have " +
                                         std::to_string(mesh.vertices.size()) + " vertices)",
                                     line_no);
                }
                corners.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            for (std::size_t i = 1; i + 1 < corners.size(); ++i) {
                const std::array<std::uint32_t, 3> face{corners[0], corners[i], corners[i + 1]};
                const Triangle tri{mesh.vertices[face[0]], mesh.vertices[face[1]],
                                   mesh.vertices[face[2]]};
                if (tri.area() > kDegenerateAreaEps) {
                    mesh.faces.push_back(face);
                } else {
                    mesh.dropped_faces += 1;
                }
            }
        } else {
            mesh.ignored_directives += 1;
        }
    }
    if (mesh.faces.empty()) {
        throw ParseError("mesh has no usable faces after filtering (" +
                         std::to_string(mesh.dropped_faces) + " degenerate dropped)");
    }
    return mesh;
}

namespace {

Vec3 parse_vec3_field(const ordered_json& record, const char* key, std::size_t index) {
    const auto& field = record.at(key);
    if (!field.is_array() || field.size() != 3 || !field[0].is_number() || !field[1].is_number() ||
        !field[2].is_number()) {
        throw ParseError("camera record " + std::to_string(index) + ": '" + key +
                         "' must be an array of 3 numbers");
    }
    return {field[0].get<double>(), field[1].get<double>(), field[2].get<double>()};
}

Vec3 view_dir_from_rotation(const ordered_json& field, std::size_t index) {
    if (!field.is_array() || field.size() != 9) {
        throw ParseError("camera record " + std::to_string(index) +
                         ": 'rotation' must be 9 row-major numbers");
    }
    std::array<double, 9> r{};
    for (std::size_t i = 0; i < 9; ++i) {
        if (!field[i].is_number()) {
            throw ParseError("camera record " + std::to_string(index) +
                             ": 'rotation' must be 9 row-major numbers");
        }
        r[i] = field[i].get<double>();
    }
    // Orthonormality: R^T R = I within 1e-3, proper orientation.
    double max_dev = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += r[3 * k + i] * r[3 * k + j];
            max_dev = std::max(max_dev, std::fabs(s - (i == j ? 1.0 : 0.0)));
        }
    }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (max_dev > 1e-3 || det <= 0.0) {
        throw ParseError("camera record " + std::to_string(index) +
                         ": 'rotation' is not orthonormal (deviation " + std::to_string(max_dev) +
                         ")");
    }
    // Camera-to-world rotation, +Z optical axis: the third column.
    return {r[2], r[5], r[8]};
}

}  // namespace

std::vector<CameraPose> parse_poses(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("pose document: ") + e.what());
    }
    const ordered_json* records = &doc;
    if (doc.is_object()) {
        if (!doc.contains("cameras")) {
            throw ParseError("pose document: expected a top-level array or a 'cameras' key");
        }
        records = &doc.at("cameras");
    }
    if (!records->is_array()) {
        throw ParseError("pose document: camera list must be an array");
    }

    std::vector<CameraPose> cameras;
    cameras.reserve(records->size());
    std::unordered_set<std::string> seen;
    std::size_t index = 0;
    for (const auto& record : *records) {
        if (!record.is_object() || !record.contains("image_id") ||
            !record.at("image_id").is_string()) {
            throw ParseError("camera record " + std::to_string(index) +
                             ": missing string 'image_id'");
        }
        CameraPose pose;
        pose.image_id = record.at("image_id").get<std::string>();
        if (pose.image_id.empty()) {
            throw ParseError("camera record " + std::to_string(index) + ": empty image_id");
        }
        if (!record.contains("position")) {
            throw ParseError("camera record " + std::to_string(index) + " ('" + pose.image_id +
                             "'): missing 'position'");
        }
        pose.position = parse_vec3_field(record, "position", index);

        const bool has_dir = record.contains("view_dir");
        const bool has_rot = record.contains("rotation");
        if (has_dir == has_rot) {
            throw ParseError("camera record " + std::to_string(index) + " ('" + pose.image_id +
                             "'): exactly one of 'view_dir' or 'rotation' is required");
        }
        Vec3 dir = has_dir ? parse_vec3_field(record, "view_dir", index)
                           : view_dir_from_rotation(record.at("rotation"), index);
        const double len = norm(dir);
        if (len < 1e-12) {
            throw ParseError("camera record " + std::to_string(index) + " ('" + pose.image_id +
                             "'): zero-length view direction");
        }
        pose.view_dir = {dir.x / len, dir.y / len, dir.z / len};
        if (record.contains("image_path") && record.at("image_path").is_string()) {
            pose.image_path = record.at("image_path").get<std::string>();
        }
        if (!seen.insert(pose.image_id).second) {
            throw ParseError("camera record " + std::to_string(index) + ": duplicate image_id '" +
                             pose.image_id + "'");
        }
        cameras.push_back(std::move(pose));
        ++index;
    }
    return cameras;
}

std::string serialize_poses(const std::vector<CameraPose>& cameras) {
    ordered_json list = ordered_json::array();
    for (const auto& cam : cameras) {
        ordered_json record;
        record["image_id"] = cam.image_id;
        record["position"] = {cam.position.x, cam.position.y, cam.position.z};
        record["view_dir"] = {cam.view_dir.x, cam.view_dir.y, cam.view_dir.z};
        if (cam.image_path) record["image_path"] = *cam.image_path;
        list.push_back(std::move(record));
    }
    ordered_json doc;
    doc["cameras"] = std::move(list);
    return doc.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Scene load_scene(const std::string& mesh_path, const std::string& poses_path) {
    Scene scene;
    scene.mesh = parse_mesh_obj(read_file(mesh_path));
    scene.cameras = parse_poses(read_file(poses_path));
    if (scene.cameras.empty()) {
        throw ParseError("pose document '" + poses_path + "' contains no cameras");
    }
    build_bvh(scene.mesh);
    return scene;
}

}  // namespace causeray
