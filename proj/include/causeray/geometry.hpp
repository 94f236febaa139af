#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace causeray {

// All positions are metric (meters); directions are unit vectors.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
inline Vec3 operator*(const Vec3& v, double s) { return s * v; }
inline bool operator==(const Vec3& a, const Vec3& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm_squared(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm_squared(v)); }
inline Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    return {v.x / n, v.y / n, v.z / n};
}
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
    Vec3 at(double t) const { return origin + t * direction; }
};

struct Triangle {
    Vec3 a;
    Vec3 b;
    Vec3 c;
    double area() const { return 0.5 * norm(cross(b - a, c - a)); }
};

struct Hit {
    double t = 0.0;  // ray parameter, meters
    double u = 0.0;  // barycentric weight of vertex b
    double v = 0.0;  // barycentric weight of vertex c
    std::size_t triangle_index = 0;
};

// Hits closer than this are treated as self-intersections at the ray origin.
inline constexpr double kRayTMin = 1e-6;
// Moller-Trumbore determinant magnitudes below this classify the ray as parallel.
inline constexpr double kParallelDetEps = 1e-12;
// Faces with area at or below this (m^2) are dropped at mesh load.
inline constexpr double kDegenerateAreaEps = 1e-12;

// Moller-Trumbore, both orientations (no backface culling).
std::optional<Hit> intersect_triangle(const Ray& ray, const Triangle& tri, double t_min = kRayTMin);

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void expand(const Vec3& p);
    void expand(const Aabb& other);
    Vec3 extent() const { return hi - lo; }
    int longest_axis() const;
};

struct BvhNode {
    Aabb box;
    std::uint32_t first = 0;  // leaf: offset into Bvh::order
    std::uint32_t count = 0;  // leaf: face count; 0 marks an internal node
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool is_leaf() const { return count > 0; }
};

struct Bvh {
    std::vector<BvhNode> nodes;
    std::vector<std::uint32_t> order;  // face indices permuted by construction
    std::int32_t root = -1;
    bool built = false;
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    Bvh bvh;
    std::size_t dropped_faces = 0;       // degenerate faces removed at load
    std::size_t ignored_directives = 0;  // OBJ lines other than v/f/comment

    Triangle triangle(std::size_t face) const {
        const auto& f = faces[face];
        return {vertices[f[0]], vertices[f[1]], vertices[f[2]]};
    }
    bool empty() const { return faces.empty(); }
    bool indexed() const { return bvh.built; }
};

// Builds the acceleration index. Queries afterwards are bit-identical to an
// exhaustive scan over all faces.
void build_bvh(TriangleMesh& mesh);

// Nearest intersection with t >= kRayTMin; ties on t resolve to the lowest
// face index, independent of traversal order. Requires a built index.
std::optional<Hit> nearest_hit(const TriangleMesh& mesh, const Ray& ray);

}  // namespace causeray
