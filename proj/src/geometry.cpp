#include "causeray/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace causeray {

std::optional<Hit> intersect_triangle(const Ray& ray, const Triangle& tri, double t_min) {
    const Vec3 e1 = tri.b - tri.a;
    const Vec3 e2 = tri.c - tri.a;
    const Vec3 pvec = cross(ray.direction, e2);
    const double det = dot(e1, pvec);
    if (std::fabs(det) < kParallelDetEps) {
        return std::nullopt;
    }
    const double inv_det = 1.0 / det;
    const Vec3 tvec = ray.origin - tri.a;
    const double u = dot(tvec, pvec) * inv_det;
    if (u < 0.0 || u > 1.0) {
        return std::nullopt;
    }
    const Vec3 qvec = cross(tvec, e1);
    const double v = dot(ray.direction, qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) {
        return std::nullopt;
    }
    const double t = dot(e2, qvec) * inv_det;
    if (t < t_min) {
        return std::nullopt;
    }
    return Hit{t, u, v, 0};
}

void Aabb::expand(const Vec3& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
    hi.z = std::max(hi.z, p.z);
}

void Aabb::expand(const Aabb& other) {
    expand(other.lo);
    expand(other.hi);
}

int Aabb::longest_axis() const {
    const Vec3 e = extent();
    if (e.x >= e.y && e.x >= e.z) return 0;
    if (e.y >= e.z) return 1;
    return 2;
}

namespace {

double axis_of(const Vec3& v, int axis) {
    switch (axis) {
        case 0: return v.x;
        case 1: return v.y;
        default: return v.z;
    }
}

// Conservative slab test over [t_min, t_max]. Zero direction components are
// handled by an explicit containment check so no division by zero occurs.
bool ray_intersects_box(const Ray& ray, const Aabb& box, double t_min, double t_max) {
    for (int axis = 0; axis < 3; ++axis) {
        const double o = axis_of(ray.origin, axis);
        const double d = axis_of(ray.direction, axis);
        const double lo = axis_of(box.lo, axis);
        const double hi = axis_of(box.hi, axis);
        if (std::fabs(d) < 1e-300) {
            if (o < lo || o > hi) return false;
            continue;
        }
        const double inv = 1.0 / d;
        double t0 = (lo - o) * inv;
        double t1 = (hi - o) * inv;
        if (t0 > t1) std::swap(t0, t1);
        t_min = std::max(t_min, t0);
        t_max = std::min(t_max, t1);
        if (t_min > t_max) return false;
    }
    return true;
}

double box_entry(const Ray& ray, const Aabb& box, double t_min, double t_max) {
    // Entry parameter for near/far child ordering; +inf when missed.
    double enter = t_min;
    double exit = t_max;
    for (int axis = 0; axis < 3; ++axis) {
        const double o = axis_of(ray.origin, axis);
        const double d = axis_of(ray.direction, axis);
        const double lo = axis_of(box.lo, axis);
        const double hi = axis_of(box.hi, axis);
        if (std::fabs(d) < 1e-300) {
            if (o < lo || o > hi) return std::numeric_limits<double>::infinity();
            continue;
        }
        const double inv = 1.0 / d;
        double t0 = (lo - o) * inv;
        double t1 = (hi - o) * inv;
        if (t0 > t1) std::swap(t0, t1);
        enter = std::max(enter, t0);
        exit = std::min(exit, t1);
        if (enter > exit) return std::numeric_limits<double>::infinity();
    }
    return enter;
}

constexpr std::uint32_t kLeafSize = 4;
constexpr int kMaxDepth = 64;
constexpr int kSahBins = 16;

struct BuildEntry {
    Aabb box;
    Vec3 centroid;
};

std::int32_t build_node(Bvh& bvh, std::vector<std::uint32_t>& order,
                        const std::vector<BuildEntry>& entries, std::uint32_t begin,
                        std::uint32_t end, int depth) {
    BvhNode node;
    for (std::uint32_t i = begin; i < end; ++i) {
        node.box.expand(entries[order[i]].box);
    }
    const std::uint32_t count = end - begin;
    if (count <= kLeafSize || depth >= kMaxDepth) {
        node.first = begin;
        node.count = count;
        bvh.nodes.push_back(node);
        return static_cast<std::int32_t>(bvh.nodes.size() - 1);
    }

    Aabb centroid_bounds;
    for (std::uint32_t i = begin; i < end; ++i) {
        centroid_bounds.expand(entries[order[i]].centroid);
    }
    const int axis = centroid_bounds.longest_axis();
    const double span = axis_of(centroid_bounds.extent(), axis);

    std::uint32_t mid = begin + count / 2;
    if (span > 0.0) {
        // Binned SAH split on the widest centroid axis.
        struct Bin {
            Aabb box;
            std::uint32_t count = 0;
        };
        std::array<Bin, kSahBins> bins;
        const double origin = axis_of(centroid_bounds.lo, axis);
        const double scale = kSahBins / span;
        auto bin_of = [&](std::uint32_t face) {
            const double c = axis_of(entries[face].centroid, axis);
            const int b = static_cast<int>((c - origin) * scale);
            return std::clamp(b, 0, kSahBins - 1);
        };
        for (std::uint32_t i = begin; i < end; ++i) {
            Bin& b = bins[static_cast<std::size_t>(bin_of(order[i]))];
            b.box.expand(entries[order[i]].box);
            b.count += 1;
        }

        double best_cost = std::numeric_limits<double>::infinity();
        int best_split = -1;
        auto half_area = [](const Aabb& b) {
            if (b.lo.x > b.hi.x) return 0.0;
            const Vec3 e = b.extent();
            return e.x * e.y + e.y * e.z + e.z * e.x;
        };
        for (int split = 1; split < kSahBins; ++split) {
            Aabb left_box, right_box;
            std::uint32_t left_count = 0, right_count = 0;
            for (int b = 0; b < split; ++b) {
                if (bins[b].count == 0) continue;
                left_box.expand(bins[b].box);
                left_count += bins[b].count;
            }
            for (int b = split; b < kSahBins; ++b) {
                if (bins[b].count == 0) continue;
                right_box.expand(bins[b].box);
                right_count += bins[b].count;
            }
            if (left_count == 0 || right_count == 0) continue;
            const double cost = half_area(left_box) * left_count + half_area(right_box) * right_count;
            if (cost < best_cost) {
                best_cost = cost;
                best_split = split;
            }
        }

        if (best_split >= 0) {
            auto* first = order.data() + begin;
            auto* last = order.data() + end;
            auto* pivot = std::stable_partition(
                first, last, [&](std::uint32_t face) { return bin_of(face) < best_split; });
            mid = begin + static_cast<std::uint32_t>(pivot - first);
        }
        if (mid == begin || mid == end) {
            mid = begin + count / 2;  // all centroids in one bin; fall back to an even split
        }
    }

    const std::int32_t left = build_node(bvh, order, entries, begin, mid, depth + 1);
    const std::int32_t right = build_node(bvh, order, entries, mid, end, depth + 1);
    node.left = left;
    node.right = right;
    bvh.nodes.push_back(node);
    return static_cast<std::int32_t>(bvh.nodes.size() - 1);
}

bool hit_better(const Hit& a, const Hit& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.triangle_index < b.triangle_index;
}

}  // namespace

void build_bvh(TriangleMesh& mesh) {
    mesh.bvh = Bvh{};
    mesh.bvh.built = true;
    if (mesh.faces.empty()) {
        return;
    }

    const std::size_t n = mesh.faces.size();
    std::vector<BuildEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Triangle tri = mesh.triangle(i);
        Aabb box;
        box.expand(tri.a);
        box.expand(tri.b);
        box.expand(tri.c);
        // Pad so roundoff in the slab test can never skip a face the exact
        // triangle test would report. Padding only widens the visited set.
        const double pad = 1e-9;
        box.lo = box.lo - Vec3{pad, pad, pad};
        box.hi = box.hi + Vec3{pad, pad, pad};
        entries[i].box = box;
        entries[i].centroid = (1.0 / 3.0) * (tri.a + tri.b + tri.c);
    }

    mesh.bvh.order.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        mesh.bvh.order[i] = static_cast<std::uint32_t>(i);
    }
    mesh.bvh.nodes.reserve(2 * n);

    mesh.bvh.root =
        build_node(mesh.bvh, mesh.bvh.order, entries, 0, static_cast<std::uint32_t>(n), 0);
}

std::optional<Hit> nearest_hit(const TriangleMesh& mesh, const Ray& ray) {
    if (!mesh.bvh.built) {
        throw std::logic_error("nearest_hit: BVH not built (call build_bvh first)");
    }
    if (mesh.bvh.nodes.empty()) {
        return std::nullopt;
    }

    std::optional<Hit> best;
    double best_t = std::numeric_limits<double>::infinity();

    std::array<std::int32_t, 128> stack;
    int top = 0;
    stack[top++] = mesh.bvh.root;

    while (top > 0) {
        const BvhNode& node = mesh.bvh.nodes[static_cast<std::size_t>(stack[--top])];
        if (!ray_intersects_box(ray, node.box, kRayTMin, best_t)) {
            continue;
        }
        if (node.is_leaf()) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const std::uint32_t face = mesh.bvh.order[i];
                auto hit = intersect_triangle(ray, mesh.triangle(face));
                if (!hit) continue;
                hit->triangle_index = face;
                if (!best || hit_better(*hit, *best)) {
                    best = *hit;
                    best_t = hit->t;
                }
            }
            continue;
        }
        // Visit the nearer child first; order affects speed only, the
        // (t, face index) minimum is traversal-order independent.
        const double enter_left =
            box_entry(ray, mesh.bvh.nodes[static_cast<std::size_t>(node.left)].box, kRayTMin, best_t);
        const double enter_right =
            box_entry(ray, mesh.bvh.nodes[static_cast<std::size_t>(node.right)].box, kRayTMin, best_t);
        std::int32_t near = node.left, far = node.right;
        if (enter_right < enter_left) {
            std::swap(near, far);
        }
        if (top + 2 > static_cast<int>(stack.size())) {
            throw std::logic_error("nearest_hit: traversal stack overflow");
        }
        stack[top++] = far;
        stack[top++] = near;
    }
    return best;
}

}  // namespace causeray
