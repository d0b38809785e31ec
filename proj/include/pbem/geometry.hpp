#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace pbem {

using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;

/// Flat triangle with cached derived quantities. Vertex order defines the normal.
struct Triangle {
    Vec3 a, b, c;
    Vec3 normal;   // unit, (b-a) x (c-a) direction
    Vec3 centroid;
    double area = 0.0;
    double diameter = 0.0; // longest edge

    Triangle() = default;
    Triangle(const Vec3& a_, const Vec3& b_, const Vec3& c_) : a(a_), b(b_), c(c_) {
        const Vec3 cr = (b - a).cross(c - a);
        const double twice = cr.norm();
        area = 0.5 * twice;
        normal = twice > 0.0 ? Vec3(cr / twice) : Vec3::Zero();
        centroid = (a + b + c) / 3.0;
        diameter = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    }

    Vec3 at(const Vec3& bary) const { return bary[0] * a + bary[1] * b + bary[2] * c; }

    const Vec3& vertex(int k) const { return k == 0 ? a : (k == 1 ? b : c); }
};

/// Signed solid angle subtended by triangle (a,b,c) seen from p (Van Oosterom-Strackee).
/// Positive when p lies on the side opposite to the triangle normal.
inline double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ra = a - p, rb = b - p, rc = c - p;
    const double la = ra.norm(), lb = rb.norm(), lc = rc.norm();
    const double num = ra.dot(rb.cross(rc));
    const double den = la * lb * lc + ra.dot(rb) * lc + ra.dot(rc) * lb + rb.dot(rc) * la;
    return 2.0 * std::atan2(num, den);
}

/// Distance from p to the closest point of triangle t.
inline double point_triangle_distance(const Vec3& p, const Triangle& t) {
    // Ericson, closest point on triangle by Voronoi regions.
    const Vec3 ab = t.b - t.a, ac = t.c - t.a, ap = p - t.a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return ap.norm();
    const Vec3 bp = p - t.b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return bp.norm();
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return (p - (t.a + d1 / (d1 - d3) * ab)).norm();
    const Vec3 cp = p - t.c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return cp.norm();
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return (p - (t.a + d2 / (d2 - d6) * ac)).norm();
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (t.b + w * (t.c - t.b))).norm();
    }
    const double denom = 1.0 / (va + vb + vc);
    return (p - (t.a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

} // namespace pbem
