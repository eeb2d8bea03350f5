#pragma once

// Rotation algebra: frames as SO(3) matrices, unit quaternions, spherical
// geodesics and Frechet means of rotations.

#include <etrep/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace etrep {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr double kUnitNormTol = 1e-12;
inline constexpr double kAntipodalTol = 1e-8;
inline constexpr double kUnitAxisTol = 1e-9;

/// Wraps an angle into [-pi, pi].
inline double wrap_angle(double angle) { return std::remainder(angle, 2.0 * kPi); }

inline Mat3 skew(const Vec3& w) {
    Mat3 m;
    m << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
        -w.y(), w.x(), 0.0;
    return m;
}

/// An element of SO(3). Columns are the frame axes (t, a, b).
class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}

    /// Checked construction; throws ValidationError unless R^T R = I and
    /// det R = 1 within kOrthonormalTol.
    static Rotation from_matrix(const Mat3& m) {
        const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
        const double det = m.determinant();
        if (!m.allFinite() || ortho > kOrthonormalTol || std::abs(det - 1.0) > kOrthonormalTol) {
            throw ValidationError("matrix is not a proper rotation (orthonormality error " +
                                  std::to_string(ortho) + ", det " + std::to_string(det) + ")");
        }
        return Rotation(m);
    }

    // For matrices that are rotations by construction.
    static Rotation unchecked(const Mat3& m) { return Rotation(m); }

    static Rotation identity() { return Rotation(); }

    const Mat3& matrix() const noexcept { return m_; }
    Vec3 t() const { return m_.col(0); }
    Vec3 a() const { return m_.col(1); }
    Vec3 b() const { return m_.col(2); }

    Rotation inverse() const { return Rotation(m_.transpose()); }

    friend Rotation operator*(const Rotation& lhs, const Rotation& rhs) {
        return Rotation(lhs.m_ * rhs.m_);
    }
    friend Vec3 operator*(const Rotation& r, const Vec3& v) { return r.m_ * v; }

private:
    explicit Rotation(const Mat3& m) : m_(m) {}
    Mat3 m_;
};

/// Unit quaternion (w, x, y, z), always stored in canonical sign: w > 0, or
/// when w == 0 the first nonzero component is positive. q and -q therefore
/// construct the same value.
class UnitQuaternion {
public:
    UnitQuaternion() : q_(1.0, 0.0, 0.0, 0.0) {}

    /// Throws ValidationError unless the 4-vector has unit norm within kUnitNormTol.
    UnitQuaternion(double w, double x, double y, double z) : q_(w, x, y, z) {
        if (!q_.allFinite() || std::abs(q_.norm() - 1.0) > kUnitNormTol) {
            throw ValidationError("quaternion is not unit norm (|q| = " + std::to_string(q_.norm()) + ")");
        }
        canonicalize();
    }

    /// Normalizes an arbitrary nonzero 4-vector (w, x, y, z).
    static UnitQuaternion normalized(const Vec4& v) {
        const double n = v.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero quaternion");
        UnitQuaternion q;
        q.q_ = v / n;
        q.canonicalize();
        return q;
    }

    double w() const noexcept { return q_[0]; }
    double x() const noexcept { return q_[1]; }
    double y() const noexcept { return q_[2]; }
    double z() const noexcept { return q_[3]; }
    const Vec4& coeffs() const noexcept { return q_; }

    double dot(const UnitQuaternion& o) const { return q_.dot(o.q_); }

private:
    void canonicalize() {
        for (int i = 0; i < 4; ++i) {
            if (q_[i] != 0.0) {
                if (q_[i] < 0.0) q_ = -q_;
                return;
            }
        }
    }

    Vec4 q_;
};

inline UnitQuaternion quat_from_rotation(const Rotation& rot) {
    const Mat3& m = rot.matrix();
    const double trace = m.trace();
    Vec4 q;
    // Shepperd: pivot on the largest of (w, x, y, z) for conditioning.
    if (trace >= m(0, 0) && trace >= m(1, 1) && trace >= m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + trace);
        q << 0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s;
    } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
        q << (m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s;
    } else if (m(1, 1) >= m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
        q << (m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s;
    } else {
        const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
        q << (m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s;
    }
    return UnitQuaternion::normalized(q);
}

// Throws ValidationError when m is not a rotation.
inline UnitQuaternion quat_from_rotation(const Mat3& m) {
    return quat_from_rotation(Rotation::from_matrix(m));
}

inline Rotation rotation_from_quat(const UnitQuaternion& q) {
    const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
    Mat3 m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return Rotation::unchecked(m);
}

/// Spherical distance on S^3 after identifying q with -q; lies in [0, pi/2]
/// and equals half the angle of the relative rotation. Evaluated as
/// 2 atan2(|p - q|, |p + q|), which equals acos(p.q) but keeps full precision
/// for nearby points.
inline double geodesic_distance(const UnitQuaternion& p, const UnitQuaternion& q) {
    const Vec4 qa = p.dot(q) < 0.0 ? Vec4(-q.coeffs()) : q.coeffs();
    return 2.0 * std::atan2((p.coeffs() - qa).norm(), (p.coeffs() + qa).norm());
}

/// Constant-speed great-circle interpolation; q is sign-aligned to p first.
inline UnitQuaternion slerp(const UnitQuaternion& p, const UnitQuaternion& q, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("slerp parameter must lie in [0, 1]");
    Vec4 qa = q.coeffs();
    double c = p.coeffs().dot(qa);
    if (c < 0.0) {
        qa = -qa;
        c = -c;
    }
    const Vec4& pa = p.coeffs();
    const double xi = std::atan2((qa - c * pa).norm(), c);
    if (xi < 1e-15) return p;
    if (gamma == 0.0) return p;
    if (gamma == 1.0) return q;
    const double s = std::sin(xi);
    const Vec4 r = (std::sin((1.0 - gamma) * xi) / s) * pa + (std::sin(gamma * xi) / s) * qa;
    return UnitQuaternion::normalized(r);
}

/// Rodrigues rotation by theta about the unit axis t (right-hand rule).
inline Rotation rotate_about_axis(const Vec3& t, double theta) {
    if (!t.allFinite() || std::abs(t.norm() - 1.0) > kUnitAxisTol) {
        throw ValidationError("rotation axis must be a unit vector");
    }
    const Mat3 m = Mat3::Identity() + std::sin(theta) * skew(t) +
                   (1.0 - std::cos(theta)) * (t * t.transpose() - Mat3::Identity());
    return Rotation::unchecked(m);
}

/// Rotation about from x to by the angle between them, taking from onto to.
/// Identity when from == to; throws DegenerateError for antipodal inputs.
inline Rotation minimal_rotation(const Vec3& from, const Vec3& to) {
    if (std::abs(from.norm() - 1.0) > kUnitAxisTol || std::abs(to.norm() - 1.0) > kUnitAxisTol) {
        throw ValidationError("minimal_rotation expects unit vectors");
    }
    const Vec3 c = from.cross(to);
    const double d = from.dot(to);
    if (d < -1.0 + kAntipodalTol) {
        throw DegenerateError("minimal_rotation: antipodal vectors have no unique rotation axis");
    }
    // R = I + [c]x + [c]x^2 / (1 + d); exact Rodrigues form without normalizing c.
    const Mat3 k = skew(c);
    return Rotation::unchecked(Mat3::Identity() + k + k * k / (1.0 + d));
}

namespace detail {

inline Vec4 sphere_log(const Vec4& base, const Vec4& q) {
    const double c = base.dot(q);
    const Vec4 perp = q - c * base;
    const double s = perp.norm();
    if (s < 1e-300) return Vec4::Zero();
    return perp * (std::atan2(s, c) / s);
}

inline Vec4 sphere_exp(const Vec4& base, const Vec4& tangent) {
    const double n = tangent.norm();
    if (n < 1e-300) return base;
    return std::cos(n) * base + std::sin(n) * (tangent / n);
}

}  // namespace detail

/// Frechet (Karcher) mean of rotations under geodesic_distance.
///
/// The principal eigenvector of sum q q^T (the projected mean, invariant to
/// the sign of each input) seeds a Riemannian gradient iteration on S^3 with
/// the inputs sign-aligned to the seed. The iteration count and stopping rule
/// are fixed, so the result is deterministic.
///
/// Throws DomainError on an empty input and DegenerateError when the two
/// leading eigenvalues coincide within 1e-10 (no well-defined mean).
inline UnitQuaternion frechet_mean_rotations(std::span<const UnitQuaternion> qs) {
    if (qs.empty()) throw DomainError("frechet_mean_rotations: empty input");
    Eigen::Matrix4d scatter = Eigen::Matrix4d::Zero();
    for (const auto& q : qs) scatter += q.coeffs() * q.coeffs().transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(scatter);
    const Vec4 lambda = eig.eigenvalues();  // ascending
    if (lambda[3] - lambda[2] < 1e-10) {
        throw DegenerateError("frechet_mean_rotations: leading eigenvalue is repeated; mean is ambiguous");
    }
    Vec4 mean = eig.eigenvectors().col(3).normalized();

    std::vector<Vec4> aligned;
    aligned.reserve(qs.size());
    for (const auto& q : qs) aligned.push_back(q.coeffs().dot(mean) < 0.0 ? Vec4(-q.coeffs()) : q.coeffs());

    const double inv_m = 1.0 / static_cast<double>(qs.size());
    for (int iter = 0; iter < 200; ++iter) {
        Vec4 step = Vec4::Zero();
        for (const auto& q : aligned) step += detail::sphere_log(mean, q);
        step *= inv_m;
        mean = detail::sphere_exp(mean, step).normalized();
        if (step.norm() < 1e-15) break;
    }
    return UnitQuaternion::normalized(mean);
}

inline UnitQuaternion frechet_mean_rotations(const std::vector<UnitQuaternion>& qs) {
    return frechet_mean_rotations(std::span<const UnitQuaternion>(qs));
}

}  // namespace etrep
