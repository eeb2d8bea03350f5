#pragma once

// The elliptical tube representation: parent-relative cross-sections,
// relative-curvature validity, and conversion to and from world coordinates.

#include <etrep/errors.hpp>
#include <etrep/rotation.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace etrep {

inline constexpr double kRccEpsilon = 1e-9;
inline constexpr double kTangentTol = 1e-8;

/// One elliptical slice in its parent frame.
///   v   projection of the tangent onto the parent slicing plane, ||v|| < 1
///   psi roll about the tangent relative to the minimal-rotation frame, [-pi, pi]
///   x   length of the spinal connection to the parent (0 for section 0)
///   a,b semi-major and semi-minor radii, a >= b > 0
struct CrossSection {
    Vec2 v = Vec2::Zero();
    double psi = 0.0;
    double x = 0.0;
    double a = 1.0;
    double b = 1.0;
};

struct DerivedCrossSection {
    Vec2 u = Vec2(1.0, 0.0);  // direction of v (carried forward when v = 0)
    bool u_defined = false;   // false when ||v|| = 0
    double phi = 0.0;         // bending angle asin(||v||)
    double theta = 0.0;       // twisting angle of the a-axis relative to the spine normal
    double r = 0.0;           // extent of the ellipse along the spine normal
    double kappa = 0.0;       // discrete curvature sin(phi) / x
    double bound = 0.0;       // min{1, x / r}
    double margin = 0.0;      // bound - ||v||
};

struct ETRep {
    std::vector<CrossSection> sections;  // index 0 .. n
    std::map<std::string, std::string> metadata;

    int n() const { return static_cast<int>(sections.size()) - 1; }
    std::size_t size() const { return sections.size(); }
    const CrossSection& operator[](std::size_t i) const { return sections[i]; }
    CrossSection& operator[](std::size_t i) { return sections[i]; }
};

struct Radii {
    double a = 1.0;
    double b = 1.0;
};

/// World-coordinate tube. Frames are material frames (t, a-axis, b-axis);
/// for i >= 1 the tangent t_i points along the spinal connection p_i - p_{i-1}.
struct GlobalTube {
    std::vector<Vec3> points;
    std::vector<Rotation> frames;
    std::vector<Radii> radii;

    std::size_t size() const { return points.size(); }
};

struct SectionReport {
    int index = 0;
    bool rcc_ok = true;
    bool invariants_ok = true;
    double margin = 0.0;
    DerivedCrossSection derived;
    std::vector<std::string> messages;
};

struct ValidityReport {
    bool valid = true;
    std::vector<SectionReport> sections;

    std::vector<int> failing_indices() const {
        std::vector<int> out;
        for (const auto& s : sections)
            if (!s.rcc_ok || !s.invariants_ok) out.push_back(s.index);
        return out;
    }

    double min_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& s : sections)
            if (s.index > 0) m = std::min(m, s.margin);
        return m;
    }
};

// ---------------------------------------------------------------------------
// Local frame parameterization

inline Vec3 tangent_from_v(const Vec2& v) {
    const double n2 = v.squaredNorm();
    if (!(n2 < 1.0)) throw DomainError("||v|| must be < 1");
    return Vec3(std::sqrt(1.0 - n2), v.x(), v.y());
}

/// Parent-relative frame F* for (v, psi): the minimal rotation e1 -> t*
/// followed by a roll of psi about t*.
inline Rotation frame_from_local(const Vec2& v, double psi) {
    const Vec3 t = tangent_from_v(v);
    return rotate_about_axis(t, psi) * minimal_rotation(Vec3::UnitX(), t);
}

struct LocalFrame {
    Vec2 v;
    double psi;
};

/// Inverse of frame_from_local. Throws DomainError when the tangent leaves the
/// open hemisphere t_1 > 0.
inline LocalFrame local_from_frame(const Rotation& frame) {
    const Vec3 t = frame.t();
    if (!(t.x() > 0.0)) {
        throw DomainError("frame tangent lies outside the hemisphere t1 > 0 (t1 = " + std::to_string(t.x()) + ")");
    }
    const Vec3 tu = t.normalized();
    const Vec3 ref = minimal_rotation(Vec3::UnitX(), tu) * Vec3::UnitY();
    const Vec3 axis = frame.a();
    const double psi = std::atan2(tu.dot(ref.cross(axis)), ref.dot(axis));
    return {Vec2(t.y(), t.z()), psi};
}

/// Twisting angle theta for bending direction u and roll psi:
/// theta = wrap(atan2(u2, u1) - psi). Rotating the a-axis by theta about the
/// tangent lands on the spine normal.
inline double twist_from_roll(const Vec2& u, double psi) {
    return wrap_angle(std::atan2(u.y(), u.x()) - psi);
}

inline double roll_from_twist(const Vec2& u, double theta) {
    return wrap_angle(std::atan2(u.y(), u.x()) - theta);
}

/// Maximum of a cos(eta) cos(theta) - b sin(eta) sin(theta) over eta, i.e. the
/// amplitude sqrt(a^2 cos^2 theta + b^2 sin^2 theta). Free of the tan(theta)
/// singularity of the arctangent form.
inline double projection_magnitude(double a, double b, double theta) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("radii must be positive");
    const double c = std::cos(theta), s = std::sin(theta);
    return std::sqrt(a * a * c * c + b * b * s * s);
}

struct RccResult {
    bool ok = true;
    double margin = 0.0;
    DerivedCrossSection derived;
};

/// Relative curvature condition ||v|| < min{1, x/r} (strict, by kRccEpsilon).
/// carried_u supplies the bending direction when v = 0.
inline RccResult rcc_check(const CrossSection& cs, const Vec2& carried_u = Vec2(1.0, 0.0)) {
    RccResult res;
    DerivedCrossSection& d = res.derived;
    const double vn = cs.v.norm();
    if (!(vn < 1.0)) throw DomainError("||v|| must be < 1");
    if (vn > 0.0) {
        d.u = cs.v / vn;
        d.u_defined = true;
    } else {
        d.u = carried_u;
        d.u_defined = false;
    }
    d.phi = std::asin(vn);
    d.theta = twist_from_roll(d.u, cs.psi);
    d.r = projection_magnitude(cs.a, cs.b, d.theta);
    d.kappa = cs.x > 0.0 ? std::sin(d.phi) / cs.x : (vn > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    d.bound = std::min(1.0, cs.x / d.r);
    d.margin = d.bound - vn;
    res.margin = d.margin;
    res.ok = vn == 0.0 || vn < d.bound - kRccEpsilon;
    return res;
}

namespace detail {

inline std::vector<std::string> section_invariant_errors(const CrossSection& cs, int index) {
    std::vector<std::string> errs;
    if (!cs.v.allFinite() || !std::isfinite(cs.psi) || !std::isfinite(cs.x) || !std::isfinite(cs.a) ||
        !std::isfinite(cs.b)) {
        errs.emplace_back("non-finite field");
        return errs;
    }
    if (!(cs.v.norm() < 1.0)) errs.emplace_back("invariant ||v|| < 1 violated");
    if (std::abs(cs.psi) > kPi) errs.emplace_back("invariant psi in [-pi, pi] violated");
    if (!(cs.b > 0.0)) errs.emplace_back("invariant b > 0 violated");
    if (cs.a < cs.b) errs.emplace_back("invariant a >= b violated");
    if (index == 0) {
        if (cs.v.norm() != 0.0 || cs.psi != 0.0 || cs.x != 0.0)
            errs.emplace_back("section 0 must carry the gauge v = (0,0), psi = 0, x = 0");
    } else if (!(cs.x > 0.0)) {
        errs.emplace_back("invariant x > 0 violated");
    }
    return errs;
}

}  // namespace detail

/// Checks every type invariant and the RCC on each section. Never throws.
inline ValidityReport validate(const ETRep& s) {
    ValidityReport report;
    if (s.sections.empty()) {
        report.valid = false;
        SectionReport sr;
        sr.invariants_ok = false;
        sr.rcc_ok = false;
        sr.messages.emplace_back("ETRep has no sections");
        report.sections.push_back(sr);
        return report;
    }
    Vec2 carried(1.0, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const CrossSection& cs = s[i];
        SectionReport sr;
        sr.index = static_cast<int>(i);
        sr.messages = detail::section_invariant_errors(cs, sr.index);
        sr.invariants_ok = sr.messages.empty();
        const bool computable = cs.v.allFinite() && cs.v.norm() < 1.0 && cs.a > 0.0 && cs.b > 0.0 &&
                                std::isfinite(cs.psi) && std::isfinite(cs.x);
        if (computable) {
            const RccResult rcc = rcc_check(cs, carried);
            sr.rcc_ok = rcc.ok;
            sr.margin = rcc.margin;
            sr.derived = rcc.derived;
            if (rcc.derived.u_defined) carried = rcc.derived.u;
            if (!rcc.ok) {
                std::ostringstream msg;
                msg << "RCC violated: ||v|| = " << cs.v.norm() << " >= min{1, x/r} = " << rcc.derived.bound;
                sr.messages.push_back(msg.str());
            }
            if (sr.invariants_ok && cs.a == cs.b) sr.messages.emplace_back("warning: circular section (a == b)");
        } else {
            sr.rcc_ok = false;
        }
        if (!sr.rcc_ok || !sr.invariants_ok) report.valid = false;
        report.sections.push_back(std::move(sr));
    }
    return report;
}

inline bool is_valid(const ETRep& s) { return validate(s).valid; }

// ---------------------------------------------------------------------------
// Parent-relative frame chains

/// One section with its parent-relative frame held as a rotation. Unlike
/// CrossSection, this can represent frames outside the t1 > 0 hemisphere,
/// which interpolated or averaged frames may produce.
struct FrameSection {
    UnitQuaternion frame;
    double x = 0.0;
    double a = 1.0;
    double b = 1.0;
};

struct FrameChain {
    std::vector<FrameSection> sections;

    int n() const { return static_cast<int>(sections.size()) - 1; }
    std::size_t size() const { return sections.size(); }
};

inline FrameChain to_frame_chain(const ETRep& s) {
    FrameChain chain;
    chain.sections.reserve(s.size());
    for (const auto& cs : s.sections)
        chain.sections.push_back({quat_from_rotation(frame_from_local(cs.v, cs.psi)), cs.x, cs.a, cs.b});
    return chain;
}

/// Throws DomainError naming the section if a frame leaves the hemisphere.
inline ETRep to_etrep(const FrameChain& chain) {
    ETRep s;
    s.sections.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const FrameSection& fs = chain.sections[i];
        CrossSection cs;
        try {
            const LocalFrame lf = local_from_frame(rotation_from_quat(fs.frame));
            cs.v = lf.v;
            cs.psi = lf.psi;
        } catch (const DomainError& e) {
            throw DomainError("section " + std::to_string(i) + ": " + e.what());
        }
        cs.x = fs.x;
        cs.a = fs.a;
        cs.b = fs.b;
        s.sections.push_back(cs);
    }
    return s;
}

inline ValidityReport validate(const FrameChain& chain) {
    ETRep s;
    std::vector<int> outside;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const FrameSection& fs = chain.sections[i];
        const Rotation f = rotation_from_quat(fs.frame);
        CrossSection cs;
        if (f.t().x() > 0.0) {
            const LocalFrame lf = local_from_frame(f);
            cs.v = lf.v;
            cs.psi = lf.psi;
        } else {
            outside.push_back(static_cast<int>(i));
            cs.v = Vec2(f.t().y(), f.t().z());
        }
        cs.x = fs.x;
        cs.a = fs.a;
        cs.b = fs.b;
        s.sections.push_back(cs);
    }
    ValidityReport report = validate(s);
    for (int i : outside) {
        auto& sr = report.sections[static_cast<std::size_t>(i)];
        sr.rcc_ok = false;
        sr.messages.emplace_back("frame tangent outside the hemisphere t1 > 0 (bend of 90 degrees or more)");
        report.valid = false;
    }
    return report;
}

// ---------------------------------------------------------------------------
// World coordinates

/// Forward kinematics: F_0 = I, p_0 = 0, F_i = F_{i-1} F*_i, p_i = p_{i-1} + x_i t_i.
inline GlobalTube reconstruct_global(const FrameChain& chain) {
    GlobalTube g;
    g.points.reserve(chain.size());
    g.frames.reserve(chain.size());
    g.radii.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const FrameSection& fs = chain.sections[i];
        if (i == 0) {
            g.points.push_back(Vec3::Zero());
            g.frames.push_back(Rotation::identity());
        } else {
            const Rotation f = g.frames.back() * rotation_from_quat(fs.frame);
            g.points.push_back(g.points.back() + fs.x * f.t());
            g.frames.push_back(f);
        }
        g.radii.push_back({fs.a, fs.b});
    }
    return g;
}

/// Throws ValidationError for an invalid ETRep unless allow_invalid is set.
inline GlobalTube reconstruct_global(const ETRep& s, bool allow_invalid = false) {
    if (!allow_invalid) {
        const ValidityReport report = validate(s);
        if (!report.valid) {
            std::string idx;
            for (int i : report.failing_indices()) idx += (idx.empty() ? "" : ", ") + std::to_string(i);
            throw ValidationError("reconstruct_global: invalid ETRep (failing sections: " + idx + ")");
        }
    }
    GlobalTube g;
    g.points.reserve(s.size());
    g.frames.reserve(s.size());
    g.radii.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const CrossSection& cs = s[i];
        if (i == 0) {
            g.points.push_back(Vec3::Zero());
            g.frames.push_back(Rotation::identity());
        } else {
            const Rotation f = g.frames.back() * frame_from_local(cs.v, cs.psi);
            g.points.push_back(g.points.back() + cs.x * f.t());
            g.frames.push_back(f);
        }
        g.radii.push_back({cs.a, cs.b});
    }
    return g;
}

/// Parent-relative representation of a world-coordinate tube. Rigid motions
/// of the input leave the result unchanged. Throws ValidationError on
/// inconsistent input and DomainError naming the index when consecutive
/// tangents are 90 degrees or more apart.
inline ETRep etrep_from_global(const GlobalTube& g) {
    if (g.points.empty()) throw ValidationError("etrep_from_global: empty tube");
    if (g.frames.size() != g.points.size() || g.radii.size() != g.points.size())
        throw ValidationError("etrep_from_global: points, frames and radii differ in length");
    ETRep s;
    s.sections.reserve(g.size());
    CrossSection c0;
    c0.a = g.radii[0].a;
    c0.b = g.radii[0].b;
    s.sections.push_back(c0);
    for (std::size_t i = 1; i < g.size(); ++i) {
        const Vec3 d = g.points[i] - g.points[i - 1];
        const double x = d.norm();
        if (!(x > 0.0)) throw ValidationError("etrep_from_global: coincident points at index " + std::to_string(i));
        if ((d / x - g.frames[i].t()).norm() > kTangentTol)
            throw ValidationError("etrep_from_global: frame tangent at index " + std::to_string(i) +
                                  " does not follow the spinal connection");
        const Rotation rel = g.frames[i - 1].inverse() * g.frames[i];
        CrossSection cs;
        try {
            const LocalFrame lf = local_from_frame(rel);
            cs.v = lf.v;
            cs.psi = lf.psi;
        } catch (const DomainError& e) {
            throw DomainError("etrep_from_global: index " + std::to_string(i) + ": " + e.what());
        }
        cs.x = x;
        cs.a = g.radii[i].a;
        cs.b = g.radii[i].b;
        s.sections.push_back(cs);
    }
    return s;
}

/// Discrete spine normals n_i = ((t_{i-1} x t_i)/|.|) x t_i; carried forward
/// when consecutive tangents coincide, n_0 = second column of F_0.
inline std::vector<Vec3> compute_normals(const GlobalTube& g) {
    std::vector<Vec3> normals;
    normals.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i == 0) {
            normals.push_back(g.frames[0].a());
            continue;
        }
        const Vec3 tp = g.frames[i - 1].t();
        const Vec3 t = g.frames[i].t();
        const Vec3 c = tp.cross(t);
        if ((t - tp).norm() <= 1e-9 || c.norm() <= 1e-12) {
            // Carried normal re-projected so it stays orthogonal to the current tangent.
            Vec3 n = normals.back() - normals.back().dot(t) * t;
            normals.push_back(n.norm() > 0.0 ? Vec3(n.normalized()) : normals.back());
        } else {
            normals.push_back(c.normalized().cross(t).normalized());
        }
    }
    return normals;
}

// ---------------------------------------------------------------------------
// Size

/// l1 size: sum of x_i + a_i + b_i over all sections.
inline double size(const ETRep& s) {
    double total = 0.0;
    for (const auto& cs : s.sections) total += std::abs(cs.x) + std::abs(cs.a) + std::abs(cs.b);
    return total;
}

inline ETRep scale(const ETRep& s, double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("scale factor must be positive");
    ETRep out = s;
    for (auto& cs : out.sections) {
        cs.x *= c;
        cs.a *= c;
        cs.b *= c;
    }
    return out;
}

inline ETRep normalize(const ETRep& s) {
    const double l = size(s);
    if (!(l > 0.0)) throw DomainError("cannot normalize an ETRep of zero size");
    ETRep out = s;
    for (auto& cs : out.sections) {
        cs.x /= l;
        cs.a /= l;
        cs.b /= l;
    }
    return out;
}

}  // namespace etrep
