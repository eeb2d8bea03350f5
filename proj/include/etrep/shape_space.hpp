#pragma once

// Skeletal coordinates of the space of valid cross-sections, and the paths,
// distances and means built on them.
//
// Each section (v, psi, x, a, b) maps to (s u1, s u2, psi, x, a, b) where
// u = v/||v|| and s = ||v|| / min{1, x/r}. The image of the valid sections is
// a convex product set, so straight lines and averages there map back to
// valid ETReps.

#include <etrep/errors.hpp>
#include <etrep/model.hpp>
#include <etrep/rotation.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace etrep {

inline constexpr int kFeaturesPerSection = 6;

/// Flat 6(n+1) vector, per section (s u1, s u2, psi, x, a, b).
struct ConvexPoint {
    Eigen::VectorXd coords;

    int n() const { return static_cast<int>(coords.size()) / kFeaturesPerSection - 1; }
    std::size_t sections() const { return static_cast<std::size_t>(coords.size()) / kFeaturesPerSection; }
    auto section(std::size_t i) const { return coords.segment<kFeaturesPerSection>(static_cast<Eigen::Index>(i) * kFeaturesPerSection); }
    auto section(std::size_t i) { return coords.segment<kFeaturesPerSection>(static_cast<Eigen::Index>(i) * kFeaturesPerSection); }
};

inline const char* const kFeatureNames[kFeaturesPerSection] = {"cu1", "cu2", "psi", "x", "a", "b"};

inline std::vector<std::string> feature_names(int n) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(kFeaturesPerSection * (n + 1)));
    for (int i = 0; i <= n; ++i)
        for (const char* f : kFeatureNames) names.push_back("s" + std::to_string(i) + "_" + f);
    return names;
}

/// A population of ETReps with a common n.
class SampleSet {
public:
    SampleSet() = default;

    explicit SampleSet(std::vector<ETRep> members, bool normalized = false)
        : members_(std::move(members)), normalized_(normalized) {
        for (std::size_t j = 1; j < members_.size(); ++j) {
            if (members_[j].n() != members_[0].n())
                throw ValidationError("sample members differ in number of sections (member " + std::to_string(j) +
                                      ")");
        }
        if (normalized_) {
            for (std::size_t j = 0; j < members_.size(); ++j)
                if (std::abs(etrep::size(members_[j]) - 1.0) > 1e-9)
                    throw ValidationError("member " + std::to_string(j) + " is flagged normalized but has size != 1");
        }
    }

    const std::vector<ETRep>& members() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    bool normalized() const noexcept { return normalized_; }
    int n() const { return members_.empty() ? -1 : members_.front().n(); }
    const ETRep& operator[](std::size_t j) const { return members_[j]; }

private:
    std::vector<ETRep> members_;
    bool normalized_ = false;
};

namespace detail {

inline std::string join_indices(const std::vector<int>& idx) {
    std::string out;
    for (int i : idx) out += (out.empty() ? "" : ", ") + std::to_string(i);
    return out;
}

inline void require_valid(const ETRep& s, const char* what) {
    const ValidityReport report = validate(s);
    if (!report.valid)
        throw ValidationError(std::string(what) + ": invalid ETRep (failing sections: " +
                              join_indices(report.failing_indices()) + ")");
}

inline void require_same_n(const ETRep& s1, const ETRep& s2) {
    if (s1.n() != s2.n())
        throw ValidationError("ETReps differ in number of sections (" + std::to_string(s1.size()) + " vs " +
                              std::to_string(s2.size()) + ")");
}

}  // namespace detail

inline ConvexPoint map_to_convex(const ETRep& s) {
    detail::require_valid(s, "map_to_convex");
    ConvexPoint c;
    c.coords = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.size() * kFeaturesPerSection));
    Vec2 carried(1.0, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const CrossSection& cs = s[i];
        auto seg = c.section(i);
        if (i > 0) {
            const RccResult rcc = rcc_check(cs, carried);
            if (rcc.derived.u_defined) carried = rcc.derived.u;
            const double varsigma = cs.v.norm() / rcc.derived.bound;
            seg[0] = varsigma * rcc.derived.u.x();
            seg[1] = varsigma * rcc.derived.u.y();
            seg[2] = cs.psi;
            seg[3] = cs.x;
        }
        seg[4] = cs.a;
        seg[5] = cs.b;
    }
    return c;
}

namespace detail {

inline void check_convex_invariants(const ConvexPoint& c) {
    if (c.coords.size() == 0 || c.coords.size() % kFeaturesPerSection != 0)
        throw ValidationError("convex point length must be a positive multiple of 6");
    if (!c.coords.allFinite()) throw ValidationError("convex point has non-finite coordinates");
    for (std::size_t i = 0; i < c.sections(); ++i) {
        const auto seg = c.section(i);
        const std::string at = "convex section " + std::to_string(i) + ": ";
        if (!(std::hypot(seg[0], seg[1]) < 1.0)) throw ValidationError(at + "s must lie in [0, 1)");
        if (std::abs(seg[2]) > kPi) throw ValidationError(at + "psi must lie in [-pi, pi]");
        if (!(seg[5] > 0.0) || seg[4] < seg[5]) throw ValidationError(at + "radii must satisfy a >= b > 0");
        if (i == 0) {
            if (seg[0] != 0.0 || seg[1] != 0.0 || seg[2] != 0.0 || seg[3] != 0.0)
                throw ValidationError(at + "section 0 must carry the gauge (0, 0, 0, 0, a, b)");
        } else if (!(seg[3] > 0.0)) {
            throw ValidationError(at + "x must be positive");
        }
    }
}

}  // namespace detail

inline ETRep map_from_convex(const ConvexPoint& c) {
    detail::check_convex_invariants(c);
    ETRep s;
    s.sections.resize(c.sections());
    Vec2 carried(1.0, 0.0);
    for (std::size_t i = 0; i < c.sections(); ++i) {
        const auto seg = c.section(i);
        CrossSection& cs = s.sections[i];
        cs.a = seg[4];
        cs.b = seg[5];
        if (i == 0) continue;
        cs.psi = seg[2];
        cs.x = seg[3];
        const Vec2 w(seg[0], seg[1]);
        const double varsigma = w.norm();
        Vec2 u = carried;
        if (varsigma > 0.0) {
            u = w / varsigma;
            carried = u;
        }
        const double r = projection_magnitude(cs.a, cs.b, twist_from_roll(u, cs.psi));
        cs.v = (varsigma * std::min(1.0, cs.x / r)) * u;
    }
    return s;
}

inline ConvexPoint interpolate(const ConvexPoint& p, const ConvexPoint& q, double gamma) {
    return {(1.0 - gamma) * p.coords + gamma * q.coords};
}

/// Straight line in skeletal coordinates, mapped back. Every point is valid.
inline ETRep intrinsic_path(const ETRep& s1, const ETRep& s2, double gamma) {
    detail::require_same_n(s1, s2);
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("path parameter must lie in [0, 1]");
    return map_from_convex(interpolate(map_to_convex(s1), map_to_convex(s2), gamma));
}

inline double intrinsic_distance(const ETRep& s1, const ETRep& s2) {
    detail::require_same_n(s1, s2);
    return (map_to_convex(s1).coords - map_to_convex(s2).coords).norm();
}

inline ConvexPoint convex_mean(const SampleSet& sample) {
    if (sample.empty()) throw DomainError("mean of an empty sample");
    ConvexPoint mean{map_to_convex(sample[0]).coords};
    for (std::size_t j = 1; j < sample.size(); ++j) mean.coords += map_to_convex(sample[j]).coords;
    mean.coords /= static_cast<double>(sample.size());
    return mean;
}

/// Euclidean mean in skeletal coordinates, mapped back; always valid.
inline ETRep intrinsic_mean(const SampleSet& sample) { return map_from_convex(convex_mean(sample)); }

/// Sections whose roll angles span more than pi across the sample. Linear
/// averaging of psi is unreliable there.
inline std::vector<int> psi_wraparound_sections(const SampleSet& sample) {
    std::vector<int> out;
    if (sample.empty()) return out;
    for (std::size_t i = 0; i < sample[0].size(); ++i) {
        double lo = sample[0][i].psi, hi = lo;
        for (const auto& s : sample.members()) {
            lo = std::min(lo, s[i].psi);
            hi = std::max(hi, s[i].psi);
        }
        if (hi - lo > kPi) out.push_back(static_cast<int>(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Non-intrinsic (frame-wise) geometry. Results may violate the RCC and are
// returned together with their validity report.

struct NonIntrinsicResult {
    FrameChain chain;
    ValidityReport report;

    bool valid() const { return report.valid; }
    ETRep etrep() const { return to_etrep(chain); }
};

inline NonIntrinsicResult nonintrinsic_path(const ETRep& s1, const ETRep& s2, double gamma) {
    detail::require_same_n(s1, s2);
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("path parameter must lie in [0, 1]");
    const FrameChain c1 = to_frame_chain(s1);
    const FrameChain c2 = to_frame_chain(s2);
    NonIntrinsicResult out;
    out.chain.sections.reserve(c1.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        const FrameSection& f1 = c1.sections[i];
        const FrameSection& f2 = c2.sections[i];
        out.chain.sections.push_back({slerp(f1.frame, f2.frame, gamma), (1.0 - gamma) * f1.x + gamma * f2.x,
                                      (1.0 - gamma) * f1.a + gamma * f2.a, (1.0 - gamma) * f1.b + gamma * f2.b});
    }
    out.report = validate(out.chain);
    return out;
}

inline double nonintrinsic_distance(const ETRep& s1, const ETRep& s2) {
    detail::require_same_n(s1, s2);
    const FrameChain c1 = to_frame_chain(s1);
    const FrameChain c2 = to_frame_chain(s2);
    double sum = 0.0;
    for (std::size_t i = 0; i < c1.size(); ++i) {
        const FrameSection& f1 = c1.sections[i];
        const FrameSection& f2 = c2.sections[i];
        const double dg = geodesic_distance(f1.frame, f2.frame);
        sum += dg * dg + (f1.x - f2.x) * (f1.x - f2.x) + (f1.a - f2.a) * (f1.a - f2.a) + (f1.b - f2.b) * (f1.b - f2.b);
    }
    return std::sqrt(sum);
}

/// Per section: Frechet mean of the parent-relative frames and arithmetic
/// means of x, a, b. Not necessarily valid.
inline NonIntrinsicResult nonintrinsic_mean(const SampleSet& sample) {
    if (sample.empty()) throw DomainError("mean of an empty sample");
    std::vector<FrameChain> chains;
    chains.reserve(sample.size());
    for (const auto& s : sample.members()) chains.push_back(to_frame_chain(s));
    const double inv_m = 1.0 / static_cast<double>(sample.size());
    NonIntrinsicResult out;
    const std::size_t sections = chains.front().size();
    std::vector<UnitQuaternion> frames(chains.size());
    for (std::size_t i = 0; i < sections; ++i) {
        FrameSection mean;
        mean.x = mean.a = mean.b = 0.0;
        for (std::size_t j = 0; j < chains.size(); ++j) {
            const FrameSection& f = chains[j].sections[i];
            frames[j] = f.frame;
            mean.x += f.x;
            mean.a += f.a;
            mean.b += f.b;
        }
        mean.frame = frechet_mean_rotations(frames);
        mean.x *= inv_m;
        mean.a *= inv_m;
        mean.b *= inv_m;
        out.chain.sections.push_back(mean);
    }
    out.report = validate(out.chain);
    return out;
}

// ---------------------------------------------------------------------------
// Shape (scale-free) variants: l1-normalize each member first.

inline SampleSet normalize_sample(const SampleSet& sample) {
    std::vector<ETRep> members;
    members.reserve(sample.size());
    for (const auto& s : sample.members()) members.push_back(normalize(s));
    return SampleSet(std::move(members), true);
}

inline ETRep intrinsic_shape_mean(const SampleSet& sample) { return intrinsic_mean(normalize_sample(sample)); }

inline NonIntrinsicResult nonintrinsic_shape_mean(const SampleSet& sample) {
    return nonintrinsic_mean(normalize_sample(sample));
}

}  // namespace etrep
