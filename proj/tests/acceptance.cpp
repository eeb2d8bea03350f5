// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <etrep/etrep.hpp>

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <unistd.h>

namespace {

using namespace etrep;

const fs::path kFixtures = ETREP_FIXTURES_DIR;
const std::string kCli = ETREP_CLI_PATH;

struct Outcome {
    bool pass;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double etrep_max_diff(const ETRep& s, const ETRep& t) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        m = std::max({m, (s[i].v - t[i].v).norm(), std::abs(wrap_angle(s[i].psi - t[i].psi)), std::abs(s[i].x - t[i].x),
                      std::abs(s[i].a - t[i].a), std::abs(s[i].b - t[i].b)});
    }
    return m;
}

Outcome rcc_oracle() {
    Stopwatch sw;
    const oracle::EtaGrid grid(1000000);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double a = 0.01 + 10.0 * u(rng);
        const double b = a * (0.001 + 0.999 * u(rng));
        const double theta = (2.0 * u(rng) - 1.0) * kPi;
        worst = std::max(worst, std::abs(projection_magnitude(a, b, theta) - oracle::brute_force_projection(grid, a, b, theta)));
    }
    const double t = sw.seconds();
    return {worst <= 1e-6 && t < 10.0,
            "1000 draws, max |closed form - grid max| = " + fmt("%.2e", worst) + " (tol 1e-6), " + fmt("%.2f", t) +
                " s (limit 10 s)"};
}

Outcome round_trips() {
    Stopwatch sw;
    double worst_global = 0.0, worst_convex = 0.0;
    for (int k = 0; k < 500; ++k) {
        const ETRep s = random_etrep(52, 10000 + k);
        worst_global = std::max(worst_global, etrep_max_diff(etrep_from_global(reconstruct_global(s)), s));
        const ConvexPoint c = map_to_convex(s);
        worst_convex = std::max(worst_convex, etrep_max_diff(map_from_convex(c), s));
        worst_convex =
            std::max(worst_convex, (map_to_convex(map_from_convex(c)).coords - c.coords).cwiseAbs().maxCoeff());
    }
    const double t = sw.seconds();
    return {worst_global <= 1e-9 && worst_convex <= 1e-10 && t < 5.0,
            "500 ETReps with n = 52: global " + fmt("%.2e", worst_global) + " (tol 1e-9), convex " +
                fmt("%.2e", worst_convex) + " (tol 1e-10), " + fmt("%.2f", t) + " s (limit 5 s)"};
}

Outcome intrinsic_closure() {
    int failures = 0, checked = 0;
    RandomETRepOptions wide;
    wide.a_min = 2.0;
    wide.a_max = 10.0;
    wide.b_min_fraction = 0.05;
    wide.x_min = 0.2;
    wide.x_max = 1.0;
    wide.max_varsigma = 0.99;
    const double sigmas[] = {0.05, 0.3, 1.0, 3.0};
    for (int k = 0; k < 200; ++k) {
        SimulationConfig cfg;
        cfg.reference = random_etrep(15, 500 + k, k % 2 ? wide : RandomETRepOptions{});
        cfg.m = 2 + static_cast<std::size_t>(k % 19);
        cfg.sigma_v = sigmas[k % 4];
        cfg.sigma_psi = sigmas[(k / 4) % 4];
        cfg.sigma_scale = 0.2;
        cfg.seed = 7000 + static_cast<std::uint64_t>(k);
        const SampleSet sample = simulate_population(cfg);
        for (int g = 0; g <= 20; ++g) {
            ++checked;
            if (!validate(intrinsic_path(sample[0], sample[1], g / 20.0)).valid) ++failures;
        }
        checked += 2;
        if (!validate(intrinsic_mean(sample)).valid) ++failures;
        if (!validate(intrinsic_shape_mean(sample)).valid) ++failures;
    }
    return {failures == 0, std::to_string(checked) + " path points and means from 200 simulated samples (m <= 20), " +
                               std::to_string(failures) + " invalid"};
}

Outcome nonintrinsic_failure() {
    std::string detail;
    bool pass = true;
    for (const char* name : {"high_curvature_pair", "high_curvature_trio"}) {
        const SampleSet sample(read_population(kFixtures / name));
        bool members_ok = true;
        for (const auto& s : sample.members()) members_ok &= validate(s).valid;
        const NonIntrinsicResult non = nonintrinsic_mean(sample);
        const ValidityReport intr = validate(intrinsic_mean(sample));
        const bool ok = members_ok && !non.valid() && intr.valid;
        pass &= ok;
        detail += std::string(detail.empty() ? "" : "; ") + name + ": non-intrinsic mean " +
                  (non.valid() ? "valid" : "invalid (margin " + fmt("%.3f", non.report.min_margin()) + ")") +
                  ", intrinsic mean " + (intr.valid ? "valid" : "invalid");
    }
    return {pass, detail};
}

Outcome size_and_scaling() {
    double worst = 0.0;
    int mismatches = 0, invalid = 0;
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        ETRep s = scale(random_etrep(1 + k % 60, 20000 + k), 0.01 + 100.0 * u(rng));
        worst = std::max(worst, std::abs(size(normalize(s)) - 1.0));
        // Push half of them toward or across the RCC boundary.
        if (k % 2) {
            const std::size_t i = 1 + static_cast<std::size_t>(k) % (s.size() - 1);
            if (s[i].v.norm() > 0.0) s[i].v = s[i].v.normalized() * (0.5 + 0.49 * u(rng));
        }
        const bool verdict = validate(s).valid;
        invalid += !verdict;
        for (double c : {0.1, 0.5, 2.0, 10.0})
            if (validate(scale(s, c)).valid != verdict) ++mismatches;
    }
    return {worst <= 1e-12 && mismatches == 0, "500 ETReps: max |size(normalize(s)) - 1| = " + fmt("%.2e", worst) +
                                                   " (tol 1e-12), " + std::to_string(mismatches) +
                                                   " verdict changes under scaling (" + std::to_string(invalid) +
                                                   " of them invalid)"};
}

Outcome frechet_mean() {
    std::mt19937_64 rng(66);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const UnitQuaternion center = UnitQuaternion::normalized(Vec4(g(rng), g(rng), g(rng), g(rng)));
        const Rotation rc = rotation_from_quat(center);
        std::vector<UnitQuaternion> qs;
        std::vector<Eigen::Vector4d> raw;
        for (int j = 0; j < 3; ++j) {
            // Within pi/8 of the center, so every pair is less than pi/4 apart.
            const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
            const Rotation r = rc * rotate_about_axis(axis, (kPi / 8) * u(rng));
            qs.push_back(quat_from_rotation(r));
            raw.push_back(qs.back().coeffs());
        }
        const UnitQuaternion mean = frechet_mean_rotations(qs);
        const Eigen::Vector4d ref = oracle::karcher_grid_mean(raw);
        const UnitQuaternion ref_q = UnitQuaternion::normalized(ref);
        worst = std::max(worst, geodesic_distance(mean, ref_q));
    }
    return {worst <= 1e-6,
            "100 samples of 3 rotations: max geodesic distance to grid-search Karcher mean " + fmt("%.2e", worst) +
                " (tol 1e-6)"};
}

Outcome permutation_calibration() {
    Stopwatch sw;
    const int m = 15, dim = 60;
    const std::size_t N = 999;
    int null_above = 0, alt_min = 0;
    std::normal_distribution<double> g(0.0, 1.0);
    for (int run = 0; run < 100; ++run) {
        std::mt19937_64 rng(detail::derive_seed(2024, static_cast<std::uint64_t>(run)));
        Eigen::MatrixXd A(m, dim), B(m, dim);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < dim; ++c) {
                A(r, c) = g(rng);
                B(r, c) = g(rng);
            }
        if (diproperm(A, B, N, 100 + static_cast<std::uint64_t>(run)).p_value > 0.05) ++null_above;

        // Mean vectors 5 sigma apart in Euclidean distance.
        Eigen::VectorXd dir(dim);
        for (int c = 0; c < dim; ++c) dir(c) = g(rng);
        dir *= 5.0 / dir.norm();
        Eigen::MatrixXd shifted = A.rowwise() + dir.transpose();
        if (diproperm(shifted, B, N, 100 + static_cast<std::uint64_t>(run)).p_value == 1.0 / (N + 1)) ++alt_min;
    }
    const double t = sw.seconds();
    return {null_above >= 90 && alt_min == 100 && t < 60.0,
            "null p > 0.05 in " + std::to_string(null_above) + "/100 runs (need 90), 5 sigma p = 1/1000 in " +
                std::to_string(alt_min) + "/100 runs (need 100), " + fmt("%.2f", t) + " s (limit 60 s)"};
}

Outcome bh_correctness() {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, 318);
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> p(static_cast<std::size_t>(len(rng)));
        for (auto& v : p) {
            switch (k % 4) {
                case 0: v = u(rng); break;
                case 1: v = 0.05 * u(rng); break;
                case 2: v = std::round(u(rng) * 50.0) / 50.0; break;  // ties
                default: v = u(rng) < 0.3 ? 1e-4 * u(rng) : u(rng); break;
            }
        }
        const auto got = bh_adjust(p);
        const auto ref = oracle::bh_reference(p);
        for (std::size_t i = 0; i < p.size(); ++i)
            if (got[i] != ref[i]) ++mismatches;
    }
    return {mismatches == 0, "1000 p-vectors (length <= 318): " + std::to_string(mismatches) + " entries differ"};
}

Outcome theta_invariance() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    double worst = 0.0;
    for (double mag : {0.1, 0.5, 0.9}) {
        for (int k = 0; k < 200; ++k) {
            const double az = ang(rng), psi = ang(rng);
            const Vec2 u(std::cos(az), std::sin(az));
            ETRep s;
            s.sections = {{Vec2::Zero(), 0.0, 0.0, 1.0, 1.0}, {mag * u, psi, 10.0, 1.0, 1.0}};
            const GlobalTube g = reconstruct_global(s);
            const Vec3 n = compute_normals(g)[1];
            const double measured = oracle::signed_angle(g.frames[1].t(), g.frames[1].a(), n);
            worst = std::max(worst, std::abs(wrap_angle(measured - twist_from_roll(u, psi))));
        }
    }
    return {worst <= 1e-8, "600 draws over ||v|| in {0.1, 0.5, 0.9}: max angle error " + fmt("%.2e", worst) +
                               " (tol 1e-8)"};
}

int sh(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

std::string shell_quote(const fs::path& p) { return "'" + p.string() + "'"; }

bool same_tree(const fs::path& a, const fs::path& b) {
    const auto fa = list_json_files(a), fb = list_json_files(b);
    if (fa.size() != fb.size() || fa.empty()) return false;
    for (std::size_t j = 0; j < fa.size(); ++j) {
        if (fa[j].filename() != fb[j].filename()) return false;
        if (detail::read_file(fa[j]) != detail::read_file(fb[j])) return false;
    }
    return true;
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / ("etrep_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = shell_quote(kCli);

    write_etrep(random_etrep(8, 123), dir / "ref.json");
    json cfg_a = {{"reference", "ref.json"}, {"m", 12}, {"sigma_v", 0.3}, {"sigma_psi", 0.3}, {"sigma_scale", 0.1}, {"seed", 5}};
    json cfg_b = cfg_a;
    cfg_b["seed"] = 6;
    cfg_b["sigma_v"] = 0.5;
    detail::write_file(dir / "a.json", cfg_a.dump());
    detail::write_file(dir / "b.json", cfg_b.dump());

    int failures = 0, runs = 0;
    auto env = [](int threads) { return "ETREP_THREADS=" + std::to_string(threads) + " "; };
    const int thread_counts[] = {1, 1, 2, 8};
    for (int i = 0; i < 4; ++i) {
        const std::string tag = std::to_string(i);
        failures += sh(env(thread_counts[i]) + cli + " simulate --config " + shell_quote(dir / "a.json") + " -o " +
                       shell_quote(dir / ("A" + tag))) != 0;
        failures += sh(env(thread_counts[i]) + cli + " simulate --config " + shell_quote(dir / "b.json") + " -o " +
                       shell_quote(dir / ("B" + tag))) != 0;
        runs += 2;
    }
    for (int i = 1; i < 4; ++i) {
        failures += !same_tree(dir / "A0", dir / ("A" + std::to_string(i)));
        failures += !same_tree(dir / "B0", dir / ("B" + std::to_string(i)));
    }
    std::string first;
    for (int i = 0; i < 4; ++i) {
        const fs::path report = dir / ("report" + std::to_string(i) + ".json");
        failures += sh(env(thread_counts[i]) + cli + " test --groups " + shell_quote(dir / "A0") + " " + shell_quote(dir / "B0") +
                       " -N 999 --seed 7 -o " + shell_quote(report)) != 0;
        ++runs;
        const std::string text = fs::exists(report) ? detail::read_file(report) : std::string();
        if (text.empty()) ++failures;
        if (i == 0)
            first = text;
        else if (text != first)
            ++failures;
    }
    fs::remove_all(dir);
    return {failures == 0, std::to_string(runs) + " CLI runs (simulate and test) over ETREP_THREADS in {1, 2, 8}: " +
                               std::to_string(failures) + " mismatches or errors"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"RCC oracle equivalence", rcc_oracle},
        {"bijection round trips", round_trips},
        {"intrinsic closure", intrinsic_closure},
        {"non-intrinsic failure demonstration", nonintrinsic_failure},
        {"size normalization and scale invariance", size_and_scaling},
        {"Frechet rotation mean", frechet_mean},
        {"permutation calibration", permutation_calibration},
        {"BH correctness", bh_correctness},
        {"theta invariance", theta_invariance},
        {"CLI determinism", determinism},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1) << ". " << criteria[k].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " of 10 criteria failed" : "all 10 criteria passed") << std::endl;
    return failed ? 1 : 0;
}
