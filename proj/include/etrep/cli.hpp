#pragma once

// Command-line driver. dispatch() is the whole program minus main(), so the
// commands can be exercised in-process.
//
// Exit codes:
//   0   success
//   2   input geometry is invalid (report printed)
//   3   non-intrinsic mean is invalid (report attached to the output)
//   64  usage error
//   65  malformed input document
//   66  input missing or unreadable
//   70  internal error
//   73  output cannot be created

#include <etrep/errors.hpp>
#include <etrep/io.hpp>
#include <etrep/model.hpp>
#include <etrep/shape_space.hpp>
#include <etrep/simulation.hpp>
#include <etrep/stats.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

namespace etrep::cli {

enum ExitCode : int {
    kOk = 0,
    kInvalidGeometry = 2,
    kInvalidMean = 3,
    kUsage = 64,
    kDataError = 65,
    kNoInput = 66,
    kSoftware = 70,
    kCantCreate = 73,
};

namespace detail {

inline std::vector<ETRep> read_inputs(const std::vector<std::string>& inputs) {
    std::vector<ETRep> members;
    for (const auto& in : inputs) {
        if (std::filesystem::is_directory(in)) {
            auto dir = read_population(in);
            members.insert(members.end(), dir.begin(), dir.end());
        } else {
            members.push_back(read_etrep(in));
        }
    }
    return members;
}

inline void print_report(std::ostream& out, const ValidityReport& report) {
    out << (report.valid ? "valid" : "invalid");
    if (report.valid && !report.sections.empty() && report.sections.size() > 1)
        out << " (minimum RCC margin " << format_double(report.min_margin()) << ")";
    out << "\n";
    for (const auto& sr : report.sections)
        for (const auto& m : sr.messages) out << "  section " << sr.index << ": " << m << "\n";
}

inline json partial_json(const PartialTestResult& r, double alpha) {
    return {{"feature", r.feature},
            {"t", std::isfinite(r.t) ? json(r.t) : json(nullptr)},
            {"p_raw", r.p_raw},
            {"p_adjusted", r.p_adjusted},
            {"significant_raw", r.p_raw <= alpha},
            {"significant_adjusted", r.p_adjusted <= alpha},
            {"degenerate", r.degenerate}};
}

inline PathMethod parse_method(const std::string& m) {
    return m == "intrinsic" ? PathMethod::Intrinsic : PathMethod::NonIntrinsic;
}

inline SimulationConfig read_simulation_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(etrep::detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("", "config must be a JSON object");
    SimulationConfig cfg;
    if (!doc.contains("reference")) throw SchemaError("/reference", "missing field");
    const json& ref = doc["reference"];
    if (ref.is_string()) {
        std::filesystem::path rp = ref.get<std::string>();
        if (rp.is_relative()) rp = path.parent_path() / rp;
        cfg.reference = read_etrep(rp);
    } else if (ref.is_object()) {
        try {
            cfg.reference = etrep_from_json(ref);
        } catch (const SchemaError& e) {
            throw SchemaError("/reference" + e.pointer(), e.what());
        }
    } else {
        throw SchemaError("/reference", "expected a path or an inline ETRep document");
    }
    if (!doc.contains("m") || !doc["m"].is_number_integer() || doc["m"].get<long long>() < 1)
        throw SchemaError("/m", "expected a positive integer");
    cfg.m = doc["m"].get<std::size_t>();
    auto number = [&](const char* key, double fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_number()) throw SchemaError(std::string("/") + key, "expected a number");
        return doc[key].get<double>();
    };
    cfg.sigma_v = number("sigma_v", 0.0);
    cfg.sigma_psi = number("sigma_psi", 0.0);
    cfg.sigma_scale = number("sigma_scale", 0.0);
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) throw SchemaError("/seed", "expected a nonnegative integer");
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    return cfg;
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"Elliptical tube representations: validity, means, morphs, simulation, testing", "etrep"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    // validate
    std::string validate_in;
    bool validate_json = false;
    auto* validate_cmd = app.add_subcommand("validate", "Check type invariants and the RCC of an ETRep");
    validate_cmd->add_option("input", validate_in, "ETRep JSON file")->required();
    validate_cmd->add_flag("--json", validate_json, "Print the full report as JSON");

    // mean
    std::string method = "intrinsic";
    bool scaled = false;
    std::vector<std::string> mean_inputs;
    std::string output;
    auto* mean_cmd = app.add_subcommand("mean", "Mean of a population (directory or list of ETRep files)");
    mean_cmd->add_option("--method", method, "intrinsic | nonintrinsic")
        ->check(CLI::IsMember({"intrinsic", "nonintrinsic"}));
    mean_cmd->add_flag("--scaled", scaled, "Shape mean (l1-normalize members first)");
    mean_cmd->add_option("inputs", mean_inputs, "Directory or ETRep files")->required();
    mean_cmd->add_option("-o,--output", output, "Output JSON")->required();

    // morph
    int steps = 10;
    int ring_samples = 32;
    std::vector<std::string> morph_inputs;
    auto* morph_cmd = app.add_subcommand("morph", "Export OBJ meshes along the path between two ETReps");
    morph_cmd->add_option("--method", method, "intrinsic | nonintrinsic")
        ->check(CLI::IsMember({"intrinsic", "nonintrinsic"}));
    morph_cmd->add_option("--steps", steps, "Number of path steps")->check(CLI::PositiveNumber);
    morph_cmd->add_option("-M", ring_samples, "Samples per ring")->check(CLI::Range(3, 1 << 20));
    morph_cmd->add_option("endpoints", morph_inputs, "Two ETRep files")->required()->expected(2);
    morph_cmd->add_option("-o,--output", output, "Output directory")->required();

    // simulate
    std::string config_path;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a population around a reference ETRep");
    sim_cmd->add_option("--config", config_path, "Simulation config JSON")->required();
    sim_cmd->add_option("-o,--output", output, "Output directory")->required();

    // test
    std::vector<std::string> groups;
    std::size_t permutations = kDefaultPermutations;
    std::uint64_t seed = 1;
    double alpha = 0.1;
    auto* test_cmd = app.add_subcommand("test", "Two-group permutation test (DiProPerm + per-feature tests)");
    test_cmd->add_option("--groups", groups, "Group A and group B directories")->required()->expected(2);
    test_cmd->add_flag("--scaled", scaled, "Test shapes (l1-normalize members first)");
    test_cmd->add_option("-N,--permutations", permutations, "Number of permutations")->check(CLI::Range(99, 100000000));
    test_cmd->add_option("--seed", seed, "Random seed");
    test_cmd->add_option("--alpha", alpha, "Significance level for the report mask")->check(CLI::Range(0.0, 1.0));
    test_cmd->add_option("-o,--output", output, "Output report JSON")->required();

    // export-obj
    std::string obj_in;
    bool caps = false;
    bool allow_invalid = false;
    auto* obj_cmd = app.add_subcommand("export-obj", "Export the implied boundary as a Wavefront OBJ mesh");
    obj_cmd->add_option("input", obj_in, "ETRep JSON file")->required();
    obj_cmd->add_option("-o,--output", output, "Output OBJ")->required();
    obj_cmd->add_option("-M", ring_samples, "Samples per ring")->check(CLI::Range(3, 1 << 20));
    obj_cmd->add_flag("--caps", caps, "Close both ends with triangle fans");
    obj_cmd->add_flag("--allow-invalid", allow_invalid, "Export even if the ETRep violates the RCC");

    // features
    std::vector<std::string> feature_inputs;
    auto* feat_cmd = app.add_subcommand("features", "Write skeletal-coordinate feature vectors as CSV");
    feat_cmd->add_option("inputs", feature_inputs, "Directory or ETRep files")->required();
    feat_cmd->add_flag("--scaled", scaled, "l1-normalize members first");
    feat_cmd->add_option("-o,--output", output, "Output CSV")->required();

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.emplace_back("etrep");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "etrep: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (validate_cmd->parsed()) {
            const ValidityReport report = validate(read_etrep(validate_in));
            if (validate_json)
                out << dump_json(to_json(report));
            else
                detail::print_report(out, report);
            return report.valid ? kOk : kInvalidGeometry;
        }

        if (mean_cmd->parsed()) {
            const std::vector<ETRep> members = detail::read_inputs(mean_inputs);
            if (members.empty()) {
                err << "etrep: no ETRep inputs found\n";
                return kNoInput;
            }
            for (std::size_t j = 0; j < members.size(); ++j) {
                const ValidityReport r = validate(members[j]);
                if (!r.valid) {
                    err << "etrep: input " << j << " is invalid\n";
                    detail::print_report(err, r);
                    return kInvalidGeometry;
                }
            }
            const SampleSet sample(members);
            json doc;
            ValidityReport report;
            int code = kOk;
            if (method == "intrinsic") {
                const ETRep mean = scaled ? intrinsic_shape_mean(sample) : intrinsic_mean(sample);
                report = validate(mean);
                doc = to_json(mean);
            } else {
                const NonIntrinsicResult res = scaled ? nonintrinsic_shape_mean(sample) : nonintrinsic_mean(sample);
                report = res.report;
                try {
                    doc = to_json(res.etrep());
                } catch (const DomainError& e) {
                    doc = json::object();
                    doc["error"] = e.what();
                }
                if (!report.valid) code = kInvalidMean;
            }
            const std::vector<int> wrap = psi_wraparound_sections(scaled ? normalize_sample(sample) : sample);
            doc["method"] = method;
            doc["scaled"] = scaled;
            doc["sample_size"] = sample.size();
            doc["validity"] = to_json(report);
            doc["warnings"] = json::array();
            for (int i : wrap)
                doc["warnings"].push_back("section " + std::to_string(i) +
                                          ": roll angles span more than pi; linear averaging of psi may be unreliable");
            etrep::detail::write_file(output, dump_json(doc));
            for (const auto& w : doc["warnings"]) err << "etrep: warning: " << w.get<std::string>() << "\n";
            detail::print_report(out, report);
            return code;
        }

        if (morph_cmd->parsed()) {
            const ETRep s1 = read_etrep(morph_inputs[0]);
            const ETRep s2 = read_etrep(morph_inputs[1]);
            for (const ETRep* s : {&s1, &s2}) {
                const ValidityReport r = validate(*s);
                if (!r.valid) {
                    err << "etrep: morph endpoint is invalid\n";
                    detail::print_report(err, r);
                    return kInvalidGeometry;
                }
            }
            const auto summary = export_morph(s1, s2, steps, detail::parse_method(method), output, ring_samples);
            for (const auto& row : summary)
                out << "step " << row.step << " gamma " << format_double(row.gamma) << ": "
                    << (row.valid ? "valid" : "invalid") << "\n";
            return kOk;
        }

        if (sim_cmd->parsed()) {
            const SimulationConfig cfg = detail::read_simulation_config(config_path);
            const ValidityReport r = validate(cfg.reference);
            if (!r.valid) {
                err << "etrep: simulation reference is invalid\n";
                detail::print_report(err, r);
                return kInvalidGeometry;
            }
            const SampleSet sample = simulate_population(cfg);
            write_population(sample, output);
            out << "wrote " << sample.size() << " members to " << output << "\n";
            return kOk;
        }

        if (test_cmd->parsed()) {
            SampleSet a(read_population(groups[0]));
            SampleSet b(read_population(groups[1]));
            if (a.size() < 2 || b.size() < 2) {
                err << "etrep: each group needs at least 2 members\n";
                return kNoInput;
            }
            if (a.n() != b.n()) {
                err << "etrep: groups differ in number of sections\n";
                return kDataError;
            }
            if (scaled) {
                a = normalize_sample(a);
                b = normalize_sample(b);
            }
            const TestReport report = two_group_test(feature_matrix(a), feature_matrix(b), permutations, seed);
            json doc;
            doc["groups"] = {{"A", {{"path", groups[0]}, {"size", a.size()}}},
                             {"B", {{"path", groups[1]}, {"size", b.size()}}}};
            doc["scaled"] = scaled;
            doc["permutations"] = permutations;
            doc["seed"] = seed;
            doc["alpha"] = alpha;
            doc["method"] = {{"global", report.global_method},
                             {"partial", report.partial_method},
                             {"adjustment", report.adjustment}};
            doc["global"] = {{"statistic", report.global.statistic},
                             {"p_value", report.global.p_value},
                             {"significant", report.global.p_value <= alpha}};
            json partial = json::array();
            for (const auto& r : report.partial) partial.push_back(detail::partial_json(r, alpha));
            doc["partial"] = std::move(partial);
            etrep::detail::write_file(output, dump_json(doc));
            out << "global DiProPerm p = " << format_double(report.global.p_value) << " (N = " << permutations
                << ")\n";
            return kOk;
        }

        if (obj_cmd->parsed()) {
            const ETRep s = read_etrep(obj_in);
            const ValidityReport r = validate(s);
            if (!r.valid && !allow_invalid) {
                err << "etrep: input is invalid (use --allow-invalid to export anyway)\n";
                detail::print_report(err, r);
                return kInvalidGeometry;
            }
            export_obj(s, ring_samples, caps, output, true);
            return kOk;
        }

        if (feat_cmd->parsed()) {
            SampleSet sample(detail::read_inputs(feature_inputs));
            if (scaled) sample = normalize_sample(sample);
            write_feature_csv(sample, output);
            return kOk;
        }
    } catch (const IoError& e) {
        err << "etrep: " << e.what() << "\n";
        return e.kind() == IoError::Kind::Read ? kNoInput : kCantCreate;
    } catch (const SchemaError& e) {
        err << "etrep: " << e.what() << "\n";
        return kDataError;
    } catch (const ValidationError& e) {
        err << "etrep: " << e.what() << "\n";
        return kInvalidGeometry;
    } catch (const DomainError& e) {
        err << "etrep: " << e.what() << "\n";
        return kInvalidGeometry;
    } catch (const std::exception& e) {
        err << "etrep: internal error: " << e.what() << "\n";
        return kSoftware;
    }
    return kUsage;
}

}  // namespace etrep::cli
