#pragma once

// File formats: ETRep documents (JSON), feature matrices (CSV), boundary
// meshes (Wavefront OBJ) and morph sequences.

#include <etrep/errors.hpp>
#include <etrep/model.hpp>
#include <etrep/shape_space.hpp>
#include <etrep/stats.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace etrep {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1.0";

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::Read, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoError::Kind::Write, "cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(IoError::Kind::Write, "failed writing '" + path.string() + "'");
}

inline double json_number(const json& doc, const std::string& pointer) {
    const json::json_pointer ptr(pointer);
    if (!doc.contains(ptr)) throw SchemaError(pointer, "missing field");
    const json& v = doc.at(ptr);
    if (!v.is_number()) throw SchemaError(pointer, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(pointer, "number is not finite");
    return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ETRep documents

inline json to_json(const ETRep& s) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["n"] = s.n();
    json sections = json::array();
    for (const auto& cs : s.sections)
        sections.push_back({{"v", {cs.v.x(), cs.v.y()}}, {"psi", cs.psi}, {"x", cs.x}, {"a", cs.a}, {"b", cs.b}});
    doc["sections"] = std::move(sections);
    doc["metadata"] = s.metadata;
    return doc;
}

inline json to_json(const ValidityReport& report) {
    json sections = json::array();
    for (const auto& sr : report.sections) {
        json row = {{"index", sr.index},       {"rcc_ok", sr.rcc_ok},     {"invariants_ok", sr.invariants_ok},
                    {"margin", sr.margin},     {"theta", sr.derived.theta}, {"r", sr.derived.r},
                    {"kappa", std::isfinite(sr.derived.kappa) ? json(sr.derived.kappa) : json(nullptr)},
                    {"messages", sr.messages}};
        sections.push_back(std::move(row));
    }
    return {{"valid", report.valid}, {"failing_sections", report.failing_indices()}, {"sections", sections}};
}

/// Parses an ETRep document. Structural problems throw SchemaError carrying
/// the JSON pointer of the offending element; geometric validity is not checked.
inline ETRep etrep_from_json(const json& doc) {
    if (!doc.is_object()) throw SchemaError("", "document must be a JSON object");
    if (!doc.contains("schema_version") || !doc["schema_version"].is_string())
        throw SchemaError("/schema_version", "missing or not a string");
    if (!doc.contains("n") || !doc["n"].is_number_integer()) throw SchemaError("/n", "missing or not an integer");
    const long long n = doc["n"].get<long long>();
    if (n < 0) throw SchemaError("/n", "must be nonnegative");
    if (!doc.contains("sections") || !doc["sections"].is_array())
        throw SchemaError("/sections", "missing or not an array");
    const json& sections = doc["sections"];
    if (static_cast<long long>(sections.size()) != n + 1)
        throw SchemaError("/sections", "expected n + 1 = " + std::to_string(n + 1) + " sections, found " +
                                           std::to_string(sections.size()));
    ETRep s;
    s.sections.resize(sections.size());
    for (std::size_t i = 0; i < sections.size(); ++i) {
        const std::string base = "/sections/" + std::to_string(i);
        if (!sections[i].is_object()) throw SchemaError(base, "expected an object");
        const json& v = sections[i].contains("v") ? sections[i]["v"] : json();
        if (!v.is_array() || v.size() != 2) throw SchemaError(base + "/v", "expected an array of 2 numbers");
        CrossSection& cs = s.sections[i];
        cs.v = Vec2(detail::json_number(doc, base + "/v/0"), detail::json_number(doc, base + "/v/1"));
        cs.psi = detail::json_number(doc, base + "/psi");
        cs.x = detail::json_number(doc, base + "/x");
        cs.a = detail::json_number(doc, base + "/a");
        cs.b = detail::json_number(doc, base + "/b");
    }
    if (doc.contains("metadata")) {
        const json& md = doc["metadata"];
        if (!md.is_object()) throw SchemaError("/metadata", "expected an object of strings");
        for (auto it = md.begin(); it != md.end(); ++it) {
            if (!it.value().is_string()) throw SchemaError("/metadata/" + it.key(), "expected a string");
            s.metadata[it.key()] = it.value().get<std::string>();
        }
    }
    return s;
}

inline ETRep parse_etrep(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("malformed JSON: ") + e.what());
    }
    return etrep_from_json(doc);
}

inline ETRep read_etrep(const fs::path& path) { return parse_etrep(detail::read_file(path)); }

inline std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

inline void write_etrep(const ETRep& s, const fs::path& path) { detail::write_file(path, dump_json(to_json(s))); }

/// All *.json files in a directory, in lexicographic filename order.
inline std::vector<fs::path> list_json_files(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError(IoError::Kind::Read, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& l, const fs::path& r) { return l.filename().string() < r.filename().string(); });
    return files;
}

inline std::vector<ETRep> read_population(const fs::path& dir) {
    std::vector<ETRep> members;
    for (const auto& f : list_json_files(dir)) members.push_back(read_etrep(f));
    return members;
}

/// Writes member_000.json, member_001.json, ... into dir (created if needed).
inline void write_population(const SampleSet& sample, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(IoError::Kind::Write, "cannot create directory '" + dir.string() + "'");
    const int width = std::max<int>(3, static_cast<int>(std::to_string(sample.size()).size()));
    for (std::size_t j = 0; j < sample.size(); ++j) {
        std::string idx = std::to_string(j);
        idx.insert(0, static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(idx.size()))), '0');
        write_etrep(sample[j], dir / ("member_" + idx + ".json"));
    }
}

// ---------------------------------------------------------------------------
// Feature CSV

inline std::string feature_csv(const FeatureMatrix& fm) {
    std::string out;
    for (std::size_t k = 0; k < fm.columns.size(); ++k) {
        if (k) out += ',';
        out += fm.columns[k];
    }
    out += '\n';
    for (Eigen::Index r = 0; r < fm.data.rows(); ++r) {
        for (Eigen::Index k = 0; k < fm.data.cols(); ++k) {
            if (k) out += ',';
            out += format_double(fm.data(r, k));
        }
        out += '\n';
    }
    return out;
}

/// One row per member in skeletal coordinates. n_hint fixes the header of an
/// empty sample.
inline void write_feature_csv(const SampleSet& sample, const fs::path& path, int n_hint = -1) {
    FeatureMatrix fm = feature_matrix(sample);
    if (sample.empty() && n_hint >= 0) fm.columns = feature_names(n_hint);
    detail::write_file(path, feature_csv(fm));
}

inline FeatureMatrix parse_feature_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos < text.size();) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = end + 1;
    }
    std::vector<std::vector<std::string>> rows;
    for (std::string_view line : lines) {
        std::vector<std::string> fields;
        for (std::size_t p = 0; !line.empty();) {
            const std::size_t c = line.find(',', p);
            fields.emplace_back(line.substr(p, c == std::string_view::npos ? std::string_view::npos : c - p));
            if (c == std::string_view::npos) break;
            p = c + 1;
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw SchemaError("row 1", "missing header");
    FeatureMatrix fm;
    fm.columns = rows.front();
    if (fm.columns.size() % kFeaturesPerSection != 0)
        throw SchemaError("row 1", "column count " + std::to_string(fm.columns.size()) + " is not a multiple of 6");
    const auto expected = feature_names(static_cast<int>(fm.columns.size() / kFeaturesPerSection) - 1);
    for (std::size_t k = 0; k < fm.columns.size(); ++k)
        if (fm.columns[k] != expected[k])
            throw SchemaError("row 1, column " + std::to_string(k + 1),
                              "expected header '" + expected[k] + "', found '" + fm.columns[k] + "'");
    const Eigen::Index cols = static_cast<Eigen::Index>(fm.columns.size());
    fm.data.resize(static_cast<Eigen::Index>(rows.size() - 1), cols);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != fm.columns.size())
            throw SchemaError("row " + std::to_string(r + 1), "expected " + std::to_string(fm.columns.size()) +
                                                                  " fields, found " + std::to_string(rows[r].size()));
        for (std::size_t k = 0; k < rows[r].size(); ++k) {
            const std::string& f = rows[r][k];
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size())
                throw SchemaError("row " + std::to_string(r + 1) + ", column " + std::to_string(k + 1),
                                  "not a number: '" + f + "'");
            fm.data(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(k)) = v;
        }
    }
    return fm;
}

inline FeatureMatrix read_feature_csv(const fs::path& path) { return parse_feature_csv(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Boundary meshes

struct BoundaryMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;  // 0-based, counter-clockwise seen from outside
};

/// Rings of M samples p_i + a_i cos(eta_j) a-axis + b_i sin(eta_j) b-axis,
/// eta_j = 2 pi j / M, joined by triangle pairs; optional end-cap fans.
inline BoundaryMesh make_boundary_mesh(const GlobalTube& g, int M, bool caps) {
    if (M < 3) throw DomainError("boundary mesh needs at least 3 samples per ring");
    BoundaryMesh mesh;
    const int rings = static_cast<int>(g.size());
    mesh.vertices.reserve(static_cast<std::size_t>(rings * M + (caps ? 2 : 0)));
    for (int i = 0; i < rings; ++i) {
        const Rotation& f = g.frames[static_cast<std::size_t>(i)];
        const Radii& rad = g.radii[static_cast<std::size_t>(i)];
        for (int j = 0; j < M; ++j) {
            const double eta = 2.0 * kPi * j / M;
            mesh.vertices.push_back(g.points[static_cast<std::size_t>(i)] + rad.a * std::cos(eta) * f.a() +
                                    rad.b * std::sin(eta) * f.b());
        }
    }
    auto vid = [M](int ring, int j) { return ring * M + (j % M); };
    for (int i = 0; i + 1 < rings; ++i) {
        for (int j = 0; j < M; ++j) {
            mesh.faces.push_back({vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)});
            mesh.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i + 1, j)});
        }
    }
    if (caps && rings > 0) {
        const int start = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(g.points.front());
        mesh.vertices.push_back(g.points.back());
        for (int j = 0; j < M; ++j) {
            mesh.faces.push_back({start, vid(0, j + 1), vid(0, j)});
            mesh.faces.push_back({start + 1, vid(rings - 1, j), vid(rings - 1, j + 1)});
        }
    }
    return mesh;
}

inline std::string obj_text(const BoundaryMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 24);
    for (const auto& v : mesh.vertices) {
        out += "v ";
        out += format_double(v.x());
        out += ' ';
        out += format_double(v.y());
        out += ' ';
        out += format_double(v.z());
        out += '\n';
    }
    for (const auto& f : mesh.faces) {
        out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
    }
    return out;
}

inline void write_obj(const BoundaryMesh& mesh, const fs::path& path) { detail::write_file(path, obj_text(mesh)); }

/// Throws ValidationError for an invalid ETRep unless allow_invalid is set.
inline void export_obj(const ETRep& s, int M, bool caps, const fs::path& path, bool allow_invalid = false) {
    if (M < 3) throw DomainError("boundary mesh needs at least 3 samples per ring");
    write_obj(make_boundary_mesh(reconstruct_global(s, allow_invalid), M, caps), path);
}

// ---------------------------------------------------------------------------
// Morph sequences

enum class PathMethod { Intrinsic, NonIntrinsic };

struct MorphStep {
    int step = 0;
    double gamma = 0.0;
    bool valid = true;
    double min_margin = 0.0;
};

/// Writes step_000.obj ... step_K.obj along the chosen path and validity.csv
/// (one row per step) into dir.
inline std::vector<MorphStep> export_morph(const ETRep& s1, const ETRep& s2, int steps, PathMethod method,
                                           const fs::path& dir, int M = 32) {
    if (steps < 1) throw DomainError("morph needs at least one step");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(IoError::Kind::Write, "cannot create directory '" + dir.string() + "'");
    std::vector<MorphStep> summary;
    std::string csv = "step,gamma,valid,min_margin\n";
    const int width = std::max<int>(3, static_cast<int>(std::to_string(steps).size()));
    for (int k = 0; k <= steps; ++k) {
        const double gamma = static_cast<double>(k) / steps;
        MorphStep row;
        row.step = k;
        row.gamma = gamma;
        GlobalTube g;
        if (method == PathMethod::Intrinsic) {
            const ETRep s = intrinsic_path(s1, s2, gamma);
            const ValidityReport report = validate(s);
            row.valid = report.valid;
            row.min_margin = report.min_margin();
            g = reconstruct_global(s, true);
        } else {
            const NonIntrinsicResult r = nonintrinsic_path(s1, s2, gamma);
            row.valid = r.report.valid;
            row.min_margin = r.report.min_margin();
            g = reconstruct_global(r.chain);
        }
        std::string idx = std::to_string(k);
        idx.insert(0, static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(idx.size()))), '0');
        write_obj(make_boundary_mesh(g, M, true), dir / ("step_" + idx + ".obj"));
        csv += std::to_string(k) + ',' + format_double(gamma) + ',' + (row.valid ? "true" : "false") + ',' +
               format_double(row.min_margin) + '\n';
        summary.push_back(row);
    }
    detail::write_file(dir / "validity.csv", csv);
    return summary;
}

}  // namespace etrep
