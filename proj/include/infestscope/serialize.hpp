#pragma once

// JSON serialization of the domain types plus canonical artifact writing:
// keys are emitted in sorted order (nlohmann's default object is an ordered
// map), every floating-point value is rounded to 9 significant digits before
// storage, and files are written atomically (temp + rename). Identical
// inputs and parameters therefore produce byte-identical artifacts.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "infestscope/blocks.hpp"
#include "infestscope/detections.hpp"
#include "infestscope/fem.hpp"
#include "infestscope/metrics.hpp"
#include "infestscope/raster.hpp"
#include "infestscope/situation.hpp"
#include "infestscope/synth.hpp"

namespace infestscope {

using Json = nlohmann::json;

/// Rounds to 9 significant digits so serialized numbers have a stable,
/// shortest-form text representation.
inline double round_sig9(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("cannot serialize non-finite number");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline Json json_num(double v) { return Json(round_sig9(v)); }

inline std::string canonical_dump(const Json& j) { return j.dump(2) + "\n"; }

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open output file: " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("failed writing file: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_json_artifact(const std::filesystem::path& path, const Json& j) {
    write_text_atomic(path, canonical_dump(j));
}

inline Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open JSON file: " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("corrupt JSON artifact " + path.string() + ": " + e.what());
    }
}

/// FNV-1a 64-bit digest of a file's bytes, hex-encoded; recorded in run
/// manifests as input provenance.
inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path.string());
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

// ============================================================================
// Domain type serialization
// ============================================================================

inline Json to_json(const PlotExtent& e) {
    return Json{{"x_min", json_num(e.x_min)},
                {"y_min", json_num(e.y_min)},
                {"x_max", json_num(e.x_max)},
                {"y_max", json_num(e.y_max)}};
}

inline PlotExtent extent_from_json(const Json& j) {
    return PlotExtent{j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                      j.at("x_max").get<double>(), j.at("y_max").get<double>()};
}

inline Json to_json(const ConfusionCounts& c) {
    return Json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

inline Json to_json(const EvalReport& rep, bool per_class) {
    Json j{{"precision", json_num(rep.precision)},
           {"recall", json_num(rep.recall)},
           {"map50", json_num(rep.map50)},
           {"map5095", json_num(rep.map5095)},
           {"counts", to_json(rep.counts)}};
    if (per_class) {
        Json ap;
        const std::array<TreeClass, 2> classes = {TreeClass::Infected, TreeClass::Healthy};
        for (TreeClass cls : classes) {
            Json row;
            for (std::size_t t = 0; t < kIouThresholds.size(); ++t) {
                char key[8];
                std::snprintf(key, sizeof key, "%.2f", kIouThresholds[t]);
                row[key] = json_num(rep.ap_at(cls, t));
            }
            ap[to_string(cls)] = row;
        }
        j["ap"] = ap;
    }
    return j;
}

inline Json to_json(const NormMeta& m) {
    Json j{{"min", json_num(m.min)}, {"max", json_num(m.max)}};
    if (m.clip_percentile) j["clip_percentile"] = json_num(*m.clip_percentile);
    return j;
}

/// Density metadata (everything except the value grid).
inline Json density_metadata_json(const DensityField& f) {
    return Json{{"extent", to_json(f.extent)},
                {"grid_w", f.grid_w},
                {"grid_h", f.grid_h},
                {"bandwidth", json_num(f.bandwidth)},
                {"bandwidth_x", json_num(f.bandwidth_x)},
                {"bandwidth_y", json_num(f.bandwidth_y)},
                {"n_points", f.n_points},
                {"normalization", f.normalization}};
}

inline Json to_json(const DensityField& f) {
    Json j = density_metadata_json(f);
    Json values = Json::array();
    for (double v : f.values) values.push_back(json_num(v));
    j["values"] = std::move(values);
    return j;
}

inline DensityField density_from_json(const Json& j) {
    DensityField f;
    f.extent = extent_from_json(j.at("extent"));
    f.grid_w = j.at("grid_w").get<int>();
    f.grid_h = j.at("grid_h").get<int>();
    f.bandwidth = j.at("bandwidth").get<double>();
    f.bandwidth_x = j.at("bandwidth_x").get<double>();
    f.bandwidth_y = j.at("bandwidth_y").get<double>();
    f.n_points = j.at("n_points").get<long>();
    f.normalization = j.at("normalization").get<std::string>();
    f.values = j.at("values").get<std::vector<double>>();
    if (f.values.size() != static_cast<std::size_t>(f.grid_w) * f.grid_h)
        throw std::runtime_error("density grid size does not match metadata");
    return f;
}

inline Json to_json(const EllipseFit& e) {
    return Json{{"center", Json{{"x", json_num(e.cx)}, {"y", json_num(e.cy)}}},
                {"semi_major", json_num(e.semi_major)},
                {"semi_minor", json_num(e.semi_minor)},
                {"angle", json_num(e.angle)}};
}

inline Json to_json(const ProtectionArea& a) {
    Json members = Json::array();
    for (const auto& m : a.members)
        members.push_back(Json{{"x", json_num(m.x)}, {"y", json_num(m.y)}, {"area", json_num(m.area)}});
    Json j = to_json(a.ellipse);
    j["id"] = a.id;
    j["member_count"] = static_cast<long>(a.members.size());
    j["members"] = std::move(members);
    return j;
}

inline Json to_json(const SizeClassStats& s) {
    auto bucket = [](const SizeClassStats::Bucket& b) {
        return Json{{"total", b.total},
                    {"infected", b.infected},
                    {"healthy", b.healthy},
                    {"infected_fraction", json_num(b.infected_fraction)}};
    };
    return Json{{"boundaries", Json{{"b1", json_num(s.b1)}, {"b2", json_num(s.b2)}}},
                {"degenerate", s.degenerate},
                {"mode", s.tertiles ? "tertiles" : "equal-width"},
                {"classes", Json{{"small", bucket(s.small)},
                                 {"medium", bucket(s.medium)},
                                 {"large", bucket(s.large)}}}};
}

inline Json to_json(const SceneExpected& e) {
    auto pairs = [](const std::vector<std::pair<double, double>>& v) {
        Json arr = Json::array();
        for (const auto& [x, y] : v) arr.push_back(Json{json_num(x), json_num(y)});
        return arr;
    };
    return Json{{"cluster_centroids", pairs(e.cluster_centroids)},
                {"cluster_sample_means", pairs(e.cluster_sample_means)},
                {"healthy_blob_centroids", pairs(e.healthy_blob_centroids)},
                {"confusion", to_json(e.confusion)}};
}

inline Json to_json(const SceneTruth& t) {
    return Json{{"extent", to_json(t.extent)},
                {"expected", to_json(t.expected)},
                {"min_spacing", json_num(t.min_spacing)},
                {"n_annotations", static_cast<long>(t.annotations.size())},
                {"n_detections", static_cast<long>(t.detections.size())},
                {"score_model", t.score_model}};
}

// ============================================================================
// Scene spec parsing (CLI input)
// ============================================================================

inline SceneSpec scene_spec_from_json(const Json& j) {
    SceneSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.extent = extent_from_json(j.at("extent"));
    for (const auto& c : j.value("clusters", Json::array())) {
        spec.clusters.push_back({c.at("cx").get<double>(), c.at("cy").get<double>(),
                                 c.at("std").get<double>(), c.at("count").get<int>()});
    }
    if (j.contains("healthy")) {
        const Json& h = j.at("healthy");
        const std::string placement = h.value("placement", "uniform");
        if (placement == "uniform") {
            spec.healthy.mode = HealthyPlacement::Mode::Uniform;
            spec.healthy.count = h.value("count", 0);
        } else if (placement == "blobs") {
            spec.healthy.mode = HealthyPlacement::Mode::Blobs;
            for (const auto& b : h.at("blobs"))
                spec.healthy.blobs.push_back({b.at("cx").get<double>(), b.at("cy").get<double>(),
                                              b.at("std").get<double>(), b.at("count").get<int>()});
        } else {
            throw std::runtime_error("scene spec: healthy.placement must be 'uniform' or 'blobs'");
        }
    }
    if (j.contains("crown_area_range")) {
        const auto& r = j.at("crown_area_range");
        spec.crown_area_range = {r.at(0).get<double>(), r.at(1).get<double>()};
    }
    if (j.contains("detector_noise")) {
        const Json& n = j.at("detector_noise");
        spec.detector_noise.miss_rate = n.value("miss_rate", 0.0);
        spec.detector_noise.false_rate = n.value("false_rate", 0.0);
        spec.detector_noise.box_jitter = n.value("box_jitter", 0.0);
        spec.detector_noise.score_model = n.value("score_model", std::string(kDefaultScoreModel));
    }
    spec.image_id = j.value("image_id", "synthetic");
    return spec;
}

}  // namespace infestscope
