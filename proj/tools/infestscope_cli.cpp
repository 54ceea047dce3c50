// infestscope - forest-infestation image analytics toolkit.
//
// Subcommands cover the pipeline end to end: tile an orthomosaic, compute
// the enhanced feature channels, run the fusion-block demo, evaluate
// detections against ground truth, and derive the situation products
// (density field, healthy-tree risk, protection areas, size classes) from
// detection or annotation CSVs. `synth` generates oracle scenes and
// `report` bundles a directory of artifacts into one JSON document.
//
// Every subcommand writes a manifest.json next to its artifacts recording
// the parameters and input digests. Errors are reported as a single line
// `error: <subcommand>: <message>` on stderr with a non-zero exit status.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "infestscope/blocks.hpp"
#include "infestscope/detections.hpp"
#include "infestscope/fem.hpp"
#include "infestscope/metrics.hpp"
#include "infestscope/png_io.hpp"
#include "infestscope/raster.hpp"
#include "infestscope/rng.hpp"
#include "infestscope/serialize.hpp"
#include "infestscope/situation.hpp"
#include "infestscope/synth.hpp"

namespace fs = std::filesystem;
using namespace infestscope;

namespace {

struct ManifestBuilder {
    std::string subcommand;
    Json parameters = Json::object();
    Json inputs = Json::array();
    Json artifacts = Json::array();

    void add_input(const fs::path& p) {
        inputs.push_back(Json{{"path", p.string()}, {"digest", file_digest(p)}});
    }
    void add_artifact(const std::string& name) { artifacts.push_back(name); }

    void write(const fs::path& out_dir) const {
        write_json_artifact(out_dir / "manifest.json",
                            Json{{"tool", "infestscope"},
                                 {"subcommand", subcommand},
                                 {"parameters", parameters},
                                 {"inputs", inputs},
                                 {"artifacts", artifacts}});
    }
};

fs::path ensure_out_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

void save_image_atomic(const Raster& r, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    save_image(r, tmp);
    fs::rename(tmp, path);
}

Raster field_to_raster(const std::vector<double>& field, int w, int h, double lo, double hi) {
    Raster r = make_raster(w, h, 1, 0.0);
    const double span = hi - lo;
    for (std::size_t i = 0; i < field.size(); ++i)
        r.data[i] = span > 0.0 ? std::clamp((field[i] - lo) / span, 0.0, 1.0) : 0.0;
    return r;
}

/// Loads tree points from a detection or annotation CSV (detected by header).
std::vector<TreePoint> load_points_csv(const fs::path& path) {
    std::ifstream probe(path);
    if (!probe) throw std::runtime_error("cannot open CSV file: " + path.string());
    std::string header;
    std::getline(probe, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    probe.close();
    if (header == kDetectionCsvHeader) return to_points(load_detections_csv(path));
    return to_points(load_annotations_csv(path));
}

std::vector<TreePoint> filter_class(const std::vector<TreePoint>& pts, TreeClass cls) {
    std::vector<TreePoint> out;
    for (const auto& p : pts)
        if (p.cls == cls) out.push_back(p);
    return out;
}

PlotExtent resolve_extent(const std::vector<TreePoint>& all_points,
                          const std::vector<double>& extent_flag) {
    if (!extent_flag.empty()) {
        if (extent_flag.size() != 4)
            throw std::runtime_error("--extent needs x_min,y_min,x_max,y_max");
        PlotExtent e{extent_flag[0], extent_flag[1], extent_flag[2], extent_flag[3]};
        if (!e.valid()) throw std::runtime_error("--extent is degenerate");
        return e;
    }
    return bounding_extent(all_points);
}

// ---------------------------------------------------------------------------
// tile
// ---------------------------------------------------------------------------

struct TileArgs {
    std::string input, out;
    int tile_size = 1024;
    int overlap = 0;
};

void run_tile(const TileArgs& a) {
    const fs::path out_dir = ensure_out_dir(a.out);
    const Raster src = load_image_any(a.input);
    const TileGrid grid = tile(src, a.tile_size, a.overlap);

    ManifestBuilder mf;
    mf.subcommand = "tile";
    mf.parameters = {{"tile_size", a.tile_size}, {"overlap", a.overlap}};
    mf.add_input(a.input);

    const char* ext = src.channels == 1 ? ".pgm" : ".ppm";
    Json tiles = Json::array();
    for (const auto& t : grid.tiles) {
        char name[64];
        std::snprintf(name, sizeof name, "tile_r%03d_c%03d%s", t.row, t.col, ext);
        save_image_atomic(t.raster, out_dir / name);
        tiles.push_back(Json{{"row", t.row}, {"col", t.col}, {"file", name}});
        mf.add_artifact(name);
    }
    write_json_artifact(out_dir / "tiling.json",
                        Json{{"tile_size", grid.tile_size},
                             {"overlap", grid.overlap},
                             {"cols", grid.cols},
                             {"rows", grid.rows},
                             {"pad_right", grid.pad_right},
                             {"pad_bottom", grid.pad_bottom},
                             {"source_width", src.width},
                             {"source_height", src.height},
                             {"channels", src.channels},
                             {"tiles", tiles}});
    mf.add_artifact("tiling.json");
    mf.write(out_dir);
    std::cout << grid.cols << "x" << grid.rows << " tiles written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// fem
// ---------------------------------------------------------------------------

struct FemArgs {
    std::string input, out;
};

void run_fem(const FemArgs& a) {
    const fs::path out_dir = ensure_out_dir(a.out);
    const Raster rgb = load_image_any(a.input);
    if (rgb.channels != 3) throw std::runtime_error("fem input must be a 3-channel image");
    const Tofi tofi = build_tofi(rgb);

    ManifestBuilder mf;
    mf.subcommand = "fem";
    mf.add_input(a.input);

    const int w = rgb.width, h = rgb.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> channel(n);
        for (std::size_t i = 0; i < n; ++i) channel[i] = tofi.base.data[i * 3 + c];
        Raster img = make_raster(w, h, 1, 0.0);
        img.data = std::move(channel);
        const char* name = c == 0 ? "vdvi.pgm" : (c == 1 ? "texture.pgm" : "ngbdi.pgm");
        save_image_atomic(img, out_dir / name);
        mf.add_artifact(name);
    }
    save_image_atomic(tofi.base, out_dir / "tofi.ppm");
    mf.add_artifact("tofi.ppm");

    write_json_artifact(out_dir / "tofi.json",
                        Json{{"width", w},
                             {"height", h},
                             {"norm_meta", Json{{"vdvi", to_json(tofi.norm_meta[0])},
                                                {"texture", to_json(tofi.norm_meta[1])},
                                                {"ngbdi", to_json(tofi.norm_meta[2])}}}});
    mf.add_artifact("tofi.json");
    mf.write(out_dir);
    std::cout << "TOFI channels written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// blocks demo
// ---------------------------------------------------------------------------

struct BlocksArgs {
    std::string out;
    std::string params_file;
    std::string input;  // optional RGB image; its TOFI becomes the second branch
    std::uint64_t seed = 7;
    int c_rgb = 8, c_fem = 3, c_out = 8;
    int height = 16, width = 16;
};

FeatureMap feature_map_from_raster(const Raster& r) {
    FeatureMap f = make_feature_map(r.channels, r.height, r.width);
    for (int c = 0; c < r.channels; ++c)
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x) f.at(c, y, x) = r.at(x, y, c);
    return f;
}

Matrix matrix_from_flat(const std::vector<double>& flat, int rows, int cols, const char* what) {
    if (static_cast<int>(flat.size()) != rows * cols)
        throw std::runtime_error(std::string(what) + ": expected " + std::to_string(rows * cols) +
                                 " values, got " + std::to_string(flat.size()));
    Matrix m;
    m.rows = rows;
    m.cols = cols;
    m.data = flat;
    return m;
}

void run_blocks_demo(const BlocksArgs& a) {
    SplitMix64 rng(a.seed);
    auto fill = [&](int count) {
        std::vector<double> v(static_cast<std::size_t>(count));
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        return v;
    };

    FeatureMap rgb_feat, fem_feat;
    int c_rgb = a.c_rgb, c_fem = a.c_fem;
    if (!a.input.empty()) {
        // real branches: the RGB image and its enhanced feature channels
        const Raster rgb = load_image_any(a.input);
        if (rgb.channels != 3) throw std::runtime_error("blocks input must be a 3-channel image");
        rgb_feat = feature_map_from_raster(rgb);
        fem_feat = feature_map_from_raster(build_tofi(rgb).base);
        c_rgb = c_fem = 3;
    } else {
        rgb_feat = make_feature_map(c_rgb, a.height, a.width);
        fem_feat = make_feature_map(c_fem, a.height, a.width);
        rgb_feat.data = fill(static_cast<int>(rgb_feat.data.size()));
        fem_feat.data = fill(static_cast<int>(fem_feat.data.size()));
    }

    AmfmParams params;
    std::vector<double> eca_weights;
    const int k = eca_kernel_size(a.c_out);
    if (!a.params_file.empty()) {
        const Json j = load_json(a.params_file);
        params.proj_rgb = matrix_from_flat(j.at("proj_rgb").get<std::vector<double>>(), a.c_out,
                                           c_rgb, "proj_rgb");
        params.proj_fem = matrix_from_flat(j.at("proj_fem").get<std::vector<double>>(), a.c_out,
                                           c_fem, "proj_fem");
        const auto logits = j.at("logits").get<std::vector<double>>();
        if (logits.size() != 2) throw std::runtime_error("logits: expected 2 values");
        params.logit_rgb = logits[0];
        params.logit_fem = logits[1];
        eca_weights = j.at("eca_weights").get<std::vector<double>>();
    } else {
        params.proj_rgb = matrix_from_flat(fill(a.c_out * c_rgb), a.c_out, c_rgb, "proj_rgb");
        params.proj_fem = matrix_from_flat(fill(a.c_out * c_fem), a.c_out, c_fem, "proj_fem");
        params.logit_rgb = rng.uniform(-1.0, 1.0);
        params.logit_fem = rng.uniform(-1.0, 1.0);
        eca_weights = fill(k);
    }

    const FeatureMap fused = amfm_fuse(rgb_feat, fem_feat, params);
    const FeatureMap gated = eca_forward(fused, eca_weights);

    // invariant checks
    const auto [w_rgb, w_fem] = softmax_pair(params.logit_rgb, params.logit_fem);
    const double weight_sum_err = std::abs(w_rgb + w_fem - 1.0);
    bool gains_in_range = true;
    for (int c = 0; c < gated.channels && gains_in_range; ++c) {
        for (std::size_t i = 0; i < gated.plane_size(); ++i) {
            const double x = fused.data[c * fused.plane_size() + i];
            const double y = gated.data[c * gated.plane_size() + i];
            if (x != 0.0 && !(std::abs(y) < std::abs(x))) {
                gains_in_range = false;
                break;
            }
        }
    }

    std::cout << "amfm weights: rgb=" << w_rgb << " fem=" << w_fem
              << " (sum-1 = " << weight_sum_err << ")\n";
    std::cout << "eca kernel size for C=" << a.c_out << ": " << k << "\n";
    std::cout << "invariant softmax-weights-sum-to-1: " << (weight_sum_err < 1e-12 ? "ok" : "FAIL")
              << "\n";
    std::cout << "invariant eca-gains-strictly-shrink: " << (gains_in_range ? "ok" : "FAIL") << "\n";

    if (!a.out.empty()) {
        const fs::path out_dir = ensure_out_dir(a.out);
        ManifestBuilder mf;
        mf.subcommand = "blocks";
        mf.parameters = {{"seed", a.seed},       {"c_rgb", c_rgb},   {"c_fem", c_fem},
                         {"c_out", a.c_out},     {"height", a.height}, {"width", a.width},
                         {"kernel_size", k}};
        if (!a.params_file.empty()) mf.add_input(a.params_file);

        Json par{{"proj_rgb", params.proj_rgb.data},
                 {"proj_fem", params.proj_fem.data},
                 {"logits", Json{params.logit_rgb, params.logit_fem}},
                 {"eca_weights", eca_weights}};
        write_json_artifact(out_dir / "params.json", par);
        mf.add_artifact("params.json");

        Json summary{{"weight_rgb", json_num(w_rgb)},
                     {"weight_fem", json_num(w_fem)},
                     {"kernel_size", k},
                     {"fused_channels", fused.channels},
                     {"checks", Json{{"softmax_sum", weight_sum_err < 1e-12},
                                     {"gains_shrink", gains_in_range}}}};
        write_json_artifact(out_dir / "blocks.json", summary);
        mf.add_artifact("blocks.json");
        mf.write(out_dir);
    }
    if (weight_sum_err >= 1e-12 || !gains_in_range)
        throw std::runtime_error("block invariant check failed");
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string dets, gts, voc_dir, out;
    double score_thr = 0.0;
    bool per_class = false;
};

void run_evaluate(const EvaluateArgs& a) {
    std::vector<Detection> dets = load_detections_csv(a.dets);
    std::vector<Annotation> gts;
    std::vector<fs::path> gt_inputs;
    if (!a.voc_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(a.voc_dir))
            if (e.path().extension() == ".xml") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw std::runtime_error("no .xml files in " + a.voc_dir);
        for (const auto& f : files) {
            auto anns = load_voc_xml(f);
            gts.insert(gts.end(), anns.begin(), anns.end());
            gt_inputs.push_back(f);
        }
    } else if (!a.gts.empty()) {
        gts = load_annotations_csv(a.gts);
        gt_inputs.push_back(a.gts);
    } else {
        throw std::runtime_error("need --gts or --voc");
    }

    if (a.score_thr > 0.0) {
        std::erase_if(dets, [&](const Detection& d) { return d.score < a.score_thr; });
    }

    const EvalReport rep = evaluate(dets, gts);
    const Json j = to_json(rep, a.per_class);
    std::cout << canonical_dump(j);

    if (!a.out.empty()) {
        const fs::path out_dir = ensure_out_dir(a.out);
        write_json_artifact(out_dir / "evaluation.json", j);
        ManifestBuilder mf;
        mf.subcommand = "evaluate";
        mf.parameters = {{"score_thr", json_num(a.score_thr)}, {"per_class", a.per_class}};
        mf.add_input(a.dets);
        for (const auto& g : gt_inputs) mf.add_input(g);
        mf.add_artifact("evaluation.json");
        mf.write(out_dir);
    }
}

// ---------------------------------------------------------------------------
// density
// ---------------------------------------------------------------------------

struct DensityArgs {
    std::string input, out;
    int grid_w = 256, grid_h = 256;
    double bandwidth = 0.0;  // 0 = n^(-1/6) rule
    bool scott = false;
    int peaks = 5;
    std::vector<double> extent;
};

void run_density(const DensityArgs& a) {
    const auto all = load_points_csv(a.input);
    const auto infected = filter_class(all, TreeClass::Infected);
    if (infected.empty()) throw std::runtime_error("empty infected set");
    const PlotExtent extent = resolve_extent(all, a.extent);

    KdeOptions opt;
    opt.grid_w = a.grid_w;
    opt.grid_h = a.grid_h;
    opt.bandwidth_override = a.bandwidth;
    opt.scott = a.scott;
    const DensityField field = kde(infected, extent, opt);

    const fs::path out_dir = ensure_out_dir(a.out);
    Json j = to_json(field);

    const auto maxima = local_maxima(field, a.peaks);
    Json peaks = Json::array();
    for (const auto& [ix, iy] : maxima) {
        peaks.push_back(Json{{"ix", ix},
                             {"iy", iy},
                             {"x", json_num(extent.x_min + (ix + 0.5) / field.grid_w * extent.width())},
                             {"y", json_num(extent.y_min + (iy + 0.5) / field.grid_h * extent.height())},
                             {"value", json_num(field.at(ix, iy))}});
    }
    j["peaks"] = peaks;

    const auto [lo_it, hi_it] = std::minmax_element(field.values.begin(), field.values.end());
    j["render_scale"] = Json{{"min", json_num(*lo_it)}, {"max", json_num(*hi_it)}};
    write_json_artifact(out_dir / "density.json", j);
    save_image_atomic(field_to_raster(field.values, field.grid_w, field.grid_h, *lo_it, *hi_it),
                      out_dir / "density.pgm");

    ManifestBuilder mf;
    mf.subcommand = "density";
    mf.parameters = {{"grid_w", a.grid_w},
                     {"grid_h", a.grid_h},
                     {"bandwidth", json_num(a.bandwidth)},
                     {"scott", a.scott},
                     {"peaks", a.peaks}};
    mf.add_input(a.input);
    mf.add_artifact("density.json");
    mf.add_artifact("density.pgm");
    mf.write(out_dir);
    std::cout << "density field (" << field.grid_w << "x" << field.grid_h
              << ", h=" << field.bandwidth << ") written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// risk
// ---------------------------------------------------------------------------

struct RiskArgs {
    std::string input, out;
    double radius = 0.05;  // normalized units; set from pest dispersal data
    int grid_w = 256, grid_h = 256;
    double bandwidth = 0.0;
    bool scott = false;
    std::vector<double> extent;
};

void run_risk(const RiskArgs& a) {
    const auto all = load_points_csv(a.input);
    const auto infected = filter_class(all, TreeClass::Infected);
    const auto healthy = filter_class(all, TreeClass::Healthy);
    if (infected.empty()) throw std::runtime_error("empty infected set");
    if (healthy.empty()) throw std::runtime_error("empty healthy set");
    const PlotExtent extent = resolve_extent(all, a.extent);

    KdeOptions opt;
    opt.grid_w = a.grid_w;
    opt.grid_h = a.grid_h;
    opt.bandwidth_override = a.bandwidth;
    opt.scott = a.scott;
    const DensityField field = kde(infected, extent, opt);
    const RiskTable table = risk_scores(healthy, field, a.radius);

    const fs::path out_dir = ensure_out_dir(a.out);
    {
        std::ostringstream csv;
        csv << "x,y,risk\n";
        for (const auto& e : table.entries)
            csv << detail::format_full(e.tree.x) << ',' << detail::format_full(e.tree.y) << ','
                << detail::format_full(e.risk) << "\n";
        write_text_atomic(out_dir / "risk.csv", csv.str());
    }

    ManifestBuilder mf;
    mf.subcommand = "risk";
    mf.parameters = {{"radius", json_num(a.radius)},
                     {"grid_w", a.grid_w},
                     {"grid_h", a.grid_h},
                     {"bandwidth", json_num(a.bandwidth)},
                     {"scott", a.scott}};
    mf.add_input(a.input);
    mf.add_artifact("risk.csv");
    mf.write(out_dir);
    std::cout << table.entries.size() << " risk scores written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// protect
// ---------------------------------------------------------------------------

struct ProtectArgs {
    std::string input, out;
    double eps = 0.0;  // 0 = median 4th-nearest-neighbor distance
    int min_pts = 4;
};

void run_protect(const ProtectArgs& a) {
    const auto all = load_points_csv(a.input);
    const auto healthy = filter_class(all, TreeClass::Healthy);
    if (healthy.empty()) throw std::runtime_error("empty healthy set");

    double eps = a.eps;
    std::string eps_rule = "user";
    if (eps <= 0.0) {
        if (healthy.size() < 5)
            throw std::runtime_error("need at least 5 healthy trees for the eps heuristic; "
                                     "pass --eps explicitly");
        eps = median_knn_distance(healthy, 4);
        eps_rule = "median-4nn";
    }

    const auto areas = protection_areas(healthy, eps, a.min_pts);

    const fs::path out_dir = ensure_out_dir(a.out);
    Json arr = Json::array();
    for (const auto& pa : areas) arr.push_back(to_json(pa));
    write_json_artifact(out_dir / "protection_areas.json",
                        Json{{"areas", arr},
                             {"eps", json_num(eps)},
                             {"eps_rule", eps_rule},
                             {"min_pts", a.min_pts},
                             {"n_healthy", static_cast<long>(healthy.size())}});

    ManifestBuilder mf;
    mf.subcommand = "protect";
    mf.parameters = {{"eps", json_num(a.eps)}, {"min_pts", a.min_pts}};
    mf.add_input(a.input);
    mf.add_artifact("protection_areas.json");
    mf.write(out_dir);
    std::cout << areas.size() << " protection areas written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// sizeclass
// ---------------------------------------------------------------------------

struct SizeClassArgs {
    std::string input, out;
    bool tertiles = false;
};

void run_sizeclass(const SizeClassArgs& a) {
    const auto all = load_points_csv(a.input);
    if (all.empty()) throw std::runtime_error("empty tree set");
    const SizeClassStats stats = size_class_stats(all, a.tertiles);

    const fs::path out_dir = ensure_out_dir(a.out);
    write_json_artifact(out_dir / "size_class_stats.json", to_json(stats));

    ManifestBuilder mf;
    mf.subcommand = "sizeclass";
    mf.parameters = {{"tertiles", a.tertiles}};
    mf.add_input(a.input);
    mf.add_artifact("size_class_stats.json");
    mf.write(out_dir);
    std::cout << "size-class statistics written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string spec, out;
    bool render_scene = false;
    double ppm = 1.0;
};

void run_synth(const SynthArgs& a) {
    const SceneSpec spec = scene_spec_from_json(load_json(a.spec));
    const SceneTruth truth = generate(spec);

    const fs::path out_dir = ensure_out_dir(a.out);
    ManifestBuilder mf;
    mf.subcommand = "synth";
    mf.parameters = {{"render", a.render_scene}, {"ppm", json_num(a.ppm)}};
    mf.add_input(a.spec);

    {
        const fs::path tmp = out_dir / "annotations.csv.tmp";
        save_annotations_csv(truth.annotations, tmp);
        fs::rename(tmp, out_dir / "annotations.csv");
    }
    {
        const fs::path tmp = out_dir / "detections.csv.tmp";
        save_detections_csv(truth.detections, tmp);
        fs::rename(tmp, out_dir / "detections.csv");
    }
    write_json_artifact(out_dir / "truth.json", to_json(truth));
    mf.add_artifact("annotations.csv");
    mf.add_artifact("detections.csv");
    mf.add_artifact("truth.json");

    if (a.render_scene) {
        save_image_atomic(render(truth, a.ppm), out_dir / "scene.ppm");
        mf.add_artifact("scene.ppm");
    }
    mf.write(out_dir);
    std::cout << truth.annotations.size() << " annotations, " << truth.detections.size()
              << " detections written to " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string dir, out;
    std::vector<std::string> require;
};

void run_report(const ReportArgs& a) {
    const fs::path dir(a.dir);
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + a.dir);

    Json report = Json::object();
    ManifestBuilder mf;
    mf.subcommand = "report";

    auto take_json = [&](const char* file, const char* section,
                         const std::vector<std::string>& drop = {}) {
        const fs::path p = dir / file;
        if (!fs::exists(p)) return false;
        Json j = load_json(p);
        for (const auto& key : drop) j.erase(key);
        report[section] = std::move(j);
        mf.add_input(p);
        return true;
    };

    std::map<std::string, bool> present;
    present["metrics"] = take_json("evaluation.json", "metrics");
    present["density"] = take_json("density.json", "density", {"values"});
    present["protection_areas"] = take_json("protection_areas.json", "protection_areas");
    present["size_class"] = take_json("size_class_stats.json", "size_class");

    // risk summary from the CSV table
    present["risk"] = false;
    if (fs::exists(dir / "risk.csv")) {
        std::ifstream in(dir / "risk.csv");
        std::string line;
        std::getline(in, line);  // header
        double lo = 0.0, hi = 0.0, sum = 0.0;
        long count = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto fields = detail::split_csv_line(line);
            if (fields.size() != 3)
                throw std::runtime_error("corrupt risk table " + (dir / "risk.csv").string());
            const double r = detail::parse_number(fields[2], "risk.csv risk");
            if (count == 0) lo = hi = r;
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            sum += r;
            ++count;
        }
        report["risk"] = Json{{"count", count},
                              {"min", json_num(count ? lo : 0.0)},
                              {"max", json_num(count ? hi : 0.0)},
                              {"mean", json_num(count ? sum / count : 0.0)}};
        mf.add_input(dir / "risk.csv");
        present["risk"] = true;
    }

    for (const auto& section : a.require) {
        auto it = present.find(section);
        if (it == present.end())
            throw std::runtime_error("unknown section in --require: " + section);
        if (!it->second)
            throw std::runtime_error("missing mandatory section '" + section + "'");
    }
    if (report.empty()) throw std::runtime_error("no artifacts found in " + a.dir);

    std::cout << canonical_dump(report);
    if (!a.out.empty()) {
        const fs::path out_dir = ensure_out_dir(a.out);
        write_json_artifact(out_dir / "report.json", report);
        mf.parameters = {{"dir", a.dir}};
        mf.add_artifact("report.json");
        mf.write(out_dir);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forest-infestation image analytics toolkit"};
    app.require_subcommand(1);

    TileArgs tile_args;
    auto* tile_cmd = app.add_subcommand("tile", "cut an image into fixed-size tiles");
    tile_cmd->add_option("--input", tile_args.input, "source image (P5/P6)")->required();
    tile_cmd->add_option("--out", tile_args.out, "output directory")->required();
    tile_cmd->add_option("--tile-size", tile_args.tile_size, "tile edge length in pixels");
    tile_cmd->add_option("--overlap", tile_args.overlap, "tile overlap in pixels");

    FemArgs fem_args;
    auto* fem_cmd = app.add_subcommand("fem", "compute enhanced feature channels");
    fem_cmd->add_option("--input", fem_args.input, "source RGB image (P6)")->required();
    fem_cmd->add_option("--out", fem_args.out, "output directory")->required();

    BlocksArgs blocks_args;
    auto* blocks_cmd = app.add_subcommand("blocks", "fusion block operations");
    auto* demo_cmd = blocks_cmd->add_subcommand("demo", "run AMFM + ECA on seeded inputs");
    demo_cmd->add_option("--input", blocks_args.input,
                         "RGB image; its enhanced channels become the second branch");
    demo_cmd->add_option("--seed", blocks_args.seed, "parameter seed");
    demo_cmd->add_option("--params", blocks_args.params_file, "JSON parameter file (flat arrays)");
    demo_cmd->add_option("--c-rgb", blocks_args.c_rgb, "RGB branch channels");
    demo_cmd->add_option("--c-fem", blocks_args.c_fem, "FEM branch channels");
    demo_cmd->add_option("--c-out", blocks_args.c_out, "fused channels");
    demo_cmd->add_option("--height", blocks_args.height, "feature map height");
    demo_cmd->add_option("--width", blocks_args.width, "feature map width");
    demo_cmd->add_option("--out", blocks_args.out, "output directory (optional)");
    blocks_cmd->require_subcommand(1);

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "score detections against ground truth");
    eval_cmd->add_option("--dets", eval_args.dets, "detection CSV")->required();
    eval_cmd->add_option("--gts", eval_args.gts, "annotation CSV");
    eval_cmd->add_option("--voc", eval_args.voc_dir, "directory of Pascal-VOC XML files");
    eval_cmd->add_option("--score-thr", eval_args.score_thr,
                         "drop detections below this score (P/R are threshold-dependent)");
    eval_cmd->add_flag("--per-class", eval_args.per_class, "include the per-class AP table");
    eval_cmd->add_option("--out", eval_args.out, "output directory (optional)");

    DensityArgs density_args;
    auto* density_cmd = app.add_subcommand("density", "KDE density field of infected trees");
    density_cmd->add_option("--input", density_args.input, "detection/annotation CSV")->required();
    density_cmd->add_option("--out", density_args.out, "output directory")->required();
    density_cmd->add_option("--grid-w", density_args.grid_w, "grid width");
    density_cmd->add_option("--grid-h", density_args.grid_h, "grid height");
    density_cmd->add_option("--bandwidth", density_args.bandwidth,
                            "bandwidth in normalized units (default: n^(-1/6) rule)");
    density_cmd->add_flag("--scott", density_args.scott, "scale bandwidth by per-axis std dev");
    density_cmd->add_option("--peaks", density_args.peaks, "number of local maxima to report");
    density_cmd->add_option("--extent", density_args.extent,
                            "plot bounds x_min,y_min,x_max,y_max (default: point bounding box)")
        ->delimiter(',')
        ->expected(4);

    RiskArgs risk_args;
    auto* risk_cmd = app.add_subcommand("risk", "healthy-tree risk scores");
    risk_cmd->add_option("--input", risk_args.input, "detection/annotation CSV")->required();
    risk_cmd->add_option("--out", risk_args.out, "output directory")->required();
    risk_cmd->add_option("--radius", risk_args.radius,
                         "neighborhood radius in normalized units (set from dispersal distance)");
    risk_cmd->add_option("--grid-w", risk_args.grid_w, "grid width");
    risk_cmd->add_option("--grid-h", risk_args.grid_h, "grid height");
    risk_cmd->add_option("--bandwidth", risk_args.bandwidth,
                         "bandwidth in normalized units (default: n^(-1/6) rule)");
    risk_cmd->add_flag("--scott", risk_args.scott, "scale bandwidth by per-axis std dev");
    risk_cmd->add_option("--extent", risk_args.extent,
                         "plot bounds x_min,y_min,x_max,y_max (default: point bounding box)")
        ->delimiter(',')
        ->expected(4);

    ProtectArgs protect_args;
    auto* protect_cmd = app.add_subcommand("protect", "DBSCAN protection areas of healthy trees");
    protect_cmd->add_option("--input", protect_args.input, "detection/annotation CSV")->required();
    protect_cmd->add_option("--out", protect_args.out, "output directory")->required();
    protect_cmd->add_option("--eps", protect_args.eps,
                            "neighborhood radius (default: median 4th-NN distance)");
    protect_cmd->add_option("--min-pts", protect_args.min_pts, "core-point threshold");

    SizeClassArgs size_args;
    auto* size_cmd = app.add_subcommand("sizeclass", "crown-size class statistics");
    size_cmd->add_option("--input", size_args.input, "detection/annotation CSV")->required();
    size_cmd->add_option("--out", size_args.out, "output directory")->required();
    size_cmd->add_flag("--tertiles", size_args.tertiles, "equal-count classes instead of equal-width");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic oracle scene");
    synth_cmd->add_option("--spec", synth_args.spec, "scene spec JSON")->required();
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_flag("--render", synth_args.render_scene, "render the scene raster");
    synth_cmd->add_option("--ppm", synth_args.ppm, "render resolution, pixels per scene unit");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "bundle artifacts into one JSON document");
    report_cmd->add_option("--dir", report_args.dir, "artifact directory")->required();
    report_cmd->add_option("--out", report_args.out, "output directory (optional)");
    report_cmd->add_option("--require", report_args.require,
                           "sections that must be present (metrics, density, risk, "
                           "protection_areas, size_class)")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        if (tile_cmd->parsed()) run_tile(tile_args);
        else if (fem_cmd->parsed()) run_fem(fem_args);
        else if (blocks_cmd->parsed()) run_blocks_demo(blocks_args);
        else if (eval_cmd->parsed()) run_evaluate(eval_args);
        else if (density_cmd->parsed()) run_density(density_args);
        else if (risk_cmd->parsed()) run_risk(risk_args);
        else if (protect_cmd->parsed()) run_protect(protect_args);
        else if (size_cmd->parsed()) run_sizeclass(size_args);
        else if (synth_cmd->parsed()) run_synth(synth_args);
        else if (report_cmd->parsed()) run_report(report_args);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << sub << ": " << msg << "\n";
        return 1;
    }
    return 0;
}
