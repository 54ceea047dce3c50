#pragma once

// Data model for tree detections and ground-truth annotations, plus the
// ingestion paths shared by evaluation and situation analysis: Pascal-VOC
// XML (as emitted by LabelImg) and a flat CSV interchange format.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace infestscope {

/// Axis-aligned box with continuous edges (area = width * height, no +1),
/// image coordinates with y pointing down.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    bool valid() const { return x_min < x_max && y_min < y_max; }
    double area() const { return (x_max - x_min) * (y_max - y_min); }
};

enum class TreeClass { Infected, Healthy };

inline const char* to_string(TreeClass c) {
    return c == TreeClass::Infected ? "infected" : "healthy";
}

/// Maps an annotation label onto a tree class. Synonyms are matched
/// case-insensitively; unknown labels yield nullopt.
inline std::optional<TreeClass> tree_class_from_label(std::string_view label) {
    std::string s(label);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (s == "infected" || s == "dead" || s == "disease") return TreeClass::Infected;
    if (s == "healthy" || s == "normal") return TreeClass::Healthy;
    return std::nullopt;
}

struct Detection {
    std::string image_id;
    Box box;
    TreeClass cls = TreeClass::Infected;
    double score = 0.0;  // in [0,1]
};

struct Annotation {
    std::string image_id;
    Box box;
    TreeClass cls = TreeClass::Infected;
};

/// Point abstraction used by the situation analytics: box center plus the
/// box pixel area as a crown-size proxy.
struct TreePoint {
    double x = 0.0;
    double y = 0.0;
    TreeClass cls = TreeClass::Infected;
    double area = 0.0;
};

/// Intersection over union of two boxes; 0 for disjoint boxes.
inline double iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

inline std::vector<TreePoint> to_points(const std::vector<Annotation>& items) {
    std::vector<TreePoint> out;
    out.reserve(items.size());
    for (const auto& a : items)
        out.push_back({(a.box.x_min + a.box.x_max) / 2.0, (a.box.y_min + a.box.y_max) / 2.0,
                       a.cls, a.box.area()});
    return out;
}

inline std::vector<TreePoint> to_points(const std::vector<Detection>& items) {
    std::vector<TreePoint> out;
    out.reserve(items.size());
    for (const auto& d : items)
        out.push_back({(d.box.x_min + d.box.x_max) / 2.0, (d.box.y_min + d.box.y_max) / 2.0,
                       d.cls, d.box.area()});
    return out;
}

// ============================================================================
// Pascal-VOC XML ingestion
// ============================================================================

namespace detail {

inline int line_of(const std::string& text, std::size_t pos) {
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

/// Finds the body of the next <tag>...</tag> element at or after `from`.
/// Returns the body and positions, or nullopt when the tag does not occur.
struct TagBody {
    std::string body;
    std::size_t open_pos = 0;
    std::size_t end_pos = 0;  // past the closing tag
};

inline std::optional<TagBody> next_tag(const std::string& text, const std::string& tag,
                                       std::size_t from, const std::string& file) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const std::size_t o = text.find(open, from);
    if (o == std::string::npos) return std::nullopt;
    const std::size_t b = o + open.size();
    const std::size_t c = text.find(close, b);
    if (c == std::string::npos)
        throw std::runtime_error(file + ":" + std::to_string(line_of(text, o)) +
                                 ": malformed XML, unclosed <" + tag + ">");
    return TagBody{text.substr(b, c - b), o, c + close.size()};
}

inline std::string trim(const std::string& s) {
    const auto l = s.find_first_not_of(" \t\r\n");
    if (l == std::string::npos) return {};
    const auto r = s.find_last_not_of(" \t\r\n");
    return s.substr(l, r - l + 1);
}

inline double parse_number(const std::string& raw, const std::string& context) {
    const std::string s = trim(raw);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": not a number: '" + s + "'");
    }
    if (used != s.size())
        throw std::runtime_error(context + ": not a number: '" + s + "'");
    return v;
}

}  // namespace detail

/// Parses one LabelImg-style annotation XML file. Object names are mapped
/// through the class-synonym table; unknown names are an error that reports
/// the offending label and line.
inline std::vector<Annotation> load_voc_xml(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open annotation file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::string file = path.string();

    if (text.find("<annotation") == std::string::npos)
        throw std::runtime_error(file + ": malformed XML, missing <annotation> root");

    std::string image_id = path.stem().string();
    if (auto fn = detail::next_tag(text, "filename", 0, file))
        image_id = std::filesystem::path(detail::trim(fn->body)).stem().string();

    std::vector<Annotation> out;
    std::size_t cursor = 0;
    while (auto obj = detail::next_tag(text, "object", cursor, file)) {
        cursor = obj->end_pos;
        const int obj_line = detail::line_of(text, obj->open_pos);
        const std::string where = file + ":" + std::to_string(obj_line);

        auto name = detail::next_tag(obj->body, "name", 0, file);
        if (!name) throw std::runtime_error(where + ": <object> without <name>");
        const std::string label = detail::trim(name->body);
        const auto cls = tree_class_from_label(label);
        if (!cls)
            throw std::runtime_error(where + ": unknown class label '" + label + "'");

        auto bnd = detail::next_tag(obj->body, "bndbox", 0, file);
        if (!bnd) throw std::runtime_error(where + ": <object> without <bndbox>");
        Box box;
        for (auto [tag, field] : {std::pair{"xmin", &box.x_min}, std::pair{"ymin", &box.y_min},
                                  std::pair{"xmax", &box.x_max}, std::pair{"ymax", &box.y_max}}) {
            auto t = detail::next_tag(bnd->body, tag, 0, file);
            if (!t) throw std::runtime_error(where + ": <bndbox> missing <" + tag + ">");
            *field = detail::parse_number(t->body, where + " <" + tag + ">");
        }
        if (!box.valid())
            throw std::runtime_error(where + ": inverted or empty box");
        out.push_back({image_id, box, *cls});
    }
    return out;
}

// ============================================================================
// CSV interchange
// ============================================================================
// Detections: image_id,class,score,x_min,y_min,x_max,y_max
// Annotations: image_id,class,x_min,y_min,x_max,y_max
// UTF-8, comma separated, header row mandatory.

inline constexpr const char* kDetectionCsvHeader = "image_id,class,score,x_min,y_min,x_max,y_max";
inline constexpr const char* kAnnotationCsvHeader = "image_id,class,x_min,y_min,x_max,y_max";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

struct CsvRecord {
    std::string image_id;
    TreeClass cls;
    double score;  // unused for annotations
    Box box;
};

inline std::vector<CsvRecord> load_csv_records(const std::filesystem::path& path, bool with_scores) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
    const std::string file = path.string();
    const char* expected_header = with_scores ? kDetectionCsvHeader : kAnnotationCsvHeader;
    const std::size_t n_cols = with_scores ? 7 : 6;

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(file + ": empty file, header row is mandatory");
    {
        auto fields = split_csv_line(line);
        std::string joined;
        for (std::size_t i = 0; i < fields.size(); ++i)
            joined += (i ? "," : "") + trim(fields[i]);
        if (joined != expected_header)
            throw std::runtime_error(file + ":1: header must be '" + expected_header + "'");
    }

    std::vector<CsvRecord> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string where = file + ":" + std::to_string(line_no);
        if (fields.size() != n_cols)
            throw std::runtime_error(where + ": expected " + std::to_string(n_cols) +
                                     " fields, got " + std::to_string(fields.size()));
        CsvRecord rec;
        std::size_t i = 0;
        rec.image_id = trim(fields[i++]);
        const std::string label = trim(fields[i++]);
        const auto cls = tree_class_from_label(label);
        if (!cls) throw std::runtime_error(where + ": unknown class label '" + label + "'");
        rec.cls = *cls;
        if (with_scores) {
            rec.score = parse_number(fields[i++], where + " score");
            if (rec.score < 0.0 || rec.score > 1.0)
                throw std::runtime_error(where + ": score outside [0,1]");
        }
        rec.box.x_min = parse_number(fields[i++], where + " x_min");
        rec.box.y_min = parse_number(fields[i++], where + " y_min");
        rec.box.x_max = parse_number(fields[i++], where + " x_max");
        rec.box.y_max = parse_number(fields[i++], where + " y_max");
        if (!rec.box.valid())
            throw std::runtime_error(where + ": inverted or empty box");
        out.push_back(std::move(rec));
    }
    return out;
}

/// Shortest decimal form that round-trips the exact double.
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = 0.0;
    for (int prec = 1; prec <= 16; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof probe, "%.*g", prec, v);
        std::sscanf(probe, "%lf", &back);
        if (back == v) return probe;
    }
    return buf;
}

}  // namespace detail

inline std::vector<Detection> load_detections_csv(const std::filesystem::path& path) {
    std::vector<Detection> out;
    for (auto& r : detail::load_csv_records(path, true))
        out.push_back({std::move(r.image_id), r.box, r.cls, r.score});
    return out;
}

inline std::vector<Annotation> load_annotations_csv(const std::filesystem::path& path) {
    std::vector<Annotation> out;
    for (auto& r : detail::load_csv_records(path, false))
        out.push_back({std::move(r.image_id), r.box, r.cls});
    return out;
}

inline void save_detections_csv(const std::vector<Detection>& dets,
                                const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << kDetectionCsvHeader << "\n";
    for (const auto& d : dets) {
        out << d.image_id << ',' << to_string(d.cls) << ',' << detail::format_full(d.score) << ','
            << detail::format_full(d.box.x_min) << ',' << detail::format_full(d.box.y_min) << ','
            << detail::format_full(d.box.x_max) << ',' << detail::format_full(d.box.y_max) << "\n";
    }
    if (!out) throw std::runtime_error("failed writing CSV file: " + path.string());
}

inline void save_annotations_csv(const std::vector<Annotation>& anns,
                                 const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << kAnnotationCsvHeader << "\n";
    for (const auto& a : anns) {
        out << a.image_id << ',' << to_string(a.cls) << ','
            << detail::format_full(a.box.x_min) << ',' << detail::format_full(a.box.y_min) << ','
            << detail::format_full(a.box.x_max) << ',' << detail::format_full(a.box.y_max) << "\n";
    }
    if (!out) throw std::runtime_error("failed writing CSV file: " + path.string());
}

}  // namespace infestscope
