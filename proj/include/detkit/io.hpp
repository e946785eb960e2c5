#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "detkit/anchors.hpp"
#include "detkit/error.hpp"
#include "detkit/geometry.hpp"
#include "detkit/metrics.hpp"
#include "json.hpp"

namespace detkit::io {

using nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << " (offset " << offset
       << "): malformed JSON";
    throw ParseError(os.str());
  }
}

inline const json& field(const json& obj, const char* key,
                         const std::string& who) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(who + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

template <typename T>
T integer_field(const json& obj, const char* key, const std::string& who) {
  const json& v = field(obj, key, who);
  if (!v.is_number_integer()) {
    throw ValidationError(who + ": field '" + key + "' must be an integer");
  }
  return v.get<T>();
}

inline double number_field(const json& obj, const char* key,
                           const std::string& who) {
  const json& v = field(obj, key, who);
  if (!v.is_number()) {
    throw ValidationError(who + ": field '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline Box bbox_field(const json& obj, const std::string& who) {
  const json& v = field(obj, "bbox", who);
  if (!v.is_array() || v.size() != 4 ||
      !std::all_of(v.begin(), v.end(),
                   [](const json& x) { return x.is_number(); })) {
    throw ValidationError(who + ": bbox must be [left, top, width, height]");
  }
  try {
    return Box::from_ltwh(v[0].get<double>(), v[1].get<double>(),
                          v[2].get<double>(), v[3].get<double>());
  } catch (const InvalidBox& e) {
    throw ValidationError(who + ": " + e.what());
  }
}

inline const json& array_field(const json& root, const char* key,
                               const std::string& source) {
  const json& v = field(root, key, source);
  if (!v.is_array()) {
    throw ValidationError(source + ": '" + key + "' must be an array");
  }
  return v;
}

}  // namespace detail

/// Parses a COCO-style dataset document (images, annotations, categories).
/// Boxes arrive as [left, top, width, height] and are stored center-form.
inline GroundTruthSet parse_dataset(std::string_view text,
                                    const std::string& source = "<dataset>") {
  const json root = detail::parse_json(text, source);
  if (!root.is_object()) {
    throw ValidationError(source + ": dataset must be a JSON object");
  }
  GroundTruthSet gts;
  for (const json& c : detail::array_field(root, "categories", source)) {
    const std::string who = "category";
    const int id = detail::integer_field<int>(c, "id", who);
    const json& name = detail::field(c, "name", "category " + std::to_string(id));
    if (!name.is_string()) {
      throw ValidationError("category " + std::to_string(id) +
                            ": name must be a string");
    }
    try {
      gts.add_category(id, name.get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ValidationError("category " + std::to_string(id) + ": " +
                            e.what());
    }
  }
  for (const json& im : detail::array_field(root, "images", source)) {
    const auto id = detail::integer_field<ImageId>(im, "id", "image");
    const std::string who = "image " + std::to_string(id);
    const int w = detail::integer_field<int>(im, "width", who);
    const int h = detail::integer_field<int>(im, "height", who);
    if (w <= 0 || h <= 0) {
      throw ValidationError(who + ": width and height must be positive");
    }
    try {
      gts.add_image({id, w, h});
    } catch (const InvalidArgument& e) {
      throw ValidationError(who + ": " + e.what());
    }
  }
  for (const json& a : detail::array_field(root, "annotations", source)) {
    const auto id = detail::integer_field<std::int64_t>(a, "id", "annotation");
    const std::string who = "annotation " + std::to_string(id);
    if (a.contains("iscrowd")) {
      const json& crowd = a.at("iscrowd");
      const bool is_crowd = crowd.is_boolean() ? crowd.get<bool>()
                            : crowd.is_number() ? crowd.get<double>() != 0.0
                                                : true;
      if (is_crowd) {
        throw ValidationError(who + ": crowd regions unsupported");
      }
    }
    const auto image_id = detail::integer_field<ImageId>(a, "image_id", who);
    const int category_id = detail::integer_field<int>(a, "category_id", who);
    if (!gts.has_image(image_id)) {
      throw ValidationError(who + ": image_id " + std::to_string(image_id) +
                            " not found");
    }
    if (!gts.has_category(category_id)) {
      throw ValidationError(who + ": category_id " +
                            std::to_string(category_id) + " not found");
    }
    gts.add(image_id, {detail::bbox_field(a, who), category_id});
  }
  return gts;
}

inline GroundTruthSet load_dataset(const std::string& path) {
  return parse_dataset(read_text(path), path);
}

/// Parses a COCO-style results array; image and category ids must resolve
/// against `registry`. Records are named by their zero-based position.
inline DetectionResultSet parse_results(std::string_view text,
                                        const GroundTruthSet& registry,
                                        const std::string& source =
                                            "<results>") {
  const json root = detail::parse_json(text, source);
  if (!root.is_array()) {
    throw ValidationError(source + ": results must be a JSON array");
  }
  DetectionResultSet out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& r = root[i];
    const std::string who = "result " + std::to_string(i);
    const auto image_id = detail::integer_field<ImageId>(r, "image_id", who);
    const int category_id = detail::integer_field<int>(r, "category_id", who);
    const double score = detail::number_field(r, "score", who);
    if (!registry.has_image(image_id)) {
      throw ValidationError(who + ": image_id " + std::to_string(image_id) +
                            " not found");
    }
    if (!registry.has_category(category_id)) {
      throw ValidationError(who + ": category_id " +
                            std::to_string(category_id) + " not found");
    }
    if (!(score >= 0.0 && score <= 1.0)) {
      std::ostringstream os;
      os << who << ": score " << score << " outside [0, 1]";
      throw ValidationError(os.str());
    }
    out.add(image_id,
            ScoredBox{detail::bbox_field(r, who), score, category_id});
  }
  return out;
}

inline DetectionResultSet load_results(const std::string& path,
                                       const GroundTruthSet& registry) {
  return parse_results(read_text(path), registry, path);
}

inline json results_json(const DetectionResultSet& dets) {
  json arr = json::array();
  for (const auto& d : dets.items()) {
    const Box& b = d.det.box;
    arr.push_back({{"image_id", d.image_id},
                   {"category_id", d.det.class_id},
                   {"bbox", {b.left(), b.top(), b.width(), b.height()}},
                   {"score", d.det.score}});
  }
  return arr;
}

/// One record per line inside a JSON array; doubles use the shortest
/// representation that round-trips.
inline std::string dump_results(const DetectionResultSet& dets) {
  const json arr = results_json(dets);
  std::string out = "[";
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out += i == 0 ? "\n  " : ",\n  ";
    out += arr[i].dump();
  }
  out += arr.empty() ? "]\n" : "\n]\n";
  return out;
}

/// Serializes a ground-truth set in the dataset document shape. Annotation
/// ids are assigned 1, 2, ... in image order.
inline std::string dump_dataset(const GroundTruthSet& gts) {
  json images = json::array(), annotations = json::array(),
       categories = json::array();
  for (const auto& c : gts.categories()) {
    categories.push_back({{"id", c.id}, {"name", c.name}});
  }
  std::int64_t next_id = 1;
  for (std::size_t i = 0; i < gts.images().size(); ++i) {
    const ImageInfo& im = gts.images()[i];
    images.push_back(
        {{"id", im.id}, {"width", im.width}, {"height", im.height}});
    for (const GroundTruth& g : gts.at_index(i)) {
      const Box& b = g.box;
      annotations.push_back(
          {{"id", next_id++},
           {"image_id", im.id},
           {"category_id", g.class_id},
           {"bbox", {b.left(), b.top(), b.width(), b.height()}}});
    }
  }
  const json doc = {{"images", images},
                    {"annotations", annotations},
                    {"categories", categories}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Metric reports
// ---------------------------------------------------------------------------

enum class MetricSelection { kVoc50, kCoco, kGlobal, kPerImage, kAll };
enum class ReportFormat { kTsv, kJson };

inline std::optional<MetricSelection> parse_metric_selection(
    std::string_view s) {
  if (s == "voc50") return MetricSelection::kVoc50;
  if (s == "coco") return MetricSelection::kCoco;
  if (s == "global") return MetricSelection::kGlobal;
  if (s == "per-image") return MetricSelection::kPerImage;
  if (s == "all") return MetricSelection::kAll;
  return std::nullopt;
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::vector<std::pair<std::string, std::optional<double>>>
report_fields(const MetricReport& r, MetricSelection sel) {
  std::vector<std::pair<std::string, std::optional<double>>> f;
  const bool all = sel == MetricSelection::kAll;
  if (all || sel == MetricSelection::kVoc50) f.emplace_back("voc50", r.voc50);
  if (all || sel == MetricSelection::kCoco) {
    f.emplace_back("AP", r.ap);
    f.emplace_back("AP50", r.ap50);
    f.emplace_back("AP75", r.ap75);
    f.emplace_back("AP_S", r.ap_small);
    f.emplace_back("AP_M", r.ap_medium);
    f.emplace_back("AP_L", r.ap_large);
  }
  if (all || sel == MetricSelection::kGlobal) {
    f.emplace_back("global", r.global_ap);
  }
  if (all || sel == MetricSelection::kPerImage) {
    f.emplace_back("per_image", r.per_image_ap);
  }
  return f;
}

/// TSV: a header row and a value row, 6 decimals, "NA" for absent values.
/// JSON: a single object, full precision, null for absent values; `all`
/// adds the per-class breakdown.
inline std::string format_report(const MetricReport& r, MetricSelection sel,
                                 ReportFormat fmt) {
  const auto fields = report_fields(r, sel);
  if (fmt == ReportFormat::kTsv) {
    std::string head, row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) {
        head += '\t';
        row += '\t';
      }
      head += fields[i].first;
      row += fields[i].second ? fixed6(*fields[i].second) : "NA";
    }
    return head + "\n" + row + "\n";
  }
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json obj = json::object();
  for (const auto& [k, v] : fields) obj[k] = opt(v);
  if (sel == MetricSelection::kAll) {
    json pc = json::array();
    for (const auto& c : r.per_class) {
      pc.push_back(
          {{"category_id", c.class_id}, {"AP50", opt(c.ap50)}, {"AP", opt(c.ap)}});
    }
    obj["per_class"] = pc;
  }
  return obj.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Plain-text inputs
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// One `width height` pair per line; blank lines and `#` comments skipped.
inline std::vector<DimensionSample> parse_dimension_samples(
    std::string_view text, const std::string& source = "<boxes>") {
  std::vector<DimensionSample> out;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string ws, hs, extra;
    ss >> ws >> hs;
    const auto w = detail::parse_double(ws);
    const auto h = detail::parse_double(hs);
    if (!w || !h || (ss >> extra) || !(*w > 0.0) || !(*h > 0.0)) {
      throw ParseError(source + ":" + std::to_string(i + 1) +
                       ": expected two positive numbers 'width height'");
    }
    out.push_back({*w, *h});
  }
  return out;
}

struct SpeedAccuracyRow {
  std::string method;
  // Original text of each numeric cell, re-emitted verbatim.
  std::string time_text;
  std::string metric_text;
  double time_ms = 0.0;
  double metric = 0.0;
};

inline constexpr std::string_view kSpeedTableHeader = "method\ttime_ms\tmetric";

/// TSV table with header `method<TAB>time_ms<TAB>metric`; time must be
/// positive and the metric a percentage in [0, 100].
inline std::vector<SpeedAccuracyRow> parse_speed_table(
    std::string_view text, const std::string& source = "<table>") {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != kSpeedTableHeader) {
    throw ParseError(source + ":1: expected header 'method<TAB>time_ms<TAB>metric'");
  }
  std::vector<SpeedAccuracyRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto where = source + ":" + std::to_string(i + 1) + ": ";
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = lines[i].find('\t', start);
      cells.push_back(lines[i].substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cells.size() != 3 || cells[0].empty()) {
      throw ParseError(where + "expected 3 tab-separated cells");
    }
    const auto t = detail::parse_double(cells[1]);
    const auto m = detail::parse_double(cells[2]);
    if (!t || !(*t > 0.0)) throw ParseError(where + "time_ms must be > 0");
    if (!m || *m < 0.0 || *m > 100.0) {
      throw ParseError(where + "metric must lie in [0, 100]");
    }
    rows.push_back({cells[0], cells[1], cells[2], *t, *m});
  }
  return rows;
}

/// Rows sorted by time ascending (stable), as `method<TAB>x<TAB>y`, with a
/// header line when any rows exist. Numeric cells are copied verbatim.
inline std::string plot_data(std::vector<SpeedAccuracyRow> rows,
                             std::string_view x_column,
                             std::string_view y_column) {
  const auto pick = [](const SpeedAccuracyRow& r, std::string_view col) {
    return col == "time_ms" ? r.time_text : r.metric_text;
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SpeedAccuracyRow& a, const SpeedAccuracyRow& b) {
                     return a.time_ms < b.time_ms;
                   });
  if (rows.empty()) return {};
  std::string out = "method\t" + std::string(x_column) + "\t" +
                    std::string(y_column) + "\n";
  for (const auto& r : rows) {
    out += r.method + "\t" + pick(r, x_column) + "\t" + pick(r, y_column) +
           "\n";
  }
  return out;
}

}  // namespace detkit::io
