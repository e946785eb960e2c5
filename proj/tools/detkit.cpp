// detkit: detection geometry and evaluation from the command line.
//
// Exit codes: 0 success, 2 data error, 64 usage error, 65 semantic flag error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "detkit/detkit.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitUsage = 64;
constexpr int kExitSemantic = 65;

// Raised for flag combinations that parse but make no sense.
class SemanticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalArgs {
  std::string gt;
  std::string dets;
  std::string metric = "all";
  double iou = 0.5;
  std::string format = "tsv";
  std::size_t jobs = 1;
};

struct AnchorArgs {
  std::string boxes;
  std::size_t k = 9;
  std::size_t scales = 3;
  std::size_t iters = 100;
  std::uint64_t seed = 0;
  std::string distance = "iou";
};

struct LayoutArgs {
  int grid = 0;
  int anchors = 0;
  int classes = 0;
  std::string at;
};

struct NmsArgs {
  std::string dets;
  std::string gt;
  double iou = 0.45;
  std::string format = "json";
};

struct PlotArgs {
  std::string table;
  std::string x = "time_ms";
  std::string y = "metric";
};

struct DemoArgs {
  std::string name;
  std::string write_fixture;
};

int run_eval(const EvalArgs& a) {
  const auto gts = detkit::io::load_dataset(a.gt);
  const auto dets = detkit::io::load_results(a.dets, gts);
  detkit::EvalOptions opts;
  opts.iou_threshold = a.iou;
  opts.jobs = a.jobs;
  const auto report = detkit::evaluate(dets, gts, opts);
  const auto sel = *detkit::io::parse_metric_selection(a.metric);
  const auto fmt = a.format == "json" ? detkit::io::ReportFormat::kJson
                                      : detkit::io::ReportFormat::kTsv;
  std::cout << detkit::io::format_report(report, sel, fmt);
  return kExitOk;
}

int run_anchors(const AnchorArgs& a) {
  if (a.k % a.scales != 0) {
    throw SemanticError("--k " + std::to_string(a.k) +
                        " is not divisible by --scales " +
                        std::to_string(a.scales));
  }
  const auto samples = detkit::io::parse_dimension_samples(
      detkit::io::read_text(a.boxes), a.boxes);
  const auto kind = a.distance == "euclidean"
                        ? detkit::ClusterDistance::kSquaredEuclidean
                        : detkit::ClusterDistance::kIou;
  const auto result = detkit::kmeans_anchors(samples, a.k, a.iters, a.seed, kind);
  const auto groups = detkit::split_scales(result.centroids, a.scales);
  std::string out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) out += "\n";
    for (const auto& p : groups[g]) {
      out += detkit::io::fixed6(p.pw) + " " + detkit::io::fixed6(p.ph) + "\n";
    }
  }
  std::cout << out;
  return kExitOk;
}

std::optional<detkit::TensorPosition> parse_position(const std::string& s) {
  std::vector<std::size_t> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() ||
        item.find_first_not_of("0123456789") != std::string::npos ||
        item.size() > 18) {
      return std::nullopt;
    }
    parts.push_back(std::stoull(item));
  }
  if (parts.size() != 4 || s.back() == ',') return std::nullopt;
  return detkit::TensorPosition{parts[0], parts[1], parts[2], parts[3]};
}

int run_layout(const LayoutArgs& a) {
  const auto spec = detkit::GridSpec::make(a.grid, a.anchors, a.classes);
  if (a.at.empty()) {
    std::cout << "depth\t" << spec.cell_depth() << "\n"
              << "total\t" << spec.element_count() << "\n";
    return kExitOk;
  }
  const auto pos = parse_position(a.at);
  if (!pos) {
    throw CLI::ValidationError("--at", "expected row,col,anchor,channel");
  }
  std::cout << detkit::tensor_index(spec, *pos) << "\n";
  return kExitOk;
}

int run_nms(const NmsArgs& a) {
  const auto gts = detkit::io::load_dataset(a.gt);
  const auto dets = detkit::io::load_results(a.dets, gts);
  detkit::DetectionResultSet kept;
  for (const auto& im : gts.images()) {
    std::vector<detkit::ScoredBox> boxes;
    for (const auto& d : dets.items()) {
      if (d.image_id == im.id) boxes.push_back(d.det);
    }
    for (const auto& b : detkit::nms(boxes, a.iou)) kept.add(im.id, b);
  }
  std::cout << detkit::io::dump_results(kept);
  return kExitOk;
}

int run_plotdata(const PlotArgs& a) {
  const auto rows =
      detkit::io::parse_speed_table(detkit::io::read_text(a.table), a.table);
  std::cout << detkit::io::plot_data(rows, a.x, a.y);
  return kExitOk;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw detkit::ParseError(p.string() + ": cannot write file");
  out << text;
}

int run_demo(const DemoArgs& a) {
  const auto demo = detkit::demo_map_pathology();
  if (!a.write_fixture.empty()) {
    const std::filesystem::path dir(a.write_fixture);
    std::filesystem::create_directories(dir);
    write_file(dir / "gt.json", detkit::io::dump_dataset(demo.ground_truth));
    write_file(dir / "dets_a.json",
               detkit::io::dump_results(demo.detector_a));
    write_file(dir / "dets_b.json",
               detkit::io::dump_results(demo.detector_b));
  }
  const auto cell = [](const std::optional<double>& v) {
    return v ? detkit::io::fixed6(*v) : std::string("NA");
  };
  const auto& ra = demo.report_a;
  const auto& rb = demo.report_b;
  std::cout << "metric\tdetector_A\tdetector_B\n"
            << "voc50\t" << cell(ra.voc50) << "\t" << cell(rb.voc50) << "\n"
            << "global\t" << cell(ra.global_ap) << "\t" << cell(rb.global_ap)
            << "\n"
            << "per_image\t" << cell(ra.per_image_ap) << "\t"
            << cell(rb.per_image_ap) << "\n"
            << "Per-class mAP rates both detectors perfect; pooling classes "
               "exposes B's confident misclassifications.\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection geometry, anchor clustering and evaluation",
               "detkit"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate detections");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth dataset")->required();
  eval_cmd->add_option("--dets", eval.dets, "Detection results")->required();
  eval_cmd->add_option("--metric", eval.metric)
      ->check(CLI::IsMember({"voc50", "coco", "global", "per-image", "all"}));
  eval_cmd->add_option("--iou", eval.iou, "IOU for global/per-image AP")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--format", eval.format)
      ->check(CLI::IsMember({"tsv", "json"}));
  eval_cmd->add_option("--jobs", eval.jobs, "Evaluation threads")
      ->check(CLI::PositiveNumber);

  AnchorArgs anchors;
  auto* anchors_cmd =
      app.add_subcommand("anchors", "Cluster box sizes into anchor priors");
  anchors_cmd->add_option("--boxes", anchors.boxes, "width height per line")
      ->required();
  anchors_cmd->add_option("--k", anchors.k)->required()->check(
      CLI::PositiveNumber);
  anchors_cmd->add_option("--scales", anchors.scales)->required()->check(
      CLI::PositiveNumber);
  anchors_cmd->add_option("--iters", anchors.iters)->check(CLI::PositiveNumber);
  anchors_cmd->add_option("--seed", anchors.seed);
  anchors_cmd->add_option("--distance", anchors.distance)
      ->check(CLI::IsMember({"iou", "euclidean"}));

  LayoutArgs layout;
  auto* layout_cmd =
      app.add_subcommand("layout", "Prediction tensor size and offsets");
  layout_cmd->add_option("--grid", layout.grid)->required()->check(
      CLI::PositiveNumber);
  layout_cmd->add_option("--anchors", layout.anchors)->required()->check(
      CLI::PositiveNumber);
  layout_cmd->add_option("--classes", layout.classes)->required()->check(
      CLI::PositiveNumber);
  layout_cmd->add_option("--at", layout.at, "row,col,anchor,channel");

  NmsArgs nms;
  auto* nms_cmd = app.add_subcommand("nms", "Per-class non-maximum suppression");
  nms_cmd->add_option("--dets", nms.dets)->required();
  nms_cmd->add_option("--gt", nms.gt, "Dataset providing the image registry")
      ->required();
  nms_cmd->add_option("--iou", nms.iou)->check(CLI::Range(0.0, 1.0));
  nms_cmd->add_option("--format", nms.format)->check(CLI::IsMember({"json"}));

  PlotArgs plot;
  auto* plot_cmd =
      app.add_subcommand("plotdata", "Speed/accuracy pairs for plotting");
  plot_cmd->add_option("--table", plot.table)->required();
  plot_cmd->add_option("--x", plot.x)->check(
      CLI::IsMember({"time_ms", "metric"}));
  plot_cmd->add_option("--y", plot.y)->check(
      CLI::IsMember({"time_ms", "metric"}));

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("demo", "Built-in demonstrations");
  demo_cmd->add_option("name", demo.name)->required()->check(
      CLI::IsMember({"map-pathology"}));
  demo_cmd->add_option("--write-fixture", demo.write_fixture,
                       "Also write the fixture files into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "detkit: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*eval_cmd) return run_eval(eval);
    if (*anchors_cmd) return run_anchors(anchors);
    if (*layout_cmd) return run_layout(layout);
    if (*nms_cmd) return run_nms(nms);
    if (*plot_cmd) return run_plotdata(plot);
    if (*demo_cmd) return run_demo(demo);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "detkit: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SemanticError& e) {
    std::cerr << "detkit: " << e.what() << "\n";
    return kExitSemantic;
  } catch (const detkit::Error& e) {
    std::cerr << "detkit: " << e.kind() << ": " << e.what() << "\n";
    const bool data = e.kind() == "ParseError" ||
                      e.kind() == "ValidationError" ||
                      e.kind() == "UnknownImage" || e.kind() == "InvalidBox";
    return data ? kExitData : kExitSemantic;
  }
  return kExitUsage;
}
