#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace cli {

inline const std::string kBin = DETKIT_BIN;
inline const std::string kData = DETKIT_DATA_DIR;
inline const std::string kGolden = DETKIT_GOLDEN_DIR;

struct Run {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with `args` (already shell-quoted where needed); stderr is
// discarded.
inline Run run(const std::string& args) {
  const std::string cmd = "'" + kBin + "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data(const std::string& rel) { return kData + "/" + rel; }

struct GoldenCase {
  const char* golden;
  std::string args;
};

inline std::vector<GoldenCase> golden_cases() {
  const auto d = data;
  return {
      {"eval_single_voc50.tsv",
       "eval --gt " + d("eval/single_gt.json") + " --dets " +
           d("eval/single_perfect.json") + " --metric voc50"},
      {"eval_half_coco.tsv", "eval --gt " + d("eval/half_gt.json") +
                                 " --dets " + d("eval/half_dets.json") +
                                 " --metric coco"},
      {"eval_mixed_all.tsv", "eval --gt " + d("eval/mixed_gt.json") +
                                 " --dets " + d("eval/mixed_dets.json")},
      {"eval_mixed_all.json", "eval --gt " + d("eval/mixed_gt.json") +
                                  " --dets " + d("eval/mixed_dets.json") +
                                  " --format json"},
      {"eval_pathology_a.tsv", "eval --gt " + d("pathology/gt.json") +
                                   " --dets " + d("pathology/dets_a.json") +
                                   " --metric all"},
      {"eval_pathology_b.tsv", "eval --gt " + d("pathology/gt.json") +
                                   " --dets " + d("pathology/dets_b.json") +
                                   " --metric all"},
      {"nms_single.json", "nms --dets " + d("nms/single.json") + " --gt " +
                              d("nms/registry.json") +
                              " --iou 0.45 --format json"},
      {"nms_duplicate.json", "nms --dets " + d("nms/duplicate.json") +
                                 " --gt " + d("nms/registry.json") +
                                 " --iou 0.45 --format json"},
      {"nms_chain.json", "nms --dets " + d("nms/chain.json") + " --gt " +
                             d("nms/registry.json") +
                             " --iou 0.45 --format json"},
      {"anchors_coco.txt",
       "anchors --boxes " + d("anchors/coco_anchors.txt") + " --k 9 --scales 3"},
      {"anchors_two_clusters.txt", "anchors --boxes " +
                                       d("anchors/two_clusters.txt") +
                                       " --k 2 --scales 1 --seed 0"},
      {"anchors_two_clusters_k6.txt", "anchors --boxes " +
                                          d("anchors/two_clusters.txt") +
                                          " --k 6 --scales 3 --seed 7"},
      {"anchors_k1.txt", "anchors --boxes " + d("anchors/two_clusters.txt") +
                             " --k 1 --scales 1"},
      {"layout_13_3_80.txt", "layout --grid 13 --anchors 3 --classes 80"},
      {"layout_1_1_1.txt", "layout --grid 1 --anchors 1 --classes 1"},
      {"layout_at.txt", "layout --grid 13 --anchors 3 --classes 80 --at 1,2,1,7"},
      {"plot_ap50.tsv", "plotdata --table " + d("speed/ap50.tsv")},
      {"plot_coco_ap.tsv", "plotdata --table " + d("speed/coco_ap.tsv")},
      {"plot_ap50_swapped.tsv",
       "plotdata --table " + d("speed/ap50.tsv") + " --x metric --y time_ms"},
      {"plot_empty.tsv", "plotdata --table " + d("speed/empty.tsv")},
      {"demo_map_pathology.txt", "demo map-pathology"},
  };
}

}  // namespace cli
