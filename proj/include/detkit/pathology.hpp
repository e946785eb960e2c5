#pragma once

#include "detkit/metrics.hpp"

namespace detkit {

// Two images, three classes. Detector A finds every object with high,
// class-consistent scores. Detector B finds the same objects but mixes in
// low-scoring spurious and misclassified boxes, and orders scores so that a
// confident mistake in one class outranks a correct box of another. Within
// each class every true positive of B still outranks every false positive,
// so per-class AP cannot tell the two detectors apart.
struct MapPathology {
  GroundTruthSet ground_truth;
  DetectionResultSet detector_a;
  DetectionResultSet detector_b;
  MetricReport report_a;
  MetricReport report_b;
};

namespace pathology {

inline constexpr int kPerson = 0;
inline constexpr int kDog = 1;
inline constexpr int kHorse = 2;

inline GroundTruthSet ground_truth() {
  GroundTruthSet gts;
  gts.add_category(kPerson, "person");
  gts.add_category(kDog, "dog");
  gts.add_category(kHorse, "horse");
  gts.add_image({1, 640, 480});
  gts.add_image({2, 640, 480});
  gts.add(1, {Box::from_ltwh(100, 100, 50, 150), kPerson});
  gts.add(1, {Box::from_ltwh(300, 250, 120, 80), kDog});
  gts.add(2, {Box::from_ltwh(200, 80, 60, 180), kPerson});
  gts.add(2, {Box::from_ltwh(350, 200, 200, 150), kHorse});
  return gts;
}

inline DetectionResultSet detector_a() {
  DetectionResultSet d;
  d.add(1, ScoredBox::make(Box::from_ltwh(100, 100, 50, 150), 0.99, kPerson));
  d.add(1, ScoredBox::make(Box::from_ltwh(300, 250, 120, 80), 0.98, kDog));
  d.add(2, ScoredBox::make(Box::from_ltwh(200, 80, 60, 180), 0.97, kPerson));
  d.add(2, ScoredBox::make(Box::from_ltwh(350, 200, 200, 150), 0.96, kHorse));
  return d;
}

inline DetectionResultSet detector_b() {
  DetectionResultSet d;
  d.add(1, ScoredBox::make(Box::from_ltwh(100, 100, 50, 150), 0.90, kPerson));
  d.add(1, ScoredBox::make(Box::from_ltwh(300, 250, 120, 80), 0.30, kDog));
  // The dog, called a horse, outranks the real dog.
  d.add(1, ScoredBox::make(Box::from_ltwh(300, 250, 120, 80), 0.60, kHorse));
  d.add(1, ScoredBox::make(Box::from_ltwh(500, 20, 40, 40), 0.20, kDog));
  d.add(1, ScoredBox::make(Box::from_ltwh(20, 400, 30, 30), 0.10, kPerson));
  d.add(2, ScoredBox::make(Box::from_ltwh(200, 80, 60, 180), 0.85, kPerson));
  d.add(2, ScoredBox::make(Box::from_ltwh(350, 200, 200, 150), 0.70, kHorse));
  d.add(2, ScoredBox::make(Box::from_ltwh(350, 200, 200, 150), 0.25, kDog));
  d.add(2, ScoredBox::make(Box::from_ltwh(400, 220, 60, 120), 0.50, kPerson));
  return d;
}

}  // namespace pathology

inline MapPathology demo_map_pathology(std::size_t jobs = 1) {
  MapPathology demo{pathology::ground_truth(), pathology::detector_a(),
                    pathology::detector_b(), {}, {}};
  EvalOptions opts;
  opts.jobs = jobs;
  demo.report_a = evaluate(demo.detector_a, demo.ground_truth, opts);
  demo.report_b = evaluate(demo.detector_b, demo.ground_truth, opts);
  return demo;
}

}  // namespace detkit
