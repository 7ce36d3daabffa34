#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daan/data.hpp"
#include "daan/model.hpp"

namespace daan::eval {

enum class FusionRule { average, audio_only, visual_only };

FusionRule parse_fusion_rule(const std::string& s);
const char* fusion_rule_name(FusionRule r);

struct GzslReport {
  double seen = 0.0;    // S, percent
  double unseen = 0.0;  // U, percent
  double hm = 0.0;      // harmonic mean, percent
  double zsl = 0.0;     // restricted-search unseen accuracy, percent
  std::vector<std::uint32_t> excluded_classes;  // no test samples

  std::string to_json() const;
  // Aligned columns, S U HM ZSL order.
  std::string to_table() const;
  static std::string table_header();
};

double harmonic_mean(double unseen, double seen);

// Nearest candidate by Euclidean distance from the fused projection; ties
// break toward the lowest class id.
std::uint32_t classify(const std::vector<double>& theta_a, const std::vector<double>& theta_v,
                       const std::vector<std::vector<double>>& candidate_thetas,
                       const std::vector<std::uint32_t>& candidate_ids, FusionRule rule);

// Mean class accuracy over `class_ids`, excluding classes without samples
// (their ids are appended to `excluded`).
double mean_class_accuracy(const std::vector<std::uint32_t>& labels,
                           const std::vector<std::uint32_t>& predictions,
                           const std::vector<std::uint32_t>& class_ids,
                           std::vector<std::uint32_t>* excluded);

// Predictions for `samples` against the given candidate classes. Parallelism
// is capped by the DAAN_THREADS environment variable; results are merged in
// sample order so the thread count never changes the output.
std::vector<std::uint32_t> predict(model::DaanModel& m, const data::Dataset& ds,
                                   const std::vector<const data::Sample*>& samples,
                                   const std::vector<std::uint32_t>& candidate_ids,
                                   FusionRule rule);

// Full report: S/U/HM against all classes, ZSL against unseen classes only.
GzslReport evaluate(model::DaanModel& m, const data::Dataset& ds, FusionRule rule);

}  // namespace daan::eval
