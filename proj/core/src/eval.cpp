#include "daan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace daan::eval {

FusionRule parse_fusion_rule(const std::string& s) {
  if (s == "average") return FusionRule::average;
  if (s == "audio" || s == "audio-only") return FusionRule::audio_only;
  if (s == "visual" || s == "visual-only") return FusionRule::visual_only;
  throw ConfigError("unknown fusion rule: " + s);
}

const char* fusion_rule_name(FusionRule r) {
  switch (r) {
    case FusionRule::average: return "average";
    case FusionRule::audio_only: return "audio";
    case FusionRule::visual_only: return "visual";
  }
  return "average";
}

double harmonic_mean(double unseen, double seen) {
  const double sum = unseen + seen;
  return sum > 0.0 ? 2.0 * unseen * seen / sum : 0.0;
}

std::string GzslReport::to_json() const {
  nlohmann::json j = {{"S", seen}, {"U", unseen}, {"HM", hm}, {"ZSL", zsl},
                      {"excluded_classes", excluded_classes}};
  return j.dump();
}

std::string GzslReport::table_header() {
  std::ostringstream os;
  os << "      S       U      HM     ZSL";
  return os.str();
}

std::string GzslReport::to_table() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%7.2f %7.2f %7.2f %7.2f", seen, unseen, hm, zsl);
  return buf;
}

std::uint32_t classify(const std::vector<double>& theta_a, const std::vector<double>& theta_v,
                       const std::vector<std::vector<double>>& candidate_thetas,
                       const std::vector<std::uint32_t>& candidate_ids, FusionRule rule) {
  if (candidate_thetas.empty() || candidate_thetas.size() != candidate_ids.size()) {
    throw ContractError("classify requires a nonempty candidate set");
  }
  std::vector<double> fused(theta_a.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    switch (rule) {
      case FusionRule::average: fused[i] = 0.5 * (theta_a[i] + theta_v[i]); break;
      case FusionRule::audio_only: fused[i] = theta_a[i]; break;
      case FusionRule::visual_only: fused[i] = theta_v[i]; break;
    }
  }
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_id = candidate_ids[0];
  for (std::size_t c = 0; c < candidate_thetas.size(); ++c) {
    const auto& w = candidate_thetas[c];
    double d2 = 0.0;
    for (std::size_t i = 0; i < fused.size(); ++i) {
      const double d = fused[i] - w[i];
      d2 += d * d;
    }
    if (d2 < best || (d2 == best && candidate_ids[c] < best_id)) {
      best = d2;
      best_id = candidate_ids[c];
    }
  }
  return best_id;
}

double mean_class_accuracy(const std::vector<std::uint32_t>& labels,
                           const std::vector<std::uint32_t>& predictions,
                           const std::vector<std::uint32_t>& class_ids,
                           std::vector<std::uint32_t>* excluded) {
  if (labels.size() != predictions.size()) throw ContractError("label/prediction count mismatch");
  double acc_sum = 0.0;
  std::size_t counted = 0;
  for (std::uint32_t cid : class_ids) {
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != cid) continue;
      ++total;
      correct += predictions[i] == cid ? 1 : 0;
    }
    if (total == 0) {
      if (excluded) excluded->push_back(cid);
      continue;
    }
    acc_sum += static_cast<double>(correct) / static_cast<double>(total);
    ++counted;
  }
  return counted == 0 ? 0.0 : 100.0 * acc_sum / static_cast<double>(counted);
}

namespace {

std::size_t thread_budget() {
  if (const char* env = std::getenv("DAAN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

// Mean text embedding over seen classes: the label-free value input for the
// attention unit at inference time.
std::vector<double> neutral_text(const data::Dataset& ds) {
  std::vector<double> out(ds.text_dim, 0.0);
  std::size_t n = 0;
  for (const auto& c : ds.classes) {
    if (!c.seen) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += ds.text[c.id].w[i];
    ++n;
  }
  if (n == 0) throw ContractError("dataset without seen classes");
  for (double& x : out) x /= static_cast<double>(n);
  return out;
}

}  // namespace

std::vector<std::uint32_t> predict(model::DaanModel& m, const data::Dataset& ds,
                                   const std::vector<const data::Sample*>& samples,
                                   const std::vector<std::uint32_t>& candidate_ids,
                                   FusionRule rule) {
  if (candidate_ids.empty()) throw ContractError("empty candidate class set");
  std::vector<std::vector<double>> candidate_thetas;
  candidate_thetas.reserve(candidate_ids.size());
  for (std::uint32_t cid : candidate_ids) {
    candidate_thetas.push_back(m.project_text(ds.text[cid].w));
  }
  const std::vector<double> text = neutral_text(ds);

  std::vector<std::uint32_t> predictions(samples.size(), 0);
  auto worker = [&](std::size_t lo, std::size_t hi) {
    std::mt19937_64 unused(0);
    for (std::size_t i = lo; i < hi; ++i) {
      auto e = m.forward(samples[i]->audio, samples[i]->visual, text, /*training=*/false, unused);
      predictions[i] = classify(e.theta_a.values(), e.theta_v.values(), candidate_thetas,
                                candidate_ids, rule);
    }
  };
  const std::size_t threads = std::min(thread_budget(), std::max<std::size_t>(samples.size(), 1));
  if (threads <= 1) {
    worker(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(samples.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return predictions;
}

GzslReport evaluate(model::DaanModel& m, const data::Dataset& ds, FusionRule rule) {
  std::vector<std::uint32_t> all_ids, seen_ids, unseen_ids;
  for (const auto& c : ds.classes) {
    all_ids.push_back(c.id);
    (c.seen ? seen_ids : unseen_ids).push_back(c.id);
  }
  std::vector<const data::Sample*> test_all, test_unseen;
  std::vector<std::uint32_t> labels_all, labels_unseen;
  for (const auto& s : ds.test) {
    test_all.push_back(&s);
    labels_all.push_back(s.label);
    if (!ds.classes[s.label].seen) {
      test_unseen.push_back(&s);
      labels_unseen.push_back(s.label);
    }
  }

  GzslReport report;
  const auto pred_all = predict(m, ds, test_all, all_ids, rule);
  report.seen = mean_class_accuracy(labels_all, pred_all, seen_ids, &report.excluded_classes);
  report.unseen = mean_class_accuracy(labels_all, pred_all, unseen_ids, &report.excluded_classes);
  report.hm = harmonic_mean(report.unseen, report.seen);
  if (!test_unseen.empty() && !unseen_ids.empty()) {
    const auto pred_zsl = predict(m, ds, test_unseen, unseen_ids, rule);
    report.zsl = mean_class_accuracy(labels_unseen, pred_zsl, unseen_ids, nullptr);
  }
  return report;
}

}  // namespace daan::eval
