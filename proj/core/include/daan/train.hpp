#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "daan/config.hpp"
#include "daan/csgm.hpp"
#include "daan/data.hpp"
#include "daan/eval.hpp"
#include "daan/model.hpp"

namespace daan::train {

struct EpochStats {
  std::size_t epoch = 0;
  double loss_total = 0.0;
  double loss_triplet = 0.0;
  double loss_rec = 0.0;
  double loss_ct = 0.0;
  double loss_w = 0.0;
  double loss_reg = 0.0;
  double eta_audio = 0.0;   // mean over the epoch's trace rows, 0 when none
  double eta_visual = 0.0;
};

struct TraceRow {
  std::size_t step = 0;       // global optimizer step index
  std::size_t sample_id = 0;  // index into the train split
  csgm::ModalityId modality = csgm::ModalityId::audio;
  csgm::PartId part = csgm::PartId::attention;
  double v_c = 0.0;
  double v_o = 0.0;
  double eta = 0.0;
};

data::Dataset build_dataset(const config::ExperimentConfig& cfg);

// One training run: owns the model, optimizer state, RNG streams and logs.
// Bit-reproducible from (config, seed); checkpoints capture the full state.
class Runner {
 public:
  explicit Runner(config::ExperimentConfig cfg);
  Runner(config::ExperimentConfig cfg, data::Dataset dataset);

  // Trains until cfg.train.epochs. On divergence the parameters are rolled
  // back to the last completed epoch and, when a path is given, a checkpoint
  // of that state is written before the error propagates.
  void run(const std::string& diverged_checkpoint_path = "");

  eval::GzslReport evaluate();

  const config::ExperimentConfig& config() const { return cfg_; }
  const data::Dataset& dataset() const { return ds_; }
  model::DaanModel& model() { return *model_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<EpochStats>& history() const { return history_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  std::uint64_t param_hash() const;

  void save_checkpoint(const std::string& path) const;
  static Runner load_checkpoint(const std::string& path,
                                std::optional<std::size_t> epochs_override = std::nullopt);

  void write_metrics_jsonl(const std::string& path) const;
  void write_trace_csv(const std::string& path) const;

 private:
  void init_model();
  void train_one_epoch(const std::string& diverged_checkpoint_path);
  std::vector<std::vector<std::size_t>> make_batches(std::size_t epoch) const;

  config::ExperimentConfig cfg_;
  data::Dataset ds_;
  std::unique_ptr<model::DaanModel> model_;
  csgm::Optimizer optimizer_;
  std::mt19937_64 run_rng_;     // mining + dropout, advances across epochs
  std::mt19937_64 noise_rng_;   // modulation noise only
  std::size_t epoch_ = 0;
  std::size_t global_step_ = 0;
  std::vector<EpochStats> history_;
  std::vector<TraceRow> trace_;
  std::vector<std::vector<double>> last_good_params_;
};

// Table 2 structure: base / base+QDMA / base+QDMA+CSGM(V_c) / full, all runs
// sharing the seed and the data split.
struct AblationRow {
  std::string name;
  eval::GzslReport report;
  std::uint64_t split_hash = 0;
};
std::vector<AblationRow> ablate(const config::ExperimentConfig& cfg);

struct SweepPoint {
  double value = 0.0;
  eval::GzslReport report;
};
// param must be "tcn.n" or "csgm.gamma".
std::vector<SweepPoint> sweep(const config::ExperimentConfig& cfg, const std::string& param,
                              const std::vector<double>& values);

// Report emission helpers shared by the CLI.
void write_text_file(const std::string& path, const std::string& content);
std::string ablation_table(const std::vector<AblationRow>& rows);
std::string sweep_csv(const std::string& param, const std::vector<SweepPoint>& points);
void write_sweep_plots(const std::string& dir, const std::string& param,
                       const std::vector<SweepPoint>& points);
// Minimal line plot, one polyline per call.
std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<double>& xs,
                          const std::vector<double>& ys);

}  // namespace daan::train
