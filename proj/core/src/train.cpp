#include "daan/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "daan/losses.hpp"
#include "json.hpp"

namespace daan::train {

namespace {

using json = nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

data::Dataset build_dataset(const config::ExperimentConfig& cfg) {
  if (cfg.data.synthetic) return data::generate_synthetic(cfg.data.synth);
  return data::load_dataset(cfg.data.path, cfg.data.format);
}

Runner::Runner(config::ExperimentConfig cfg) : Runner(std::move(cfg), data::Dataset{}) {
  ds_ = build_dataset(cfg_);
  if (ds_.input_dim != cfg_.model.input || ds_.text_dim != cfg_.model.text_dim) {
    throw ConfigError("dataset dims " + std::to_string(ds_.input_dim) + "/" +
                      std::to_string(ds_.text_dim) + " disagree with the model config");
  }
}

Runner::Runner(config::ExperimentConfig cfg, data::Dataset dataset)
    : cfg_(std::move(cfg)), ds_(std::move(dataset)) {
  cfg_.validate();
  init_model();
}

void Runner::init_model() {
  model_ = std::make_unique<model::DaanModel>(cfg_.model, cfg_.train.seed);
  optimizer_ = csgm::Optimizer(cfg_.train.learning_rate, cfg_.train.pure_sgd);
  optimizer_.init(model_->params());
  run_rng_ = stream_rng(cfg_.train.seed, "run");
  noise_rng_ = stream_rng(cfg_.train.seed, "modulation-noise");
  last_good_params_.clear();
  for (const auto& p : model_->params().all()) last_good_params_.push_back(p.value.values());
}

std::uint64_t Runner::param_hash() const { return model_->params().value_hash(); }

std::vector<std::vector<std::size_t>> Runner::make_batches(std::size_t epoch) const {
  std::vector<std::size_t> order(ds_.train.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = stream_rng(cfg_.train.seed, "shuffle", epoch);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += cfg_.train.batch_size) {
    const std::size_t hi = std::min(order.size(), i + cfg_.train.batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + hi);
  }
  // A batch needs at least two labels so every anchor can mine a negative;
  // pull a differing-label sample over from a neighbour batch if not.
  for (std::size_t b = 0; b < batches.size(); ++b) {
    auto& batch = batches[b];
    const std::uint32_t l0 = ds_.train[batch[0]].label;
    bool mixed = false;
    for (std::size_t idx : batch) mixed = mixed || ds_.train[idx].label != l0;
    if (mixed) continue;
    for (std::size_t nb = 0; nb < batches.size() && !mixed; ++nb) {
      if (nb == b) continue;
      for (std::size_t& other : batches[nb]) {
        if (ds_.train[other].label != l0) {
          std::swap(other, batch.back());
          mixed = true;
          break;
        }
      }
    }
    if (!mixed) throw MiningError("the train split holds a single class; cannot form pairs");
  }
  return batches;
}

void Runner::train_one_epoch(const std::string& diverged_checkpoint_path) {
  auto& store = model_->params();
  const bool modulate = cfg_.csgm.active_in_epoch(epoch_);
  const double noise_scale = modulate ? cfg_.csgm.noise_scale : 0.0;
  std::set<std::size_t> noisy;
  if (modulate && noise_scale > 0.0) {
    for (std::size_t i = 0; i < store.all().size(); ++i) {
      if (!store.all()[i].part.empty()) noisy.insert(i);
    }
  }

  EpochStats stats;
  stats.epoch = epoch_;
  std::size_t sample_count = 0;
  double eta_audio_sum = 0.0, eta_visual_sum = 0.0;
  std::size_t eta_audio_n = 0, eta_visual_n = 0;

  try {
    const auto batches = make_batches(epoch_);
    std::vector<std::vector<double>> accum(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
      accum[i].assign(store.all()[i].value.size(), 0.0);
    }

    for (const auto& batch : batches) {
      for (auto& a : accum) std::fill(a.begin(), a.end(), 0.0);
      std::vector<const data::Sample*> batch_ptrs;
      batch_ptrs.reserve(batch.size());
      for (std::size_t idx : batch) {
        const data::Sample& s = ds_.train[idx];
        if (!ds_.classes[s.label].seen) {
          throw ContractError("unseen-class sample reached batch assembly");
        }
        batch_ptrs.push_back(&s);
      }

      for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const data::Sample& anchor = *batch_ptrs[bi];
        const std::size_t neg_bi = data::mine_negative(batch_ptrs, bi, run_rng_);
        const data::Sample& negative = *batch_ptrs[neg_bi];
        const auto& anchor_text = ds_.text[anchor.label].w;
        const auto& negative_text = ds_.text[negative.label].w;

        store.zero_grad();
        losses::Breakdown bd;
        csgm::PairThetas thetas;
        {
          Tape tape;
          auto ea = model_->forward(anchor.audio, anchor.visual, anchor_text, true, run_rng_);
          auto en = model_->forward(negative.audio, negative.visual, negative_text, true, run_rng_);
          losses::PairEmbeddings pe;
          pe.theta_a_pos = ea.theta_a;
          pe.theta_v_pos = ea.theta_v;
          pe.theta_w_pos = ea.theta_w;
          pe.theta_a_neg = en.theta_a;
          pe.theta_v_neg = en.theta_v;
          pe.theta_w_neg = en.theta_w;
          pe.rho_a_pos = ea.rho_a;
          pe.rho_v_pos = ea.rho_v;
          pe.rho_w_pos = ea.rho_w;
          pe.rho_a_neg = en.rho_a;
          pe.rho_v_neg = en.rho_v;
          pe.phi_a_pos = ea.phi_a;
          pe.phi_v_pos = ea.phi_v;
          pe.phi_w_pos = ea.phi_w;
          pe.phi_a_rec_pos = ea.phi_a_rec;
          pe.phi_v_rec_pos = ea.phi_v_rec;
          pe.text_pos = Tensor::from({1, anchor_text.size()}, anchor_text);
          bd = losses::loss_total(pe, cfg_.loss);
          tape.backward(bd.total);
          thetas.a_pos = ea.theta_a.values();
          thetas.v_pos = ea.theta_v.values();
          thetas.w_pos = ea.theta_w.values();
          thetas.a_neg = en.theta_a.values();
          thetas.v_neg = en.theta_v.values();
          thetas.w_neg = en.theta_w.values();
        }

        if (modulate) {
          const auto rates = csgm::sample_rates(store, thetas, cfg_.csgm);
          csgm::accumulate_modulated(store, rates, accum);
          for (const auto& r : rates) {
            trace_.push_back(TraceRow{global_step_, batch[bi], r.modality, r.part, r.v_c, r.v_o,
                                      r.eta});
            if (r.modality == csgm::ModalityId::audio) {
              eta_audio_sum += r.eta;
              ++eta_audio_n;
            } else {
              eta_visual_sum += r.eta;
              ++eta_visual_n;
            }
          }
        } else {
          csgm::accumulate_plain(store, accum);
        }

        stats.loss_total += bd.total_value;
        stats.loss_triplet += bd.triplet;
        stats.loss_rec += bd.rec;
        stats.loss_ct += bd.ct;
        stats.loss_w += bd.w;
        stats.loss_reg += bd.reg;
        ++sample_count;
      }

      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto& a : accum) {
        for (double& g : a) g *= inv;
      }
      optimizer_.step(store, accum, noisy, noise_scale, noise_rng_);
      ++global_step_;
    }
  } catch (const NumericError& e) {
    // Roll back to the last completed epoch and surface the divergence.
    auto& params = store.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].value.mutable_values() = last_good_params_[i];
    }
    if (!diverged_checkpoint_path.empty()) save_checkpoint(diverged_checkpoint_path);
    throw NumericError("training diverged in epoch " + std::to_string(epoch_) + ": " + e.what() +
                       "; parameters rolled back to epoch " + std::to_string(epoch_ ? epoch_ - 1 : 0));
  }

  if (sample_count > 0) {
    const double inv = 1.0 / static_cast<double>(sample_count);
    stats.loss_total *= inv;
    stats.loss_triplet *= inv;
    stats.loss_rec *= inv;
    stats.loss_ct *= inv;
    stats.loss_w *= inv;
    stats.loss_reg *= inv;
  }
  stats.eta_audio = eta_audio_n ? eta_audio_sum / static_cast<double>(eta_audio_n) : 0.0;
  stats.eta_visual = eta_visual_n ? eta_visual_sum / static_cast<double>(eta_visual_n) : 0.0;
  history_.push_back(stats);

  for (std::size_t i = 0; i < store.all().size(); ++i) {
    last_good_params_[i] = store.all()[i].value.values();
  }
}

void Runner::run(const std::string& diverged_checkpoint_path) {
  while (epoch_ < cfg_.train.epochs) {
    train_one_epoch(diverged_checkpoint_path);
    ++epoch_;
  }
}

eval::GzslReport Runner::evaluate() { return eval::evaluate(*model_, ds_, cfg_.fusion_rule); }

void Runner::write_metrics_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  json run_line = {{"type", "run"},
                   {"split_hash", hex64(ds_.split_hash())},
                   {"epochs", cfg_.train.epochs},
                   {"seed", cfg_.train.seed}};
  out << run_line.dump() << "\n";
  for (const EpochStats& s : history_) {
    json line = {{"type", "epoch"},       {"epoch", s.epoch},
                 {"loss_total", s.loss_total}, {"loss_triplet", s.loss_triplet},
                 {"loss_rec", s.loss_rec},     {"loss_ct", s.loss_ct},
                 {"loss_w", s.loss_w},         {"loss_reg", s.loss_reg},
                 {"eta_audio", s.eta_audio},   {"eta_visual", s.eta_visual}};
    out << line.dump() << "\n";
  }
}

void Runner::write_trace_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "step,sample_id,modality,part,v_c,v_o,eta\n";
  char buf[256];
  for (const TraceRow& r : trace_) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%s,%s,%.17g,%.17g,%.17g\n", r.step, r.sample_id,
                  csgm::modality_name(r.modality), csgm::part_name(r.part), r.v_c, r.v_o, r.eta);
    out << buf;
  }
}

// --- checkpointing -----------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'D', 'A', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void w_u32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void w_u64(std::ofstream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
void w_str(std::ofstream& o, const std::string& s) {
  w_u64(o, s.size());
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void w_f64v(std::ofstream& o, const std::vector<double>& v) {
  w_u64(o, v.size());
  o.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

std::uint32_t r_u32(std::ifstream& i) {
  std::uint32_t v;
  i.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t r_u64(std::ifstream& i) {
  std::uint64_t v;
  i.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string r_str(std::ifstream& i) {
  std::string s(r_u64(i), '\0');
  i.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
std::vector<double> r_f64v(std::ifstream& i) {
  std::vector<double> v(r_u64(i));
  i.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  return v;
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw FormatError("corrupt rng state in checkpoint", 0);
}

}  // namespace

void Runner::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(kCkptMagic, 8);
  w_u32(out, kCkptVersion);
  w_str(out, cfg_.to_text());
  w_u64(out, epoch_);
  w_u64(out, global_step_);
  w_str(out, rng_to_string(run_rng_));
  w_str(out, rng_to_string(noise_rng_));

  const auto& params = model_->params().all();
  w_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w_str(out, p.name);
    w_u32(out, static_cast<std::uint32_t>(p.value.shape().size()));
    for (std::size_t d : p.value.shape()) w_u64(out, d);
    w_f64v(out, p.value.values());
  }

  auto bns = const_cast<model::DaanModel&>(*model_).batch_norms();
  w_u32(out, static_cast<std::uint32_t>(bns.size()));
  for (auto& [name, bn] : bns) {
    w_str(out, name);
    w_f64v(out, bn->running_mean);
    w_f64v(out, bn->running_var);
  }

  w_u64(out, optimizer_.step_count());
  w_u32(out, static_cast<std::uint32_t>(optimizer_.first_moments().size()));
  for (std::size_t i = 0; i < optimizer_.first_moments().size(); ++i) {
    w_f64v(out, optimizer_.first_moments()[i]);
    w_f64v(out, optimizer_.second_moments()[i]);
  }
}

Runner Runner::load_checkpoint(const std::string& path,
                               std::optional<std::size_t> epochs_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path, 0);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw FormatError(path + ": not a checkpoint file", 0);
  }
  if (r_u32(in) != kCkptVersion) throw FormatError(path + ": unsupported checkpoint version", 8);

  auto cfg = config::ExperimentConfig::from_text(r_str(in));
  cfg.train.resume_from.clear();
  if (epochs_override) cfg.train.epochs = *epochs_override;
  Runner runner(std::move(cfg));

  runner.epoch_ = r_u64(in);
  runner.global_step_ = r_u64(in);
  rng_from_string(runner.run_rng_, r_str(in));
  rng_from_string(runner.noise_rng_, r_str(in));

  auto& params = runner.model_->params().all();
  const std::uint32_t n_params = r_u32(in);
  if (n_params != params.size()) throw FormatError(path + ": parameter count mismatch", 0);
  for (auto& p : params) {
    const std::string name = r_str(in);
    if (name != p.name) {
      throw FormatError(path + ": parameter order mismatch at " + name + " vs " + p.name, 0);
    }
    const std::uint32_t rank = r_u32(in);
    Shape shape(rank);
    for (auto& d : shape) d = r_u64(in);
    if (shape != p.value.shape()) throw FormatError(path + ": shape mismatch at " + name, 0);
    auto values = r_f64v(in);
    if (values.size() != p.value.size()) throw FormatError(path + ": size mismatch at " + name, 0);
    p.value.mutable_values() = std::move(values);
  }

  auto bns = runner.model_->batch_norms();
  const std::uint32_t n_bns = r_u32(in);
  if (n_bns != bns.size()) throw FormatError(path + ": batch-norm count mismatch", 0);
  for (auto& [name, bn] : bns) {
    const std::string saved = r_str(in);
    if (saved != name) throw FormatError(path + ": batch-norm order mismatch at " + saved, 0);
    bn->running_mean = r_f64v(in);
    bn->running_var = r_f64v(in);
  }

  runner.optimizer_.set_step_count(r_u64(in));
  const std::uint32_t n_moments = r_u32(in);
  if (n_moments != params.size()) throw FormatError(path + ": optimizer state mismatch", 0);
  for (std::size_t i = 0; i < n_moments; ++i) {
    runner.optimizer_.first_moments()[i] = r_f64v(in);
    runner.optimizer_.second_moments()[i] = r_f64v(in);
  }
  if (!in) throw FormatError(path + ": truncated checkpoint", 0);

  for (std::size_t i = 0; i < params.size(); ++i) {
    runner.last_good_params_[i] = params[i].value.values();
  }
  return runner;
}

// --- orchestration -----------------------------------------------------------

std::vector<AblationRow> ablate(const config::ExperimentConfig& cfg) {
  config::ExperimentConfig base = cfg;
  base.validate();
  const data::Dataset ds = build_dataset(base);
  const std::uint64_t split = ds.split_hash();

  struct Variant {
    const char* name;
    bool qdma, csgm_on, vc_only;
  };
  const Variant variants[] = {
      {"base", false, false, false},
      {"base+qdma", true, false, false},
      {"base+qdma+csgm_vc", true, true, true},
      {"full", true, true, false},
  };

  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    config::ExperimentConfig run_cfg = cfg;
    run_cfg.model.use_qdma = v.qdma;
    run_cfg.csgm.enabled = v.csgm_on;
    run_cfg.csgm.vc_only = v.vc_only;
    Runner runner(run_cfg, ds);
    runner.run();
    rows.push_back(AblationRow{v.name, runner.evaluate(), split});
  }
  return rows;
}

std::vector<SweepPoint> sweep(const config::ExperimentConfig& cfg, const std::string& param,
                              const std::vector<double>& values) {
  if (param != "tcn.n" && param != "csgm.gamma") {
    throw ConfigError("sweep supports tcn.n and csgm.gamma, not " + param);
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepPoint> points;
  for (double v : values) {
    config::ExperimentConfig run_cfg = cfg;
    std::ostringstream val;
    val.precision(17);
    val << v;
    run_cfg.set_key(param, val.str());
    Runner runner(run_cfg);
    runner.run();
    points.push_back(SweepPoint{v, runner.evaluate()});
  }
  return points;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "model                    " << eval::GzslReport::table_header() << "\n";
  for (const auto& r : rows) {
    char name[32];
    std::snprintf(name, sizeof(name), "%-24s ", r.name.c_str());
    os << name << r.report.to_table() << "\n";
  }
  return os.str();
}

std::string sweep_csv(const std::string& param, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << param << ",S,U,HM,ZSL\n";
  os.precision(17);
  for (const auto& p : points) {
    os << p.value << "," << p.report.seen << "," << p.report.unseen << "," << p.report.hm << ","
       << p.report.zsl << "\n";
  }
  return os.str();
}

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  const int w = 640, h = 420, ml = 60, mr = 20, mt = 40, mb = 50;
  double xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0];
  for (double x : xs) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  for (double y : ys) {
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", xv);
    os << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3g", yv);
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
  }
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + h - mb) / 2 << ")\">" << y_label << "</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) os << px(xs[i]) << "," << py(ys[i]) << " ";
  os << "\"/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    os << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
       << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_sweep_plots(const std::string& dir, const std::string& param,
                       const std::vector<SweepPoint>& points) {
  std::vector<double> xs;
  for (const auto& p : points) xs.push_back(p.value);
  auto emit = [&](const char* name, auto getter) {
    std::vector<double> ys;
    for (const auto& p : points) ys.push_back(getter(p.report));
    const std::string file = dir + "/sweep_" + name + ".svg";
    write_text_file(file, line_plot_svg(std::string(name) + " vs " + param, param, name, xs, ys));
  };
  emit("S", [](const eval::GzslReport& r) { return r.seen; });
  emit("U", [](const eval::GzslReport& r) { return r.unseen; });
  emit("HM", [](const eval::GzslReport& r) { return r.hm; });
  emit("ZSL", [](const eval::GzslReport& r) { return r.zsl; });
}

}  // namespace daan::train
