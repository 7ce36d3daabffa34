#include "daan/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace daan::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::string fmt_double(double x) {
  if (std::isinf(x)) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void ExperimentConfig::set_key(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  // dims
  if (key == "dims.input") model.input = parse_u64(key, v);
  else if (key == "dims.hidden") model.hidden = parse_u64(key, v);
  else if (key == "dims.output") model.output = parse_u64(key, v);
  // qdma
  else if (key == "qdma.enabled") model.use_qdma = parse_bool(key, v);
  else if (key == "qdma.beta") model.beta = parse_double(key, v);
  else if (key == "qdma.tokens") model.tokens = parse_u64(key, v);
  else if (key == "qdma.groups") model.groups = parse_u64(key, v);
  else if (key == "qdma.dropout") model.dropout = parse_double(key, v);
  // tcn
  else if (key == "tcn.n") model.tcn_layers = parse_u64(key, v);
  else if (key == "tcn.k") model.tcn_dilation = parse_u64(key, v);
  else if (key == "tcn.kernel") model.tcn_kernel = parse_u64(key, v);
  else if (key == "tcn.x_hid") model.x_hid = parse_u64(key, v);
  // fusion
  else if (key == "fusion.heads") model.heads = parse_u64(key, v);
  // csgm
  else if (key == "csgm.gamma") csgm.gamma = parse_double(key, v);
  else if (key == "csgm.mu") csgm.mu = parse_double(key, v);
  else if (key == "csgm.noise_scale") csgm.noise_scale = parse_double(key, v);
  else if (key == "csgm.enabled") csgm.enabled = parse_bool(key, v);
  else if (key == "csgm.vc_only") csgm.vc_only = parse_bool(key, v);
  else if (key == "csgm.epoch_start") csgm.epoch_start = parse_long(key, v);
  else if (key == "csgm.epoch_end") csgm.epoch_end = parse_long(key, v);
  // train
  else if (key == "train.epochs") train.epochs = parse_u64(key, v);
  else if (key == "train.batch_size") train.batch_size = parse_u64(key, v);
  else if (key == "train.learning_rate") train.learning_rate = parse_double(key, v);
  else if (key == "train.margin") loss.margin = parse_double(key, v);
  else if (key == "train.seed") train.seed = parse_u64(key, v);
  else if (key == "train.pure_sgd") train.pure_sgd = parse_bool(key, v);
  else if (key == "train.resume_from") train.resume_from = v;
  // loss
  else if (key == "loss.rec_distance") {
    if (v == "mse" || v == "mean-squared") loss.rec_distance = losses::RecDistance::mean_squared;
    else if (v == "euclidean") loss.rec_distance = losses::RecDistance::euclidean;
    else throw ConfigError("loss.rec_distance must be 'mse' or 'euclidean'");
  }
  // data
  else if (key == "data.synthetic") data.synthetic = parse_bool(key, v);
  else if (key == "data.path") data.path = v;
  else if (key == "data.format") {
    if (v != "daan" && v != "jsonl") throw ConfigError("data.format must be 'daan' or 'jsonl'");
    data.format = v;
  } else if (key == "data.seed") data.synth.seed = parse_u64(key, v);
  else if (key == "data.num_seen_classes") data.synth.num_seen_classes = static_cast<std::uint32_t>(parse_u64(key, v));
  else if (key == "data.num_unseen_classes") data.synth.num_unseen_classes = static_cast<std::uint32_t>(parse_u64(key, v));
  else if (key == "data.samples_per_class") data.synth.samples_per_class = static_cast<std::uint32_t>(parse_u64(key, v));
  else if (key == "data.test_samples_per_class") data.synth.test_samples_per_class = static_cast<std::uint32_t>(parse_u64(key, v));
  else if (key == "data.audio_snr") data.synth.audio_snr = parse_double(key, v);
  else if (key == "data.visual_snr") data.synth.visual_snr = parse_double(key, v);
  else if (key == "data.content_bias_std") data.synth.content_bias_std = parse_double(key, v);
  // eval
  else if (key == "eval.rule") fusion_rule = eval::parse_fusion_rule(v);
  else throw ConfigError("unknown config key: " + key);
}

void ExperimentConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    const auto pos = a.find('=');
    if (pos == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + a + "'");
    }
    set_key(trim(a.substr(0, pos)), a.substr(pos + 1));
  }
}

void ExperimentConfig::validate() {
  // The sample feature dim and the text dim are tied to the model dims: text
  // embeddings live in the shared output space.
  data.synth.input_dim = static_cast<std::uint32_t>(model.input);
  data.synth.text_dim = static_cast<std::uint32_t>(model.output);
  model.text_dim = model.output;
  model.validate();
  csgm.validate();
  if (loss.margin < 0.0) throw ConfigError("train.margin must be nonnegative");
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (data.synthetic) {
    data.synth.validate();
  } else if (data.path.empty()) {
    throw ConfigError("data.path required when data.synthetic=false");
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << "dims.input = " << model.input << "\n";
  os << "dims.hidden = " << model.hidden << "\n";
  os << "dims.output = " << model.output << "\n";
  os << "qdma.enabled = " << (model.use_qdma ? "true" : "false") << "\n";
  os << "qdma.beta = " << fmt_double(model.beta) << "\n";
  os << "qdma.tokens = " << model.tokens << "\n";
  os << "qdma.groups = " << model.groups << "\n";
  os << "qdma.dropout = " << fmt_double(model.dropout) << "\n";
  os << "tcn.n = " << model.tcn_layers << "\n";
  os << "tcn.k = " << model.tcn_dilation << "\n";
  os << "tcn.kernel = " << model.tcn_kernel << "\n";
  os << "tcn.x_hid = " << model.x_hid << "\n";
  os << "fusion.heads = " << model.heads << "\n";
  os << "csgm.gamma = " << fmt_double(csgm.gamma) << "\n";
  os << "csgm.mu = " << fmt_double(csgm.mu) << "\n";
  os << "csgm.noise_scale = " << fmt_double(csgm.noise_scale) << "\n";
  os << "csgm.enabled = " << (csgm.enabled ? "true" : "false") << "\n";
  os << "csgm.vc_only = " << (csgm.vc_only ? "true" : "false") << "\n";
  os << "csgm.epoch_start = " << csgm.epoch_start << "\n";
  os << "csgm.epoch_end = " << csgm.epoch_end << "\n";
  os << "train.epochs = " << train.epochs << "\n";
  os << "train.batch_size = " << train.batch_size << "\n";
  os << "train.learning_rate = " << fmt_double(train.learning_rate) << "\n";
  os << "train.margin = " << fmt_double(loss.margin) << "\n";
  os << "train.seed = " << train.seed << "\n";
  os << "train.pure_sgd = " << (train.pure_sgd ? "true" : "false") << "\n";
  os << "loss.rec_distance = "
     << (loss.rec_distance == losses::RecDistance::mean_squared ? "mse" : "euclidean") << "\n";
  os << "data.synthetic = " << (data.synthetic ? "true" : "false") << "\n";
  if (!data.path.empty()) os << "data.path = " << data.path << "\n";
  os << "data.format = " << data.format << "\n";
  os << "data.seed = " << data.synth.seed << "\n";
  os << "data.num_seen_classes = " << data.synth.num_seen_classes << "\n";
  os << "data.num_unseen_classes = " << data.synth.num_unseen_classes << "\n";
  os << "data.samples_per_class = " << data.synth.samples_per_class << "\n";
  os << "data.test_samples_per_class = " << data.synth.test_samples_per_class << "\n";
  os << "data.audio_snr = " << fmt_double(data.synth.audio_snr) << "\n";
  os << "data.visual_snr = " << fmt_double(data.synth.visual_snr) << "\n";
  os << "data.content_bias_std = " << fmt_double(data.synth.content_bias_std) << "\n";
  os << "eval.rule = " << eval::fusion_rule_name(fusion_rule) << "\n";
  return os.str();
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto pos = line.find('=');
    if (pos == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: " + line);
    }
    cfg.set_key(trim(line.substr(0, pos)), line.substr(pos + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace daan::config
