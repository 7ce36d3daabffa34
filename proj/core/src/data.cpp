#include "daan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

namespace daan::data {

namespace {

using json = nlohmann::json;

double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

std::vector<double> gaussian_vec(std::mt19937_64& rng, std::size_t n, double std_dev = 1.0) {
  std::normal_distribution<double> dist(0.0, std_dev);
  std::vector<double> out(n);
  for (double& x : out) x = dist(rng);
  return out;
}

std::vector<double> unit_vec(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v = gaussian_vec(rng, n);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    v.assign(n, 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

// Fixed random linear map text_dim -> input_dim, row-major.
std::vector<double> modality_map(const SynthConfig& cfg, std::uint64_t modality_tag) {
  auto rng = stream_rng(cfg.seed, "map", modality_tag);
  return gaussian_vec(rng, static_cast<std::size_t>(cfg.input_dim) * cfg.text_dim,
                      1.0 / std::sqrt(static_cast<double>(cfg.text_dim)));
}

std::vector<double> apply_map(const std::vector<double>& m, std::size_t rows,
                              const std::vector<double>& x) {
  const std::size_t cols = x.size();
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += m[i * cols + j] * x[j];
    out[i] = acc;
  }
  return out;
}

struct Generator {
  const SynthConfig& cfg;
  std::vector<std::vector<double>> prototypes;  // unit text vectors, pre-quantization
  std::vector<double> map_audio, map_visual;

  explicit Generator(const SynthConfig& c) : cfg(c) {
    const std::uint32_t classes = c.num_seen_classes + c.num_unseen_classes;
    prototypes.reserve(classes);
    for (std::uint32_t cid = 0; cid < classes; ++cid) {
      auto rng = stream_rng(c.seed, "text", cid);
      prototypes.push_back(unit_vec(rng, c.text_dim));
    }
    map_audio = modality_map(c, 0);
    map_visual = modality_map(c, 1);
  }

  std::vector<double> feature(std::uint64_t modality_tag, std::uint32_t cid,
                              std::uint64_t split_tag, std::uint32_t index) const {
    const auto& m = modality_tag == 0 ? map_audio : map_visual;
    std::vector<double> f = apply_map(m, cfg.input_dim, prototypes[cid]);

    // Content discrepancy: one bias magnitude per sample, pushed along a
    // per-modality random direction.
    if (cfg.content_bias_std > 0.0) {
      auto brng = stream_rng(cfg.seed, "bias", split_tag, cid, index);
      std::normal_distribution<double> bdist(0.0, cfg.content_bias_std);
      const double magnitude = bdist(brng);
      auto drng = stream_rng(cfg.seed, "dir", modality_tag, split_tag, cid, index);
      std::vector<double> dir = unit_vec(drng, cfg.input_dim);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += magnitude * dir[i];
    }

    // Quality discrepancy: white noise with power set by the modality SNR.
    const double snr = modality_tag == 0 ? cfg.audio_snr : cfg.visual_snr;
    if (std::isfinite(snr)) {
      double p_sig = 0.0;
      for (double x : f) p_sig += x * x;
      p_sig /= static_cast<double>(f.size());
      const double noise_std = std::sqrt(p_sig / snr);
      auto nrng = stream_rng(cfg.seed, "noise", modality_tag, split_tag, cid, index);
      std::vector<double> eps = gaussian_vec(nrng, cfg.input_dim);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += noise_std * eps[i];
    }

    for (double& x : f) x = quantize_f32(x);
    return f;
  }

  Sample sample(std::uint32_t cid, std::uint64_t split_tag, std::uint32_t index) const {
    Sample s;
    s.label = cid;
    s.audio = feature(0, cid, split_tag, index);
    s.visual = feature(1, cid, split_tag, index);
    return s;
  }
};

constexpr std::uint64_t kTrainTag = 0;
constexpr std::uint64_t kTestTag = 1;

}  // namespace

void SynthConfig::validate() const {
  if (num_seen_classes == 0) throw ConfigError("synthetic data needs at least one seen class");
  if (samples_per_class == 0 || test_samples_per_class == 0) {
    throw ConfigError("samples_per_class and test_samples_per_class must be positive");
  }
  if (input_dim == 0 || text_dim == 0) throw ConfigError("feature dimensions must be positive");
  if (!(audio_snr > 0.0) || !(visual_snr > 0.0)) throw ConfigError("snr values must be positive");
  if (content_bias_std < 0.0) throw ConfigError("content_bias_std must be nonnegative");
}

std::uint32_t Dataset::num_seen() const {
  std::uint32_t n = 0;
  for (const ClassLabel& c : classes) n += c.seen ? 1 : 0;
  return n;
}

std::uint64_t Dataset::split_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto fold_samples = [&h](const std::vector<Sample>& samples) {
    for (const Sample& s : samples) {
      h = fnv1a(&s.label, sizeof(s.label), h);
      h = fnv1a(s.audio.data(), s.audio.size() * sizeof(double), h);
      h = fnv1a(s.visual.data(), s.visual.size() * sizeof(double), h);
    }
  };
  for (const ClassLabel& c : classes) {
    h = fnv1a(&c.id, sizeof(c.id), h);
    const std::uint8_t seen = c.seen ? 1 : 0;
    h = fnv1a(&seen, 1, h);
  }
  for (const TextEmbedding& t : text) h = fnv1a(t.w.data(), t.w.size() * sizeof(double), h);
  fold_samples(train);
  fold_samples(test);
  return h;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].id != i) throw GenerationError("class ids are not dense");
  }
  if (text.size() != classes.size()) throw GenerationError("one text embedding per class required");
  for (const Sample& s : train) {
    if (s.label >= classes.size() || !classes[s.label].seen) {
      throw GenerationError("unseen class " + std::to_string(s.label) +
                            " appears in the train split");
    }
  }
  for (const Sample& s : test) {
    if (s.label >= classes.size()) throw GenerationError("test label out of range");
  }
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Generator gen(cfg);
  Dataset ds;
  ds.input_dim = cfg.input_dim;
  ds.text_dim = cfg.text_dim;
  const std::uint32_t classes = cfg.num_seen_classes + cfg.num_unseen_classes;
  for (std::uint32_t cid = 0; cid < classes; ++cid) {
    ds.classes.push_back(ClassLabel{cid, "class_" + std::to_string(cid), cid < cfg.num_seen_classes});
    TextEmbedding t;
    t.class_id = cid;
    t.w = gen.prototypes[cid];
    for (double& x : t.w) x = quantize_f32(x);
    ds.text.push_back(std::move(t));
  }
  for (std::uint32_t cid = 0; cid < cfg.num_seen_classes; ++cid) {
    for (std::uint32_t i = 0; i < cfg.samples_per_class; ++i) {
      ds.train.push_back(gen.sample(cid, kTrainTag, i));
    }
  }
  for (std::uint32_t cid = 0; cid < classes; ++cid) {
    for (std::uint32_t i = 0; i < cfg.test_samples_per_class; ++i) {
      ds.test.push_back(gen.sample(cid, kTestTag, i));
    }
  }
  ds.validate();
  return ds;
}

std::vector<double> clean_feature(const SynthConfig& cfg, bool visual, std::uint32_t class_id) {
  cfg.validate();
  Generator gen(cfg);
  if (class_id >= gen.prototypes.size()) throw ContractError("clean_feature: class out of range");
  const auto& m = visual ? gen.map_visual : gen.map_audio;
  std::vector<double> f = apply_map(m, cfg.input_dim, gen.prototypes[class_id]);
  for (double& x : f) x = quantize_f32(x);
  return f;
}

std::size_t mine_negative(const std::vector<const Sample*>& batch, std::size_t anchor_index,
                          std::mt19937_64& rng) {
  if (anchor_index >= batch.size()) throw ContractError("mine_negative: anchor out of range");
  const std::uint32_t anchor_label = batch[anchor_index]->label;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->label != anchor_label) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw MiningError("no different-label negative available in a batch of " +
                      std::to_string(batch.size()));
  }
  std::uniform_int_distribution<std::size_t> dist(0, candidates.size() - 1);
  return candidates[dist(rng)];
}

// --- file I/O ----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'A', 'A', 'N'};
constexpr std::uint32_t kVersion = 1;

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open " + path, 0);
  }

  std::uint64_t offset() const { return offset_; }

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(path_ + ": truncated while reading " + std::string(what),
                        offset_ + static_cast<std::uint64_t>(std::max<std::streamsize>(in_.gcount(), 0)));
    }
    offset_ += n;
  }

  std::uint32_t read_u32(const char* what) {
    std::uint32_t v;
    read(&v, sizeof(v), what);
    return v;
  }

  std::uint8_t read_u8(const char* what) {
    std::uint8_t v;
    read(&v, sizeof(v), what);
    return v;
  }

  std::vector<double> read_f32_vec(std::size_t n, const char* what) {
    std::vector<float> buf(n);
    read(buf.data(), n * sizeof(float), what);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(buf[i]);
    return out;
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path + " for writing");
  }
  void write(const void* src, std::size_t n) {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  }
  void write_u32(std::uint32_t v) { write(&v, sizeof(v)); }
  void write_u8(std::uint8_t v) { write(&v, sizeof(v)); }
  void write_f32_vec(const std::vector<double>& v) {
    std::vector<float> buf(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
    write(buf.data(), buf.size() * sizeof(float));
  }

 private:
  std::ofstream out_;
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void save_split_binary(const Dataset& ds, const std::vector<Sample>& samples,
                       const std::string& path) {
  ByteWriter w(path);
  w.write(kMagic, 4);
  w.write_u32(kVersion);
  w.write_u32(static_cast<std::uint32_t>(samples.size()));
  w.write_u32(ds.input_dim);
  w.write_u32(ds.text_dim);
  w.write_u32(static_cast<std::uint32_t>(ds.classes.size()));
  w.write_u32(ds.num_seen());
  for (std::size_t c = 0; c < ds.classes.size(); ++c) {
    w.write_f32_vec(ds.text[c].w);
    w.write_u8(ds.classes[c].seen ? 1 : 0);
  }
  for (const Sample& s : samples) {
    w.write_u32(s.label);
    w.write_f32_vec(s.audio);
    w.write_f32_vec(s.visual);
  }
}

void save_split_jsonl(const Dataset& ds, const std::vector<Sample>& samples,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  json header = {{"magic", "DAAN"},          {"version", kVersion},
                 {"num_samples", samples.size()}, {"input_dim", ds.input_dim},
                 {"text_dim", ds.text_dim},  {"num_classes", ds.classes.size()},
                 {"num_seen", ds.num_seen()}};
  out << header.dump() << "\n";
  for (std::size_t c = 0; c < ds.classes.size(); ++c) {
    json line = {{"class_id", c}, {"text", ds.text[c].w}, {"seen", ds.classes[c].seen}};
    out << line.dump() << "\n";
  }
  for (const Sample& s : samples) {
    json line = {{"label", s.label}, {"audio", s.audio}, {"visual", s.visual}};
    out << line.dump() << "\n";
  }
}

void load_split_binary(const std::string& path, std::vector<ClassLabel>& classes,
                       std::vector<TextEmbedding>& text, std::vector<Sample>& samples,
                       std::uint32_t& input_dim, std::uint32_t& text_dim) {
  ByteReader r(path);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path + ": bad magic", 0);
  const std::uint32_t version = r.read_u32("version");
  if (version != kVersion) {
    throw FormatError(path + ": unsupported version " + std::to_string(version), 4);
  }
  const std::uint32_t num_samples = r.read_u32("num_samples");
  input_dim = r.read_u32("input_dim");
  text_dim = r.read_u32("text_dim");
  const std::uint32_t num_classes = r.read_u32("num_classes");
  const std::uint32_t num_seen = r.read_u32("num_seen");
  if (input_dim == 0 || text_dim == 0 || num_classes == 0) {
    throw FormatError(path + ": degenerate dimensions in header", 8);
  }
  classes.clear();
  text.clear();
  std::uint32_t seen_count = 0;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    TextEmbedding t;
    t.class_id = c;
    t.w = r.read_f32_vec(text_dim, "class text embedding");
    const bool seen = r.read_u8("class seen flag") != 0;
    seen_count += seen ? 1 : 0;
    classes.push_back(ClassLabel{c, "class_" + std::to_string(c), seen});
    text.push_back(std::move(t));
  }
  if (seen_count != num_seen) {
    throw FormatError(path + ": num_seen disagrees with the class flags", r.offset());
  }
  samples.clear();
  samples.reserve(num_samples);
  for (std::uint32_t i = 0; i < num_samples; ++i) {
    Sample s;
    s.label = r.read_u32("sample label");
    if (s.label >= num_classes) {
      throw FormatError(path + ": label " + std::to_string(s.label) + " out of range",
                        r.offset() - sizeof(std::uint32_t));
    }
    s.audio = r.read_f32_vec(input_dim, "audio features");
    s.visual = r.read_f32_vec(input_dim, "visual features");
    samples.push_back(std::move(s));
  }
  if (!r.at_eof()) {
    throw FormatError(path + ": trailing bytes after declared payload", r.offset());
  }
}

void load_split_jsonl(const std::string& path, std::vector<ClassLabel>& classes,
                      std::vector<TextEmbedding>& text, std::vector<Sample>& samples,
                      std::uint32_t& input_dim, std::uint32_t& text_dim) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path, 0);
  std::string line;
  std::uint64_t offset = 0;
  auto next_line = [&](const char* what) {
    offset += line.empty() ? 0 : line.size() + 1;
    if (!std::getline(in, line)) {
      throw FormatError(path + ": truncated while reading " + std::string(what), offset);
    }
    return json::parse(line, nullptr, false);
  };
  json header = next_line("header");
  if (header.is_discarded() || header.value("magic", "") != "DAAN") {
    throw FormatError(path + ": bad magic", 0);
  }
  if (header.value("version", 0u) != kVersion) throw FormatError(path + ": unsupported version", 0);
  const std::uint32_t num_samples = header.at("num_samples").get<std::uint32_t>();
  input_dim = header.at("input_dim").get<std::uint32_t>();
  text_dim = header.at("text_dim").get<std::uint32_t>();
  const std::uint32_t num_classes = header.at("num_classes").get<std::uint32_t>();
  const std::uint32_t num_seen = header.at("num_seen").get<std::uint32_t>();
  classes.clear();
  text.clear();
  std::uint32_t seen_count = 0;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    json j = next_line("class line");
    if (j.is_discarded()) throw FormatError(path + ": malformed class line", offset);
    TextEmbedding t;
    t.class_id = j.at("class_id").get<std::uint32_t>();
    t.w = j.at("text").get<std::vector<double>>();
    if (t.w.size() != text_dim) {
      throw FormatError(path + ": class text dim disagrees with header", offset);
    }
    const bool seen = j.at("seen").get<bool>();
    seen_count += seen ? 1 : 0;
    classes.push_back(ClassLabel{t.class_id, "class_" + std::to_string(t.class_id), seen});
    text.push_back(std::move(t));
  }
  if (seen_count != num_seen) {
    throw FormatError(path + ": num_seen disagrees with the class flags", offset);
  }
  samples.clear();
  for (std::uint32_t i = 0; i < num_samples; ++i) {
    json j = next_line("sample line");
    if (j.is_discarded()) throw FormatError(path + ": malformed sample line", offset);
    Sample s;
    s.label = j.at("label").get<std::uint32_t>();
    s.audio = j.at("audio").get<std::vector<double>>();
    s.visual = j.at("visual").get<std::vector<double>>();
    if (s.audio.size() != input_dim || s.visual.size() != input_dim) {
      throw FormatError(path + ": sample feature dim disagrees with header", offset);
    }
    samples.push_back(std::move(s));
  }
}

}  // namespace

void save_split(const Dataset& ds, const std::vector<Sample>& samples, const std::string& path) {
  if (ends_with(path, ".jsonl")) {
    save_split_jsonl(ds, samples, path);
  } else {
    save_split_binary(ds, samples, path);
  }
}

void load_split(const std::string& path, std::vector<ClassLabel>& classes,
                std::vector<TextEmbedding>& text, std::vector<Sample>& samples,
                std::uint32_t& input_dim, std::uint32_t& text_dim) {
  if (ends_with(path, ".jsonl")) {
    load_split_jsonl(path, classes, text, samples, input_dim, text_dim);
  } else {
    load_split_binary(path, classes, text, samples, input_dim, text_dim);
  }
  // Ingestion normalization: our own files carry unit-norm embeddings already
  // (to float32 precision), which are kept bit-exact; anything further off is
  // renormalized.
  for (TextEmbedding& t : text) {
    double norm = 0.0;
    for (double x : t.w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= 0.0) throw FormatError(path + ": zero-norm text embedding", 0);
    if (std::abs(norm - 1.0) > 1e-3) {
      for (double& x : t.w) x /= norm;
    }
  }
}

void save_dataset(const Dataset& ds, const std::string& dir, const std::string& extension) {
  std::filesystem::create_directories(dir);
  save_split(ds, ds.train, dir + "/train." + extension);
  save_split(ds, ds.test, dir + "/test." + extension);
}

Dataset load_dataset(const std::string& dir, const std::string& extension) {
  Dataset ds;
  std::uint32_t in2 = 0, td2 = 0;
  std::vector<ClassLabel> classes2;
  std::vector<TextEmbedding> text2;
  load_split(dir + "/train." + extension, ds.classes, ds.text, ds.train, ds.input_dim, ds.text_dim);
  load_split(dir + "/test." + extension, classes2, text2, ds.test, in2, td2);
  if (in2 != ds.input_dim || td2 != ds.text_dim || classes2.size() != ds.classes.size()) {
    throw FormatError(dir + ": train/test headers disagree", 0);
  }
  for (std::size_t c = 0; c < ds.classes.size(); ++c) {
    if (classes2[c].seen != ds.classes[c].seen || text2[c].w != ds.text[c].w) {
      throw FormatError(dir + ": train/test class tables disagree", 0);
    }
  }
  ds.validate();
  return ds;
}

}  // namespace daan::data
