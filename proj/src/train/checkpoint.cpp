#include "wtal/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wtal/errors.hpp"

namespace wtal::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

nlohmann::ordered_json to_json(const model::ModelConfig& c) {
  return {{"num_classes", c.num_classes},
          {"feature_dim", c.feature_dim},
          {"embed_dim", c.embed_dim},
          {"attention_hidden", c.attention_hidden},
          {"text_heads", c.text_heads},
          {"text_ff", c.text_ff},
          {"context_tokens", c.context_tokens},
          {"word_dim", c.word_dim},
          {"recon_dim", c.recon_dim},
          {"head_hidden", c.head_hidden},
          {"vocab_size", c.vocab_size},
          {"max_key_length", c.max_key_length},
          {"temperature", c.temperature},
          {"dropout", c.dropout}};
}

model::ModelConfig model_config_from_json(const nlohmann::json& j) {
  model::ModelConfig c;
  try {
    c.num_classes = j.at("num_classes");
    c.feature_dim = j.at("feature_dim");
    c.embed_dim = j.at("embed_dim");
    c.attention_hidden = j.at("attention_hidden");
    c.text_heads = j.at("text_heads");
    c.text_ff = j.at("text_ff");
    c.context_tokens = j.at("context_tokens");
    c.word_dim = j.at("word_dim");
    c.recon_dim = j.at("recon_dim");
    c.head_hidden = j.at("head_hidden");
    c.vocab_size = j.at("vocab_size");
    c.max_key_length = j.at("max_key_length");
    c.temperature = j.at("temperature");
    c.dropout = j.at("dropout");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"iterations", c.iterations},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"mu1", c.mu1},
          {"topk_divisor", c.topk_divisor},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"pseudo_refresh", c.pseudo_refresh},
          {"enable_ksm", c.enable_ksm},
          {"enable_csr", c.enable_csr},
          {"enable_distill", c.enable_distill},
          {"enable_locloss", c.enable_locloss},
          {"psi", to_string(c.psi_mode)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.lr = j.at("lr");
    c.weight_decay = j.at("weight_decay");
    c.iterations = j.at("iterations");
    c.lambda1 = j.at("lambda1");
    c.lambda2 = j.at("lambda2");
    c.mu1 = j.at("mu1");
    c.topk_divisor = j.at("topk_divisor");
    c.seed = j.at("seed");
    c.batch_size = j.at("batch_size");
    c.pseudo_refresh = j.at("pseudo_refresh");
    c.enable_ksm = j.at("enable_ksm");
    c.enable_csr = j.at("enable_csr");
    c.enable_distill = j.at("enable_distill");
    c.enable_locloss = j.at("enable_locloss");
    c.psi_mode = parse_psi_mode(j.at("psi").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_tensor(std::string& out, const std::string& name, const nn::Shape& shape, std::span<const double> values) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::uint64_t>(out, d);
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
}

std::string rng_state(const nn::Rng& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PathError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw PathError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string serialise(const nlohmann::ordered_json& header, const model::Model& model, const Trainer* trainer) {
  std::vector<std::tuple<std::string, nn::Shape, std::span<const double>>> tensors;
  const auto params = model.parameters();
  for (const auto& [name, t] : params) tensors.emplace_back(name, t.shape(), t.data());
  if (trainer) {
    const auto add_moments = [&](const char* group, const model::ParamList& list, const nn::AdamState& st) {
      if (st.m.empty()) return;
      for (std::size_t i = 0; i < list.size(); ++i) {
        tensors.emplace_back(std::string("adam.") + group + ".m." + list[i].first, list[i].second.shape(), st.m[i]);
        tensors.emplace_back(std::string("adam.") + group + ".v." + list[i].first, list[i].second.shape(), st.v[i]);
      }
    };
    add_moments("match", trainer->match_parameters(), trainer->state().match_adam);
    add_moments("rec", trainer->rec_parameters(), trainer->state().rec_adam);
  }
  std::string out = "WTCK";
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string h = header.dump();
  put<std::uint64_t>(out, h.size());
  out += h;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, shape, values] : tensors) put_tensor(out, name, shape, values);
  return out;
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) need(n * sizeof(double), what);
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated reading ") + what + ": need " + std::to_string(n) +
                            " bytes, " + std::to_string(bytes_.size() - pos_) + " left",
                        pos_);
    }
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const model::Model& model, const Trainer& trainer) {
  const auto& st = trainer.state();
  nlohmann::ordered_json header{{"model", to_json(model.config)},
                                {"train", to_json(trainer.config())},
                                {"iteration", st.iteration},
                                {"adam_steps", {{"match", st.match_adam.step}, {"rec", st.rec_adam.step}}},
                                {"rng",
                                 {{"data", rng_state(st.data_rng)},
                                  {"dropout", rng_state(st.dropout_rng)},
                                  {"mask", rng_state(st.mask_rng)}}},
                                {"order", st.order},
                                {"cursor", st.cursor}};
  write_file(path, serialise(header, model, &trainer));
}

void save_checkpoint(const std::filesystem::path& path, const model::Model& model) {
  nlohmann::ordered_json header{{"model", to_json(model.config)}, {"iteration", 0}};
  write_file(path, serialise(header, model, nullptr));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  Reader r(buf.str());
  if (r.str(4, "magic") != "WTCK") throw FormatError("not a checkpoint (bad magic)", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto header_len = r.get<std::uint64_t>("header length");
  const auto header_pos = r.pos();
  LoadedCheckpoint ck;
  try {
    ck.header = nlohmann::json::parse(r.str(header_len, "header"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what(), header_pos);
  }
  ck.model = model::Model::init(model_config_from_json(ck.header.at("model")), 0);
  if (ck.header.contains("train")) ck.train = train_config_from_json(ck.header.at("train"));
  ck.iteration = ck.header.value("iteration", 0LL);

  std::map<std::string, nn::Tensor> params;
  for (const auto& [name, t] : ck.model.parameters()) params.emplace(name, t);
  const auto count = r.get<std::uint32_t>("tensor count");
  std::size_t seen = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto at = r.pos();
    const auto name = r.str(r.get<std::uint32_t>("name length"), "name");
    nn::Shape shape(r.get<std::uint32_t>("rank"));
    for (auto& d : shape) d = r.get<std::uint64_t>("dimension");
    auto values = r.doubles(nn::numel_of(shape), "tensor values");
    auto it = params.find(name);
    if (it == params.end()) {
      ck.extra.emplace(name, nn::Tensor::from(shape, std::move(values)));
      continue;
    }
    if (it->second.shape() != shape) {
      throw FormatError("checkpoint tensor " + name + " has shape " + nn::shape_str(shape) + ", model expects " +
                            nn::shape_str(it->second.shape()),
                        at);
    }
    std::copy(values.begin(), values.end(), it->second.mutable_data().begin());
    ++seen;
  }
  if (seen != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(seen) + " of " + std::to_string(params.size()) +
                      " model parameters");
  }
  if (!r.done()) throw FormatError("trailing bytes after last tensor", r.pos());
  return ck;
}

void restore_trainer(Trainer& trainer, const LoadedCheckpoint& ck) {
  auto& st = trainer.state();
  st.iteration = ck.iteration;
  const auto& h = ck.header;
  if (h.contains("rng")) {
    std::istringstream(h["rng"]["data"].get<std::string>()) >> st.data_rng;
    std::istringstream(h["rng"]["dropout"].get<std::string>()) >> st.dropout_rng;
    std::istringstream(h["rng"]["mask"].get<std::string>()) >> st.mask_rng;
  }
  if (h.contains("order")) st.order = h["order"].get<std::vector<std::size_t>>();
  st.cursor = h.value("cursor", std::size_t{0});
  const auto restore = [&](const char* group, const model::ParamList& list, nn::AdamState& adam, long long steps) {
    adam = {};
    adam.step = steps;
    if (steps == 0) return;
    for (const auto& [name, t] : list) {
      auto m = ck.extra.find(std::string("adam.") + group + ".m." + name);
      auto v = ck.extra.find(std::string("adam.") + group + ".v." + name);
      if (m == ck.extra.end() || v == ck.extra.end()) {
        throw FormatError(std::string("checkpoint lacks ") + group + " optimiser state for " + name);
      }
      adam.m.emplace_back(m->second.data().begin(), m->second.data().end());
      adam.v.emplace_back(v->second.data().begin(), v->second.data().end());
    }
  };
  if (h.contains("adam_steps")) {
    restore("match", trainer.match_parameters(), st.match_adam, h["adam_steps"]["match"].get<long long>());
    restore("rec", trainer.rec_parameters(), st.rec_adam, h["adam_steps"]["rec"].get<long long>());
  }
}

}  // namespace wtal::train
