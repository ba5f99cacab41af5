#include "sessionrec/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace sessionrec {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'R', 'E', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
// Guards against absurd allocations when a length field is corrupt.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void tensor(const Tensor<float>& t) {
    u64(t.rows());
    u64(t.cols());
    raw(t.data(), t.size() * sizeof(float));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  void raw(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated while reading ") + what);
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v = 0;
    raw(&v, sizeof v, what);
    return v;
  }
  std::string str(const char* what) {
    const std::uint64_t n = u64(what);
    if (n > kMaxElements) fail(std::string("implausible length for ") + what);
    std::string s(n, '\0');
    raw(s.data(), n, what);
    return s;
  }
  Tensor<float> tensor(const char* what) {
    const std::uint64_t rows = u64(what);
    const std::uint64_t cols = u64(what);
    if (rows > kMaxElements || cols > kMaxElements || rows * cols > kMaxElements) {
      fail(std::string("implausible shape for ") + what);
    }
    Tensor<float> t(rows, cols);
    raw(t.data(), t.size() * sizeof(float), what);
    return t;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw CheckpointError("checkpoint " + path_ + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp);
    Writer w(out);
    w.raw(kMagic.data(), kMagic.size());
    w.raw(&kVersion, sizeof kVersion);
    w.str(model_config_json(ckpt.model));
    w.u64(ckpt.config_hash);
    w.u64(ckpt.stats_hash);
    w.u64(ckpt.epoch);
    w.u64(ckpt.optimizer_steps);
    w.str(ckpt.train_config);
    w.u64(ckpt.tensors.size());
    for (const auto& t : ckpt.tensors) {
      w.str(t.name);
      w.tensor(t.value);
      w.tensor(t.first_moment);
      w.tensor(t.second_moment);
    }
    w.raw(kMagic.data(), kMagic.size());
    if (!out.flush()) throw CheckpointError("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size(), "magic header");
  if (magic != kMagic) r.fail("not a checkpoint file (bad magic header)");
  std::uint32_t version = 0;
  r.raw(&version, sizeof version, "format version");
  if (version != kVersion) {
    r.fail("unsupported format version " + std::to_string(version));
  }
  Checkpoint c;
  const std::string model_json = r.str("model config");
  try {
    c.model = model_config_from_json(model_json);
  } catch (const std::exception& e) {
    r.fail(std::string("bad model config: ") + e.what());
  }
  c.config_hash = r.u64("config hash");
  if (c.config_hash != config_hash(c.model)) r.fail("config hash does not match stored config");
  c.stats_hash = r.u64("dataset stats hash");
  c.epoch = r.u64("epoch");
  c.optimizer_steps = r.u64("optimizer steps");
  c.train_config = r.str("train config");
  const std::uint64_t count = r.u64("tensor count");
  if (count > 1'000'000) r.fail("implausible tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str("tensor name");
    t.value = r.tensor("tensor value");
    t.first_moment = r.tensor("first moment");
    t.second_moment = r.tensor("second moment");
    c.tensors.push_back(std::move(t));
  }
  std::array<char, 8> trailer{};
  r.raw(trailer.data(), trailer.size(), "trailer");
  if (trailer != kMagic) r.fail("bad trailer");
  return c;
}

Checkpoint capture_checkpoint(const Model<float>& model, const Adam<float>* optimizer,
                              std::uint64_t epoch, std::uint64_t stats_hash,
                              const std::string& train_config) {
  Checkpoint c;
  c.model = model.config();
  c.config_hash = config_hash(c.model);
  c.stats_hash = stats_hash;
  c.epoch = epoch;
  c.train_config = train_config;
  const auto& params = model.params();
  if (optimizer != nullptr) c.optimizer_steps = optimizer->steps();
  for (std::size_t i = 0; i < params.count(); ++i) {
    NamedTensor t;
    t.name = params[i].name;
    t.value = params[i].value;
    if (optimizer != nullptr) {
      t.first_moment = optimizer->first_moments()[i];
      t.second_moment = optimizer->second_moments()[i];
    }
    c.tensors.push_back(std::move(t));
  }
  return c;
}

std::string first_config_difference(const ModelConfig& expected, const ModelConfig& found) {
  const auto a = nlohmann::json::parse(model_config_json(expected));
  const auto b = nlohmann::json::parse(model_config_json(found));
  const auto patch = nlohmann::json::diff(a, b);
  if (patch.empty()) return "";
  std::string path = patch.at(0).at("path").get<std::string>();
  // JSON pointer "/sse/layers" -> "sse.layers"
  if (!path.empty() && path.front() == '/') path.erase(0, 1);
  for (auto& ch : path) {
    if (ch == '/') ch = '.';
  }
  return path;
}

namespace {

std::string field_value(const ModelConfig& cfg, const std::string& dotted) {
  auto j = nlohmann::json::parse(model_config_json(cfg));
  std::string pointer = "/" + dotted;
  for (auto& ch : pointer) {
    if (ch == '.') ch = '/';
  }
  const nlohmann::json::json_pointer ptr(pointer);
  return j.contains(ptr) ? j.at(ptr).dump() : "(absent)";
}

}  // namespace

void restore_model(Model<float>& model, const Checkpoint& ckpt, bool force) {
  const std::string diff = first_config_difference(model.config(), ckpt.model);
  if (!diff.empty() && !force) {
    throw CheckpointError("checkpoint config mismatch in field '" + diff + "': checkpoint has " +
                          field_value(ckpt.model, diff) + ", expected " +
                          field_value(model.config(), diff));
  }
  auto& params = model.params();
  if (ckpt.tensors.size() != params.count()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model has " + std::to_string(params.count()));
  }
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params[i];
    const auto& t = ckpt.tensors[i];
    if (t.name != p.name || !t.value.same_shape(p.value)) {
      throw CheckpointError("checkpoint tensor '" + t.name + "' " + t.value.shape_string() +
                            " does not match parameter '" + p.name + "' " +
                            p.value.shape_string());
    }
  }
  for (std::size_t i = 0; i < params.count(); ++i) params[i].value = ckpt.tensors[i].value;
}

void restore_optimizer(Adam<float>& optimizer, const Checkpoint& ckpt) {
  auto& m = optimizer.first_moments();
  auto& v = optimizer.second_moments();
  if (ckpt.tensors.size() != m.size()) throw CheckpointError("optimizer state size mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    if (t.first_moment.empty()) throw CheckpointError("checkpoint has no optimizer state");
    if (!t.first_moment.same_shape(m[i]) || !t.second_moment.same_shape(v[i])) {
      throw CheckpointError("optimizer state shape mismatch for '" + t.name + "'");
    }
    m[i] = t.first_moment;
    v[i] = t.second_moment;
  }
  optimizer.set_steps(ckpt.optimizer_steps);
}

}  // namespace sessionrec
