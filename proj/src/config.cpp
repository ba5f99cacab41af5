#include "sessionrec/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sessionrec/hash.hpp"

namespace sessionrec {

namespace {

using ojson = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_uint(std::string_view key, std::string_view v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected an integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  std::string copy(v);
  char* end = nullptr;
  const double out = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + copy +
                      "'");
  }
  return out;
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(IseKind k) {
  switch (k) {
    case IseKind::mean: return "mean";
    case IseKind::max: return "max";
    case IseKind::max_relu: return "max_relu";
    case IseKind::recurrent: return "recurrent";
    case IseKind::attention: return "attention";
  }
  return "?";
}

std::string_view to_string(SseBackbone b) {
  return b == SseBackbone::recurrent ? "recurrent" : "causal_attention";
}

IseKind parse_ise_kind(std::string_view s) {
  for (IseKind k : {IseKind::mean, IseKind::max, IseKind::max_relu, IseKind::recurrent,
                    IseKind::attention}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown ise.kind '" + std::string(s) + "'");
}

SseBackbone parse_sse_backbone(std::string_view s) {
  if (s == "recurrent") return SseBackbone::recurrent;
  if (s == "causal_attention") return SseBackbone::causal_attention;
  throw ConfigError("unknown sse.backbone '" + std::string(s) + "'");
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "batch_size") cfg.batch_size = parse_uint<std::size_t>(key, v);
  else if (key == "learning_rate") cfg.learning_rate = parse_real(key, v);
  else if (key == "epochs") cfg.epochs = parse_uint<std::size_t>(key, v);
  else if (key == "seed") cfg.seed = parse_uint<std::uint64_t>(key, v);
  else if (key == "validation_interval") cfg.validation_interval = parse_uint<std::size_t>(key, v);
  else if (key == "selection_k") cfg.selection_k = parse_uint<std::size_t>(key, v);
  else if (key == "threads") cfg.threads = parse_uint<std::size_t>(key, v);
  else if (key == "dropout" || key == "sse.dropout") cfg.sse.dropout = parse_real(key, v);
  else if (key == "model.d") cfg.d = parse_uint<std::size_t>(key, v);
  else if (key == "model.d_id") cfg.d_id = parse_uint<std::size_t>(key, v);
  else if (key == "model.d_feature") cfg.d_feature = parse_uint<std::size_t>(key, v);
  else if (key == "loss.alpha") cfg.loss.alpha = parse_real(key, v);
  else if (key == "loss.num_negatives") cfg.loss.num_negatives = parse_uint<std::size_t>(key, v);
  else if (key == "adam.beta1") cfg.adam.beta1 = parse_real(key, v);
  else if (key == "adam.beta2") cfg.adam.beta2 = parse_real(key, v);
  else if (key == "adam.eps") cfg.adam.eps = parse_real(key, v);
  else if (key == "ise.kind") cfg.ise.kind = parse_ise_kind(v);
  else if (key == "ise.layers") cfg.ise.layers = parse_uint<std::size_t>(key, v);
  else if (key == "ise.heads") cfg.ise.heads = parse_uint<std::size_t>(key, v);
  else if (key == "sse.backbone") cfg.sse.backbone = parse_sse_backbone(v);
  else if (key == "sse.layers") cfg.sse.layers = parse_uint<std::size_t>(key, v);
  else if (key == "sse.heads") cfg.sse.heads = parse_uint<std::size_t>(key, v);
  else if (key == "sse.max_positions") cfg.sse.max_positions = parse_uint<std::size_t>(key, v);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "seed = " << c.seed << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "learning_rate = " << fmt_real(c.learning_rate) << '\n'
     << "epochs = " << c.epochs << '\n'
     << "validation_interval = " << c.validation_interval << '\n'
     << "selection_k = " << c.selection_k << '\n'
     << "threads = " << c.threads << '\n'
     << "model.d = " << c.d << '\n'
     << "model.d_id = " << c.d_id << '\n'
     << "model.d_feature = " << c.d_feature << '\n'
     << "ise.kind = " << to_string(c.ise.kind) << '\n'
     << "ise.layers = " << c.ise.layers << '\n'
     << "ise.heads = " << c.ise.heads << '\n'
     << "sse.backbone = " << to_string(c.sse.backbone) << '\n'
     << "sse.layers = " << c.sse.layers << '\n'
     << "sse.heads = " << c.sse.heads << '\n'
     << "sse.dropout = " << fmt_real(c.sse.dropout) << '\n'
     << "sse.max_positions = " << c.sse.max_positions << '\n'
     << "loss.alpha = " << fmt_real(c.loss.alpha) << '\n'
     << "loss.num_negatives = " << c.loss.num_negatives << '\n'
     << "adam.beta1 = " << fmt_real(c.adam.beta1) << '\n'
     << "adam.beta2 = " << fmt_real(c.adam.beta2) << '\n'
     << "adam.eps = " << fmt_real(c.adam.eps) << '\n';
  return os.str();
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (c.d == 0) fail("model.d must be positive");
  if (c.d_feature == 0) fail("model.d_feature must be positive");
  if (!(c.sse.dropout >= 0.0 && c.sse.dropout < 1.0)) fail("sse.dropout must be in [0,1)");
  if (c.sse.layers == 0) fail("sse.layers must be positive");
  if (c.sse.heads == 0 || c.d % c.sse.heads != 0) fail("sse.heads must divide model.d");
  if (c.sse.max_positions == 0) fail("sse.max_positions must be positive");
  if (c.ise.layers == 0) fail("ise.layers must be positive");
  if (c.ise.kind == IseKind::attention && (c.ise.heads == 0 || c.d % c.ise.heads != 0)) {
    fail("ise.heads must divide model.d");
  }
  if (!(c.loss.alpha >= 0.0)) fail("loss.alpha must be >= 0");
  if (c.loss.num_negatives == 0) fail("loss.num_negatives must be >= 1");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0)) fail("adam.beta1 must be in [0,1)");
  if (!(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) fail("adam.beta2 must be in [0,1)");
  if (!(c.adam.eps > 0.0)) fail("adam.eps must be positive");
  if (c.threads == 0) fail("threads must be >= 1");
}

ModelConfig make_model_config(const TrainConfig& cfg, std::size_t num_items,
                              std::vector<FeatureSpec> features) {
  ModelConfig m;
  m.embedding.num_items = num_items;
  m.embedding.d = cfg.d;
  m.embedding.d_id = cfg.d_id == 0 ? cfg.d : cfg.d_id;
  m.embedding.d_feature = cfg.d_feature;
  m.embedding.features = std::move(features);
  m.ise = cfg.ise;
  m.sse = cfg.sse;
  return m;
}

std::string model_config_json(const ModelConfig& m) {
  ojson j;
  j["num_items"] = m.embedding.num_items;
  j["d"] = m.embedding.d;
  j["d_id"] = m.embedding.d_id;
  j["d_feature"] = m.embedding.d_feature;
  ojson feats = ojson::array();
  for (const auto& f : m.embedding.features) {
    feats.push_back(ojson{{"name", f.name}, {"cardinality", f.cardinality}});
  }
  j["features"] = feats;
  j["ise"] = ojson{{"kind", to_string(m.ise.kind)}, {"layers", m.ise.layers}, {"heads", m.ise.heads}};
  j["sse"] = ojson{{"backbone", to_string(m.sse.backbone)},
                   {"layers", m.sse.layers},
                   {"heads", m.sse.heads},
                   {"dropout", m.sse.dropout},
                   {"max_positions", m.sse.max_positions}};
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    ModelConfig m;
    m.embedding.num_items = j.at("num_items").get<std::size_t>();
    m.embedding.d = j.at("d").get<std::size_t>();
    m.embedding.d_id = j.at("d_id").get<std::size_t>();
    m.embedding.d_feature = j.at("d_feature").get<std::size_t>();
    for (const auto& f : j.at("features")) {
      m.embedding.features.push_back(
          {f.at("name").get<std::string>(), f.at("cardinality").get<std::size_t>()});
    }
    const auto& ise = j.at("ise");
    m.ise.kind = parse_ise_kind(ise.at("kind").get<std::string>());
    m.ise.layers = ise.at("layers").get<std::size_t>();
    m.ise.heads = ise.at("heads").get<std::size_t>();
    const auto& sse = j.at("sse");
    m.sse.backbone = parse_sse_backbone(sse.at("backbone").get<std::string>());
    m.sse.layers = sse.at("layers").get<std::size_t>();
    m.sse.heads = sse.at("heads").get<std::size_t>();
    m.sse.dropout = sse.at("dropout").get<double>();
    m.sse.max_positions = sse.at("max_positions").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model config: " + std::string(e.what()));
  }
}

std::uint64_t config_hash(const ModelConfig& cfg) {
  return fnv1a64(model_config_json(cfg));
}

}  // namespace sessionrec
