#include "plastisort/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace plastisort {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long parse_long(const std::string& v, const std::string& what) {
  try {
    size_t pos = 0;
    long r = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError(what + ": not an integer: '" + v + "'");
  }
}

unsigned long long parse_u64(const std::string& v, const std::string& what) {
  try {
    size_t pos = 0;
    unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError(what + ": not a non-negative integer: '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& what) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError(what + ": not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(what + ": not a boolean: '" + v + "'");
}

} // namespace

KvConfig::Section& KvConfig::section(const std::string& name) {
  for (auto& s : sections_)
    if (s.name == name) return s;
  sections_.push_back({name, {}});
  return sections_.back();
}

KvConfig KvConfig::parse_string(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string current = "";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty())
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty section name");
      cfg.section(current);
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (current.empty())
      throw ValidationError(origin + ":" + std::to_string(lineno) +
                            ": key outside of any [section]");
    cfg.set(current, key, value);
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

void KvConfig::set(const std::string& sec, const std::string& key, const std::string& value) {
  auto& s = section(sec);
  for (auto& kv : s.items)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  s.items.emplace_back(key, value);
}

void KvConfig::set_dotted(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValidationError("override must look like section.key=value: '" + assignment + "'");
  std::string path = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  size_t dot = path.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
    throw ValidationError("override key must be section.key: '" + path + "'");
  set(path.substr(0, dot), path.substr(dot + 1), value);
}

std::optional<std::string> KvConfig::get(const std::string& sec, const std::string& key) const {
  for (const auto& s : sections_)
    if (s.name == sec)
      for (const auto& kv : s.items)
        if (kv.first == key) return kv.second;
  return std::nullopt;
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& s : sections_) {
    out += "[" + s.name + "]\n";
    for (const auto& kv : s.items) out += kv.first + " = " + kv.second + "\n";
    out += "\n";
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> KvConfig::keys() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sections_)
    for (const auto& kv : s.items) out.emplace_back(s.name, kv.first);
  return out;
}

NetworkSpec parse_network_spec(const std::string& input, int classes,
                               const std::string& layers) {
  NetworkSpec spec;
  spec.name = "custom";
  spec.classes = classes;
  {
    // input = CxHxW
    int c = 0, h = 0, w = 0;
    if (std::sscanf(input.c_str(), "%dx%dx%d", &c, &h, &w) != 3)
      throw ValidationError("network input must be CxHxW, got '" + input + "'");
    spec.in_channels = c;
    spec.in_height = h;
    spec.in_width = w;
  }
  std::stringstream ss(layers);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(),
                               [](unsigned char c) { return std::isspace(c); }),
                token.end());
    if (token.empty()) continue;
    if (token == "relu") {
      spec.layers.push_back(LayerSpec::relu());
    } else if (token == "softmax-xent") {
      spec.layers.push_back(LayerSpec::softmax_xent());
    } else if (token == "lrn") {
      spec.layers.push_back(LayerSpec::lrn());
    } else if (token.rfind("lrn:", 0) == 0) {
      int n = 5;
      double alpha = 1e-4, beta = 0.75, k = 1.0;
      if (std::sscanf(token.c_str(), "lrn:%d:%lf:%lf:%lf", &n, &alpha, &beta, &k) < 1)
        throw ValidationError("bad lrn layer token: '" + token + "'");
      spec.layers.push_back(LayerSpec::lrn(n, alpha, beta, k));
    } else if (token.rfind("conv:", 0) == 0) {
      int oc = 0, k = 0, s = 1, p = 0;
      if (std::sscanf(token.c_str(), "conv:%dk%ds%dp%d", &oc, &k, &s, &p) != 4)
        throw ValidationError("bad conv layer token: '" + token +
                              "' (want conv:<out>k<kernel>s<stride>p<pad>)");
      spec.layers.push_back(LayerSpec::conv(oc, k, s, p));
    } else if (token.rfind("maxpool:", 0) == 0) {
      int k = 0, s = 0;
      if (std::sscanf(token.c_str(), "maxpool:k%ds%d", &k, &s) != 2)
        throw ValidationError("bad maxpool layer token: '" + token +
                              "' (want maxpool:k<window>s<stride>)");
      spec.layers.push_back(LayerSpec::maxpool(k, s));
    } else if (token.rfind("dropout:", 0) == 0) {
      double r = 0.0;
      if (std::sscanf(token.c_str(), "dropout:%lf", &r) != 1)
        throw ValidationError("bad dropout layer token: '" + token + "'");
      spec.layers.push_back(LayerSpec::dropout(r));
    } else if (token.rfind("fc:", 0) == 0) {
      int o = 0;
      if (std::sscanf(token.c_str(), "fc:%d", &o) != 1)
        throw ValidationError("bad fc layer token: '" + token + "'");
      spec.layers.push_back(LayerSpec::fc(o));
    } else {
      throw ValidationError("unknown layer token: '" + token + "'");
    }
  }
  spec.validate();
  return spec;
}

namespace {

const std::set<std::pair<std::string, std::string>>& known_keys() {
  static const std::set<std::pair<std::string, std::string>> keys = {
      {"train", "network"},        {"train", "dataset"},
      {"train", "batch_size"},     {"train", "max_epochs"},
      {"train", "seed"},           {"train", "val_fraction"},
      {"train", "test_per_class"}, {"train", "checked"},
      {"solver", "kind"},          {"solver", "learning_rate"},
      {"solver", "momentum"},      {"solver", "beta1"},
      {"solver", "beta2"},         {"solver", "epsilon"},
      {"solver", "decay"},         {"shuffle", "policy"},
      {"preprocess", "tiles_x"},   {"preprocess", "tiles_y"},
      {"preprocess", "clip_limit"},{"preprocess", "pad_mode"},
      {"preprocess", "pad_value"}, {"preprocess", "blur_threshold"},
      {"network", "input"},        {"network", "classes"},
      {"network", "layers"},
      // sections owned by other subcommands, legal to carry alongside
      {"segment", "polarity"},     {"segment", "connectivity"},
      {"segment", "min_area_fraction"}, {"segment", "crop_pad"},
      {"gen", "images_per_class"}, {"gen", "trays"},
      {"gen", "piece_min"},        {"gen", "piece_max"},
      {"gen", "corr_a"},           {"gen", "corr_b"},
      {"gen", "texture_amp"},      {"gen", "base_lo"},
      {"gen", "base_hi"},          {"gen", "background"},
      {"gen", "bg_noise"},         {"gen", "margin"},
      {"gen", "tray_width"},       {"gen", "tray_height"},
      {"gen", "seed"},
      // resolved-snapshot bookkeeping
      {"run", "subcommand"},       {"run", "image"},
      {"run", "weights"},          {"run", "axis"},
      {"run", "role"},             {"run", "runs"},
  };
  return keys;
}

} // namespace

TrainConfig train_config_from(const KvConfig& cfg) {
  for (const auto& k : cfg.keys())
    if (!known_keys().count(k))
      throw ValidationError("unknown config key: " + k.first + "." + k.second);

  TrainConfig tc;
  if (auto v = cfg.get("train", "network")) tc.network = *v;
  if (auto v = cfg.get("train", "dataset")) tc.dataset_root = *v;
  if (auto v = cfg.get("train", "batch_size"))
    tc.batch_size = static_cast<int>(parse_long(*v, "train.batch_size"));
  if (auto v = cfg.get("train", "max_epochs"))
    tc.max_epochs = static_cast<int>(parse_long(*v, "train.max_epochs"));
  if (auto v = cfg.get("train", "seed")) tc.seed = parse_u64(*v, "train.seed");
  if (auto v = cfg.get("train", "val_fraction"))
    tc.val_fraction = parse_double(*v, "train.val_fraction");
  if (auto v = cfg.get("train", "test_per_class"))
    tc.test_per_class = static_cast<int>(parse_long(*v, "train.test_per_class"));
  if (auto v = cfg.get("train", "checked")) tc.checked = parse_bool(*v, "train.checked");

  SolverKind kind = SolverKind::Adam;
  if (auto v = cfg.get("solver", "kind")) kind = solver_kind_from_string(*v);
  tc.solver = SolverConfig::defaults(kind);
  if (auto v = cfg.get("solver", "learning_rate"))
    tc.solver.learning_rate = parse_double(*v, "solver.learning_rate");
  if (auto v = cfg.get("solver", "momentum"))
    tc.solver.momentum = parse_double(*v, "solver.momentum");
  if (auto v = cfg.get("solver", "beta1")) tc.solver.beta1 = parse_double(*v, "solver.beta1");
  if (auto v = cfg.get("solver", "beta2")) tc.solver.beta2 = parse_double(*v, "solver.beta2");
  if (auto v = cfg.get("solver", "epsilon"))
    tc.solver.epsilon = parse_double(*v, "solver.epsilon");
  if (auto v = cfg.get("solver", "decay")) tc.solver.decay = parse_double(*v, "solver.decay");

  if (auto v = cfg.get("shuffle", "policy")) tc.shuffle = shuffle_policy_from_string(*v);

  if (auto v = cfg.get("preprocess", "tiles_x"))
    tc.pre.clahe.tiles_x = static_cast<int>(parse_long(*v, "preprocess.tiles_x"));
  if (auto v = cfg.get("preprocess", "tiles_y"))
    tc.pre.clahe.tiles_y = static_cast<int>(parse_long(*v, "preprocess.tiles_y"));
  if (auto v = cfg.get("preprocess", "clip_limit"))
    tc.pre.clahe.clip_limit = parse_double(*v, "preprocess.clip_limit");
  if (auto v = cfg.get("preprocess", "pad_mode")) {
    if (*v == "replicate")
      tc.pre.pad_mode = PadMode::ReplicateEdge;
    else if (*v == "constant")
      tc.pre.pad_mode = PadMode::Constant;
    else
      throw ValidationError("preprocess.pad_mode must be replicate or constant");
  }
  if (auto v = cfg.get("preprocess", "pad_value"))
    tc.pre.pad_value = static_cast<uint8_t>(parse_long(*v, "preprocess.pad_value"));
  if (auto v = cfg.get("preprocess", "blur_threshold"))
    tc.pre.blur_threshold = parse_double(*v, "preprocess.blur_threshold");

  if (tc.network == "custom") {
    auto input = cfg.get("network", "input");
    auto layers = cfg.get("network", "layers");
    if (!input || !layers)
      throw ValidationError("network=custom needs [network] input= and layers=");
    int classes = 2;
    if (auto v = cfg.get("network", "classes"))
      classes = static_cast<int>(parse_long(*v, "network.classes"));
    tc.custom_network = parse_network_spec(*input, classes, *layers);
  }
  return tc;
}

KvConfig train_config_to_kv(const TrainConfig& tc) {
  KvConfig cfg;
  char buf[64];
  cfg.set("train", "network", tc.network);
  cfg.set("train", "dataset", tc.dataset_root.string());
  cfg.set("train", "batch_size", std::to_string(tc.batch_size));
  cfg.set("train", "max_epochs", std::to_string(tc.max_epochs));
  cfg.set("train", "seed", std::to_string(tc.seed));
  std::snprintf(buf, sizeof(buf), "%.17g", tc.val_fraction);
  cfg.set("train", "val_fraction", buf);
  cfg.set("train", "test_per_class", std::to_string(tc.test_per_class));
  cfg.set("train", "checked", tc.checked ? "true" : "false");

  cfg.set("solver", "kind", solver_kind_name(tc.solver.kind));
  auto setd = [&](const char* sec, const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    cfg.set(sec, key, buf);
  };
  setd("solver", "learning_rate", tc.solver.learning_rate);
  setd("solver", "momentum", tc.solver.momentum);
  setd("solver", "beta1", tc.solver.beta1);
  setd("solver", "beta2", tc.solver.beta2);
  setd("solver", "epsilon", tc.solver.epsilon);
  setd("solver", "decay", tc.solver.decay);

  cfg.set("shuffle", "policy", shuffle_policy_name(tc.shuffle));

  cfg.set("preprocess", "tiles_x", std::to_string(tc.pre.clahe.tiles_x));
  cfg.set("preprocess", "tiles_y", std::to_string(tc.pre.clahe.tiles_y));
  setd("preprocess", "clip_limit", tc.pre.clahe.clip_limit);
  cfg.set("preprocess", "pad_mode",
          tc.pre.pad_mode == PadMode::ReplicateEdge ? "replicate" : "constant");
  cfg.set("preprocess", "pad_value", std::to_string(static_cast<int>(tc.pre.pad_value)));
  setd("preprocess", "blur_threshold", tc.pre.blur_threshold);

  if (tc.network == "custom" && tc.custom_network) {
    const NetworkSpec& n = *tc.custom_network;
    std::snprintf(buf, sizeof(buf), "%lldx%lldx%lld", static_cast<long long>(n.in_channels),
                  static_cast<long long>(n.in_height), static_cast<long long>(n.in_width));
    cfg.set("network", "input", buf);
    cfg.set("network", "classes", std::to_string(n.classes));
    std::string layers;
    for (size_t i = 0; i < n.layers.size(); ++i) {
      const LayerSpec& l = n.layers[i];
      if (i) layers += ", ";
      switch (l.kind) {
        case LayerKind::Conv:
          std::snprintf(buf, sizeof(buf), "conv:%dk%ds%dp%d", l.out_channels, l.kernel,
                        l.stride, l.pad);
          layers += buf;
          break;
        case LayerKind::Relu: layers += "relu"; break;
        case LayerKind::MaxPool:
          std::snprintf(buf, sizeof(buf), "maxpool:k%ds%d", l.window, l.pool_stride);
          layers += buf;
          break;
        case LayerKind::Lrn:
          std::snprintf(buf, sizeof(buf), "lrn:%d:%g:%g:%g", l.lrn_n, l.lrn_alpha, l.lrn_beta,
                        l.lrn_k);
          layers += buf;
          break;
        case LayerKind::Dropout:
          std::snprintf(buf, sizeof(buf), "dropout:%g", l.rate);
          layers += buf;
          break;
        case LayerKind::Fc:
          std::snprintf(buf, sizeof(buf), "fc:%d", l.out_features);
          layers += buf;
          break;
        case LayerKind::SoftmaxXent: layers += "softmax-xent"; break;
      }
    }
    cfg.set("network", "layers", layers);
  }
  return cfg;
}

} // namespace plastisort
