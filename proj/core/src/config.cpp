#include "byhd/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "byhd/error.hpp"

namespace byhd {

namespace {

enum class KeyType { boolean, integer, real, text, choice };

const char* type_name(KeyType t) {
  switch (t) {
    case KeyType::boolean: return "bool (true|false)";
    case KeyType::integer: return "integer";
    case KeyType::real: return "float";
    case KeyType::text: return "string";
    case KeyType::choice: return "choice";
  }
  return "?";
}

struct Key {
  const char* section;
  const char* name;
  KeyType type;
  std::vector<std::string> choices;
  const char* doc;
  std::function<void(RunConfig&, const std::string&)> set;  // value already type-checked
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest form that round-trips.
  for (int p = 1; p <= 17; ++p) {
    char t[64];
    std::snprintf(t, sizeof t, "%.*g", p, v);
    if (std::strtod(t, nullptr) == v) return t;
  }
  return buf;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

long long as_int(const std::string& s) {
  long long v = 0;
  parse_int(s, v);
  return v;
}

double as_real(const std::string& s) {
  double v = 0;
  parse_real(s, v);
  return v;
}

bool as_bool(const std::string& s) {
  bool v = false;
  parse_bool(s, v);
  return v;
}

std::string b2s(bool b) { return b ? "true" : "false"; }

#define KEY_REAL(sec, field, doc)                                                   \
  Key{sec, #field, KeyType::real, {}, doc,                                          \
      [](RunConfig& c, const std::string& v) { c.field = as_real(v); },             \
      [](const RunConfig& c) { return fmt_real(c.field); }}
#define KEY_INT(sec, field, doc)                                                    \
  Key{sec, #field, KeyType::integer, {}, doc,                                       \
      [](RunConfig& c, const std::string& v) {                                      \
        c.field = static_cast<decltype(c.field)>(as_int(v));                        \
      },                                                                            \
      [](const RunConfig& c) { return std::to_string(c.field); }}
#define KEY_BOOL(sec, field, doc)                                                   \
  Key{sec, #field, KeyType::boolean, {}, doc,                                       \
      [](RunConfig& c, const std::string& v) { c.field = as_bool(v); },             \
      [](const RunConfig& c) { return b2s(c.field); }}
#define KEY_TEXT(sec, field, doc)                                                   \
  Key{sec, #field, KeyType::text, {}, doc,                                          \
      [](RunConfig& c, const std::string& v) { c.field = v; },                      \
      [](const RunConfig& c) { return c.field; }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"model", "variant", KeyType::choice, {"ghost", "conv", "single-conv"},
          "backbone variant; single-conv builds one probe convolution",
          [](RunConfig& c, const std::string& v) { c.variant = v; },
          [](const RunConfig& c) { return c.variant; }},
      KEY_REAL("model", width_multiple, "channel multiplier"),
      KEY_REAL("model", depth_multiple, "block-repeat multiplier"),
      KEY_INT("model", num_classes, "number of object classes"),
      KEY_INT("model", input_size, "square input size in pixels, multiple of 32"),
      KEY_BOOL("model", use_ca, "coordinate attention in the neck"),
      KEY_BOOL("model", use_sc, "self-calibrated convolution inside SPPF"),
      KEY_BOOL("model", use_dfc, "DFC attention in ghost bottlenecks"),
      KEY_INT("model", probe_c_in, "single-conv input channels"),
      KEY_INT("model", probe_c_out, "single-conv output channels"),
      KEY_INT("model", probe_kernel, "single-conv kernel size"),

      Key{"optimizer", "optimizer", KeyType::choice, {"sgd", "gam"}, "update rule",
          [](RunConfig& c, const std::string& v) {
            c.optimizer = v == "gam" ? OptimizerKind::gam : OptimizerKind::sgd;
          },
          [](const RunConfig& c) {
            return std::string(c.optimizer == OptimizerKind::gam ? "gam" : "sgd");
          }},
      KEY_REAL("optimizer", lr, "learning rate"),
      KEY_REAL("optimizer", momentum, "heavy-ball momentum in [0, 1)"),
      KEY_REAL("optimizer", weight_decay, "L2 weight decay"),
      KEY_REAL("optimizer", rho, "gam perturbation radius"),
      KEY_REAL("optimizer", alpha, "gam weight of the flatness gradient"),
      KEY_REAL("optimizer", xi, "gam normalization guard"),
      KEY_REAL("optimizer", fd_step, "Hessian-vector finite-difference step (relative)"),
      Key{"optimizer", "schedule", KeyType::choice, {"constant", "cosine"},
          "decay applied to lr and rho",
          [](RunConfig& c, const std::string& v) {
            c.schedule = v == "cosine" ? Schedule::cosine : Schedule::constant;
          },
          [](const RunConfig& c) {
            return std::string(c.schedule == Schedule::cosine ? "cosine" : "constant");
          }},

      KEY_INT("optimizer", warmup_steps, "steps of linear lr warmup"),

      KEY_INT("train", epochs, "training epochs"),
      KEY_INT("train", batch_size, "images per step"),
      KEY_INT("train", max_steps, "stop after this many steps (0 = no cap)"),
      KEY_INT("train", seed, "seed for init, split, order and augmentation"),
      KEY_REAL("train", split, "training fraction of the dataset"),
      KEY_BOOL("train", augment, "horizontal flip and scale jitter"),
      KEY_REAL("train", conf_thresh, "confidence floor for evaluation detections"),
      KEY_REAL("train", nms_iou, "NMS IoU threshold"),

      KEY_TEXT("paths", data, "dataset directory"),
      KEY_TEXT("paths", out, "output directory for logs and checkpoints"),
  };
  return table;
}

#undef KEY_REAL
#undef KEY_INT
#undef KEY_BOOL
#undef KEY_TEXT

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string nearest_key(const std::string& name) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (const auto& k : keys()) {
    const auto d = edit_distance(name, k.name);
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  return best;
}

void apply(RunConfig& cfg, const Key& key, const std::string& value, const std::string& where) {
  auto mismatch = [&]() {
    return ConfigError(where + "key '" + key.name + "' expects " + type_name(key.type) +
                       ", got '" + value + "'");
  };
  switch (key.type) {
    case KeyType::boolean: {
      bool b;
      if (!parse_bool(value, b)) throw mismatch();
      break;
    }
    case KeyType::integer: {
      long long v;
      if (!parse_int(value, v)) throw mismatch();
      break;
    }
    case KeyType::real: {
      double v;
      if (!parse_real(value, v)) throw mismatch();
      break;
    }
    case KeyType::text:
      break;
    case KeyType::choice:
      if (std::find(key.choices.begin(), key.choices.end(), value) == key.choices.end()) {
        std::string opts;
        for (const auto& c : key.choices) opts += (opts.empty() ? "" : "|") + c;
        throw ConfigError(where + "key '" + key.name + "' expects one of " + opts + ", got '" +
                          value + "'");
      }
      break;
  }
  key.set(cfg, value);
}

}  // namespace

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ModelSpec RunConfig::model_spec() const {
  if (variant == "single-conv") {
    throw ConfigError("variant single-conv has no detector model");
  }
  ModelSpec s;
  s.variant = variant == "conv" ? Variant::conv : Variant::ghost;
  s.width_multiple = width_multiple;
  s.depth_multiple = depth_multiple;
  s.num_classes = num_classes;
  s.input_size = static_cast<int>(input_size);
  s.use_ca = use_ca;
  s.use_sc = use_sc;
  s.use_dfc = use_dfc;
  return s;
}

SgdConfig RunConfig::sgd_config() const {
  SgdConfig s;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

GamConfig RunConfig::gam_config() const {
  GamConfig g;
  g.base = sgd_config();
  g.rho = rho;
  g.alpha = alpha;
  g.xi = xi;
  g.fd_step = fd_step;
  g.batch_size = static_cast<int>(batch_size);
  return g;
}

void RunConfig::validate() const {
  if (variant == "single-conv") {
    if (probe_c_in < 1 || probe_c_out < 1 || probe_kernel < 1) {
      throw ConfigError("probe_c_in, probe_c_out and probe_kernel must be >= 1");
    }
  } else {
    model_spec().validate();
  }
  gam_config().validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must be in (0, 1)");
  if (!(conf_thresh >= 0.0 && conf_thresh <= 1.0)) throw ConfigError("conf_thresh must be in [0, 1]");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ConfigError("nms_iou must be in (0, 1]");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "optimizer" && section != "train" &&
          section != "paths") {
        throw ConfigError(where + "unknown section [" + section +
                          "] (known: model, optimizer, train, paths)");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* key = find_key(name);
    if (key == nullptr) {
      throw ConfigError(where + "unknown key '" + name + "' (did you mean '" + nearest_key(name) +
                        "'?)");
    }
    if (!section.empty() && section != key->section) {
      throw ConfigError(where + "key '" + name + "' belongs in [" + key->section +
                        "], not [" + section + "]");
    }
    apply(cfg, *key, value, where);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

void set_config_value(RunConfig& cfg, const std::string& name, const std::string& value) {
  const Key* key = find_key(name);
  if (key == nullptr) {
    throw ConfigError("unknown key '" + name + "' (did you mean '" + nearest_key(name) + "'?)");
  }
  apply(cfg, *key, value, "");
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::string config_key_help() {
  const RunConfig defaults;
  std::string out;
  for (const auto& k : keys()) {
    std::string type = type_name(k.type);
    if (k.type == KeyType::choice) {
      type.clear();
      for (const auto& c : k.choices) type += (type.empty() ? "" : "|") + c;
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "  [%s] %-16s %-24s default %-10s %s\n", k.section, k.name,
                  type.c_str(), k.get(defaults).c_str(), k.doc);
    out += buf;
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

}  // namespace byhd
