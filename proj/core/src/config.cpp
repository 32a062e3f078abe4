#include "mdcn/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mdcn {

void Config::validate() const {
  variant_from_name(variant);  // throws on unknown variant
  if (input_size < 64) throw ParseError("config: input_size must be >= 64");
  if (num_classes < 1) throw ParseError("config: num_classes must be >= 1");
  if (width_mult <= 0 || width_mult > 1.0) {
    throw ParseError("config: width_mult must lie in (0,1]");
  }
  if (anchor_scale_min <= 0 || anchor_scale_max > 1.0 ||
      anchor_scale_min >= anchor_scale_max) {
    throw ParseError("config: anchor scales must satisfy 0 < min < max <= 1");
  }
  if (match_threshold <= 0 || match_threshold >= 1) {
    throw ParseError("config: match_threshold must lie in (0,1)");
  }
  if (neg_pos_ratio < 0) throw ParseError("config: neg_pos_ratio must be >= 0");
  if (total_iterations < 1) throw ParseError("config: total_iterations must be >= 1");
  std::uint64_t prev = 0;
  for (std::uint64_t m : milestones) {
    if (m <= prev || m >= total_iterations) {
      throw ParseError("config: milestones must be strictly increasing and below total");
    }
    prev = m;
  }
  if (lr_decay <= 0 || lr_decay >= 1) throw ParseError("config: lr_decay must lie in (0,1)");
  if (base_lr <= 0) throw ParseError("config: base_lr must be positive");
  if (momentum < 0 || momentum >= 1) throw ParseError("config: momentum must lie in [0,1)");
  if (weight_decay < 0) throw ParseError("config: weight_decay must be >= 0");
  if (batch_size < 1) throw ParseError("config: batch_size must be >= 1");
  if (images < 1) throw ParseError("config: images must be >= 1");
  if (val_fraction < 0 || val_fraction >= 1) {
    throw ParseError("config: val_fraction must lie in [0,1)");
  }
  if (confidence_floor < 0 || confidence_floor >= 1) {
    throw ParseError("config: confidence_floor must lie in [0,1)");
  }
  if (nms_threshold <= 0 || nms_threshold >= 1) {
    throw ParseError("config: nms_threshold must lie in (0,1)");
  }
  if (top_k < 1) throw ParseError("config: top_k must be >= 1");
}

ModelConfig Config::model_config() const {
  ModelConfig mc;
  mc.variant = variant_from_name(variant);
  mc.input_size = input_size;
  mc.num_classes = num_classes;
  mc.width_mult = width_mult;
  return mc;
}

namespace {

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  if (s.empty()) return out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoull(item));
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("config: key '" + key + "' wants true/false, got '" + v + "'");
}

}  // namespace

Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "variant") cfg.variant = val;
      else if (key == "input_size") cfg.input_size = std::stoi(val);
      else if (key == "num_classes") cfg.num_classes = std::stoi(val);
      else if (key == "width_mult") cfg.width_mult = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "anchor_scale_min") cfg.anchor_scale_min = std::stod(val);
      else if (key == "anchor_scale_max") cfg.anchor_scale_max = std::stod(val);
      else if (key == "match_threshold") cfg.match_threshold = std::stod(val);
      else if (key == "neg_pos_ratio") cfg.neg_pos_ratio = std::stod(val);
      else if (key == "loss_alpha") cfg.loss_alpha = std::stod(val);
      else if (key == "total_iterations") cfg.total_iterations = std::stoull(val);
      else if (key == "milestones") cfg.milestones = parse_u64_list(val);
      else if (key == "lr_decay") cfg.lr_decay = std::stod(val);
      else if (key == "base_lr") cfg.base_lr = std::stod(val);
      else if (key == "momentum") cfg.momentum = std::stod(val);
      else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
      else if (key == "batch_size") cfg.batch_size = std::stoull(val);
      else if (key == "augment_flip") cfg.augment_flip = parse_bool(val, key);
      else if (key == "augment_crop") cfg.augment_crop = parse_bool(val, key);
      else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoull(val);
      else if (key == "images") cfg.images = std::stoull(val);
      else if (key == "val_fraction") cfg.val_fraction = std::stod(val);
      else if (key == "confidence_floor") cfg.confidence_floor = std::stod(val);
      else if (key == "nms_threshold") cfg.nms_threshold = std::stod(val);
      else if (key == "top_k") cfg.top_k = std::stoull(val);
      else if (key == "out_dir") cfg.out_dir = val;
      else throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" +
                            key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError("config line " + std::to_string(lineno) + ": bad value for '" +
                       key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const Config& cfg) {
  std::ostringstream os;
  os << "variant=" << cfg.variant << "\n";
  os << "input_size=" << cfg.input_size << "\n";
  os << "num_classes=" << cfg.num_classes << "\n";
  os << "width_mult=" << fmt_double(cfg.width_mult) << "\n";
  os << "seed=" << cfg.seed << "\n";
  os << "anchor_scale_min=" << fmt_double(cfg.anchor_scale_min) << "\n";
  os << "anchor_scale_max=" << fmt_double(cfg.anchor_scale_max) << "\n";
  os << "match_threshold=" << fmt_double(cfg.match_threshold) << "\n";
  os << "neg_pos_ratio=" << fmt_double(cfg.neg_pos_ratio) << "\n";
  os << "loss_alpha=" << fmt_double(cfg.loss_alpha) << "\n";
  os << "total_iterations=" << cfg.total_iterations << "\n";
  os << "milestones=";
  for (std::size_t i = 0; i < cfg.milestones.size(); ++i) {
    if (i) os << ",";
    os << cfg.milestones[i];
  }
  os << "\n";
  os << "lr_decay=" << fmt_double(cfg.lr_decay) << "\n";
  os << "base_lr=" << fmt_double(cfg.base_lr) << "\n";
  os << "momentum=" << fmt_double(cfg.momentum) << "\n";
  os << "weight_decay=" << fmt_double(cfg.weight_decay) << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "augment_flip=" << (cfg.augment_flip ? "true" : "false") << "\n";
  os << "augment_crop=" << (cfg.augment_crop ? "true" : "false") << "\n";
  os << "checkpoint_every=" << cfg.checkpoint_every << "\n";
  os << "images=" << cfg.images << "\n";
  os << "val_fraction=" << fmt_double(cfg.val_fraction) << "\n";
  os << "confidence_floor=" << fmt_double(cfg.confidence_floor) << "\n";
  os << "nms_threshold=" << fmt_double(cfg.nms_threshold) << "\n";
  os << "top_k=" << cfg.top_k << "\n";
  os << "out_dir=" << cfg.out_dir << "\n";
  return os.str();
}

}  // namespace mdcn
