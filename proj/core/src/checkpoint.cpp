#include "mdcn/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdcn/tensor_io.hpp"

namespace fs = std::filesystem;

namespace mdcn {

void save_checkpoint(const std::string& dir, const NetworkGraph& g,
                     const ParamStore& params, const OptimizerState& opt) {
  fs::create_directories(fs::path(dir) / "params");
  fs::create_directories(fs::path(dir) / "velocity");

  {
    std::ofstream f(fs::path(dir) / "graph.txt");
    if (!f) throw IoError("save_checkpoint: cannot write graph.txt");
    f << graph_to_text(g);
  }
  {
    std::ofstream f(fs::path(dir) / "manifest.txt");
    if (!f) throw IoError("save_checkpoint: cannot write manifest.txt");
    char buf[64];
    f << "iteration=" << opt.iteration << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", opt.momentum);
    f << "momentum=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", opt.weight_decay);
    f << "weight_decay=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", opt.base_lr);
    f << "base_lr=" << buf << "\n";
    for (const auto& [key, _] : params.tensors) f << "param=" << key << "\n";
  }
  for (const auto& [key, t] : params.tensors) {
    write_tensor_file((fs::path(dir) / "params" / (key + ".mdt")).string(), t);
  }
  for (const auto& [key, t] : opt.velocity.tensors) {
    write_tensor_file((fs::path(dir) / "velocity" / (key + ".mdt")).string(), t);
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  Checkpoint ck;
  {
    std::ifstream f(fs::path(dir) / "graph.txt");
    if (!f) throw IoError("load_checkpoint: missing graph.txt in " + dir);
    std::stringstream ss;
    ss << f.rdbuf();
    ck.graph = graph_from_text(ss.str());
  }
  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw IoError("load_checkpoint: missing manifest.txt in " + dir);
  std::string line;
  std::vector<std::string> keys;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("manifest: bad line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "iteration") ck.opt.iteration = std::stoull(val);
    else if (key == "momentum") ck.opt.momentum = std::stod(val);
    else if (key == "weight_decay") ck.opt.weight_decay = std::stod(val);
    else if (key == "base_lr") ck.opt.base_lr = std::stod(val);
    else if (key == "param") keys.push_back(val);
    else throw ParseError("manifest: unknown key '" + key + "'");
  }
  for (const auto& key : keys) {
    ck.params.tensors[key] =
        read_tensor_file((fs::path(dir) / "params" / (key + ".mdt")).string());
    const auto vel_path = fs::path(dir) / "velocity" / (key + ".mdt");
    if (fs::exists(vel_path)) {
      ck.opt.velocity.tensors[key] = read_tensor_file(vel_path.string());
    }
  }
  return ck;
}

}  // namespace mdcn
