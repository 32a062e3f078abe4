#include "mdcn/graph.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mdcn/kernels.hpp"

namespace mdcn {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::pool: return "pool";
    case LayerKind::relu: return "relu";
    case LayerKind::l2norm: return "l2norm";
    case LayerKind::concat: return "concat";
    case LayerKind::predict_tap: return "predict-tap";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::conv;
  if (name == "pool") return LayerKind::pool;
  if (name == "relu") return LayerKind::relu;
  if (name == "l2norm") return LayerKind::l2norm;
  if (name == "concat") return LayerKind::concat;
  if (name == "predict-tap") return LayerKind::predict_tap;
  throw ParseError("unknown layer kind '" + name + "'");
}

const LayerSpec* NetworkGraph::find(const std::string& id) const {
  for (const auto& l : layers) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

void NetworkGraph::validate() const {
  std::unordered_set<std::string> seen;
  seen.insert("input");
  for (const auto& l : layers) {
    if (l.id == "input" || !seen.insert(l.id).second) {
      throw ShapeError("graph: duplicate or reserved layer id '" + l.id + "'");
    }
    if (l.inputs.empty()) {
      throw ShapeError("graph: layer '" + l.id + "' has no inputs");
    }
    for (const auto& in : l.inputs) {
      if (!seen.count(in)) {
        // Inputs must precede their consumers; this also rules out cycles.
        throw ShapeError("graph: layer '" + l.id + "' consumes undefined '" + in + "'");
      }
    }
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap:
        if (l.out_channels < 1 || l.ksize < 1 || l.stride < 1 || l.dilation < 1 || l.pad < 0) {
          throw ShapeError("graph: conv layer '" + l.id + "' has invalid geometry");
        }
        if (l.inputs.size() != 1) {
          throw ShapeError("graph: conv layer '" + l.id + "' must have one input");
        }
        break;
      case LayerKind::pool:
        if (l.ksize < 1 || l.stride < 1 || l.pad < 0 || l.inputs.size() != 1) {
          throw ShapeError("graph: pool layer '" + l.id + "' has invalid geometry");
        }
        break;
      case LayerKind::relu:
      case LayerKind::l2norm:
        if (l.inputs.size() != 1) {
          throw ShapeError("graph: layer '" + l.id + "' must have one input");
        }
        break;
      case LayerKind::concat:
        if (l.inputs.size() < 2) {
          throw ShapeError("graph: concat '" + l.id + "' needs at least two inputs");
        }
        break;
    }
  }
  for (const auto& tap : source_taps) {
    if (!seen.count(tap)) {
      throw ShapeError("graph: tap '" + tap + "' does not name a layer");
    }
  }
}

std::map<std::string, ShapeInfo> infer_shapes(const NetworkGraph& g, int input_size) {
  if (input_size < 1) throw ShapeError("infer_shapes: input_size must be positive");
  std::map<std::string, ShapeInfo> shapes;
  std::unordered_map<std::string, ShapeInfo> lookup;
  const ShapeInfo input_shape{static_cast<std::size_t>(g.input_channels),
                              static_cast<std::size_t>(input_size),
                              static_cast<std::size_t>(input_size)};
  lookup["input"] = input_shape;
  for (const auto& l : g.layers) {
    const ShapeInfo in = lookup.at(l.inputs.front());
    ShapeInfo out = in;
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap:
        out.c = static_cast<std::size_t>(l.out_channels);
        out.h = conv_out_size(in.h, l.ksize, l.stride, l.pad, l.dilation);
        out.w = conv_out_size(in.w, l.ksize, l.stride, l.pad, l.dilation);
        if (out.h < 1 || out.w < 1) {
          throw ShapeError("infer_shapes: layer '" + l.id +
                           "' collapses spatial dims at input size " +
                           std::to_string(input_size));
        }
        break;
      case LayerKind::pool:
        out.h = pool_out_size(in.h, l.ksize, l.stride, l.pad);
        out.w = pool_out_size(in.w, l.ksize, l.stride, l.pad);
        if (out.h < 1 || out.w < 1) {
          throw ShapeError("infer_shapes: pool '" + l.id + "' output collapses");
        }
        break;
      case LayerKind::relu:
      case LayerKind::l2norm:
        break;
      case LayerKind::concat: {
        std::size_t c = 0;
        for (const auto& src : l.inputs) {
          const ShapeInfo s = lookup.at(src);
          if (s.h != in.h || s.w != in.w) {
            throw ShapeError("infer_shapes: concat '" + l.id +
                             "' inputs disagree on spatial dims");
          }
          c += s.c;
        }
        out.c = c;
        break;
      }
    }
    lookup[l.id] = out;
    shapes[l.id] = out;
  }
  shapes["input"] = input_shape;
  return shapes;
}

std::string graph_to_text(const NetworkGraph& g) {
  std::ostringstream os;
  os << "variant=" << g.variant << "\n";
  os << "input_size=" << g.input_size << "\n";
  os << "input_channels=" << g.input_channels << "\n";
  os << "num_classes=" << g.num_classes << "\n";
  os << "taps=";
  for (std::size_t i = 0; i < g.source_taps.size(); ++i) {
    if (i) os << ",";
    os << g.source_taps[i];
  }
  os << "\n";
  for (const auto& l : g.layers) {
    os << l.id << " " << kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::conv:
        os << " out=" << l.out_channels << " k=" << l.ksize << " stride=" << l.stride
           << " pad=" << l.pad << " dilation=" << l.dilation;
        break;
      case LayerKind::predict_tap:
        os << " out=" << l.out_channels << " k=" << l.ksize << " stride=" << l.stride
           << " pad=" << l.pad << " dilation=" << l.dilation
           << " role=" << (l.role == HeadRole::conf ? "conf" : "loc")
           << " tap=" << l.tap_index << " boxes=" << l.boxes_per_cell;
        break;
      case LayerKind::pool:
        os << " window=" << l.ksize << " stride=" << l.stride << " pad=" << l.pad;
        break;
      case LayerKind::l2norm:
        os << " scale_init=" << l.scale_init;
        break;
      case LayerKind::relu:
      case LayerKind::concat:
        break;
    }
    os << " inputs=";
    for (std::size_t i = 0; i < l.inputs.size(); ++i) {
      if (i) os << ",";
      os << l.inputs[i];
    }
    os << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

NetworkGraph graph_from_text(const std::string& text) {
  NetworkGraph g;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool got_taps = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fail = [&](const std::string& why) {
      throw ParseError("graph line " + std::to_string(lineno) + ": " + why);
    };
    if (line.find(' ') == std::string::npos) {
      // Header line key=value.
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected key=value header");
      const std::string key = line.substr(0, eq);
      const std::string val = line.substr(eq + 1);
      if (key == "variant") {
        g.variant = val;
      } else if (key == "input_size") {
        g.input_size = std::stoi(val);
      } else if (key == "input_channels") {
        g.input_channels = std::stoi(val);
      } else if (key == "num_classes") {
        g.num_classes = std::stoi(val);
      } else if (key == "taps") {
        got_taps = true;
        if (!val.empty()) g.source_taps = split(val, ',');
      } else {
        fail("unknown header key '" + key + "'");
      }
      continue;
    }
    std::istringstream ls(line);
    LayerSpec l;
    std::string kind;
    ls >> l.id >> kind;
    l.kind = kind_from_name(kind);
    std::string tok;
    bool got_inputs = false;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail("expected key=value, got '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "out") l.out_channels = std::stoi(val);
      else if (key == "k" || key == "window") l.ksize = std::stoi(val);
      else if (key == "stride") l.stride = std::stoi(val);
      else if (key == "pad") l.pad = std::stoi(val);
      else if (key == "dilation") l.dilation = std::stoi(val);
      else if (key == "scale_init") l.scale_init = std::stod(val);
      else if (key == "role") l.role = (val == "conf") ? HeadRole::conf : HeadRole::loc;
      else if (key == "tap") l.tap_index = std::stoi(val);
      else if (key == "boxes") l.boxes_per_cell = std::stoi(val);
      else if (key == "inputs") {
        l.inputs = split(val, ',');
        got_inputs = true;
      } else {
        fail("unknown key '" + key + "'");
      }
    }
    if (!got_inputs) fail("layer '" + l.id + "' missing inputs=");
    g.layers.push_back(std::move(l));
  }
  if (!got_taps) throw ParseError("graph: missing taps= header");
  g.validate();
  return g;
}

}  // namespace mdcn
