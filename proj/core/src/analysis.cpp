#include "mdcn/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace mdcn {

ParamCount count_parameters(const NetworkGraph& g) {
  ParamCount pc;
  std::unordered_map<std::string, std::size_t> channels;
  channels["input"] = static_cast<std::size_t>(g.input_channels);
  for (const auto& l : g.layers) {
    std::size_t in_c = channels.at(l.inputs.front());
    std::size_t out_c = in_c;
    std::size_t params = 0;
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap:
        out_c = static_cast<std::size_t>(l.out_channels);
        params = static_cast<std::size_t>(l.ksize) * l.ksize * in_c * out_c + out_c;
        break;
      case LayerKind::l2norm:
        params = in_c;  // one learned scale per channel
        break;
      case LayerKind::concat: {
        out_c = 0;
        for (const auto& src : l.inputs) out_c += channels.at(src);
        break;
      }
      case LayerKind::pool:
      case LayerKind::relu:
        break;
    }
    channels[l.id] = out_c;
    pc.per_layer[l.id] = params;
    pc.total += params;
  }
  return pc;
}

RFReport receptive_field(const NetworkGraph& g) {
  RFReport report;
  report.input_size = g.input_size;
  std::unordered_map<std::string, RFEntry> entries;
  entries["input"] = RFEntry{1, 1, std::min(1.0, 1.0 / g.input_size)};
  for (const auto& l : g.layers) {
    RFEntry e;
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::predict_tap:
      case LayerKind::pool: {
        const RFEntry in = entries.at(l.inputs.front());
        const int dilation = (l.kind == LayerKind::pool) ? 1 : l.dilation;
        e.rf = in.rf + static_cast<std::size_t>(l.ksize - 1) * dilation * in.effective_stride;
        e.effective_stride = in.effective_stride * static_cast<std::size_t>(l.stride);
        break;
      }
      case LayerKind::relu:
      case LayerKind::l2norm:
        e = entries.at(l.inputs.front());
        break;
      case LayerKind::concat: {
        // Max over branches; branches of one unit share the entrance stride.
        e = entries.at(l.inputs.front());
        for (const auto& src : l.inputs) {
          const RFEntry b = entries.at(src);
          e.rf = std::max(e.rf, b.rf);
          e.effective_stride = std::max(e.effective_stride, b.effective_stride);
        }
        break;
      }
    }
    e.coverage = std::min(1.0, static_cast<double>(e.rf) / g.input_size);
    entries[l.id] = e;
    report.per_layer[l.id] = e;
  }
  return report;
}

ModelSummary summarize(const NetworkGraph& g, int input_size) {
  ModelSummary s;
  s.variant = g.variant;
  s.input_size = input_size;
  s.taps = g.source_taps;
  const auto shapes = infer_shapes(g, input_size);
  const auto params = count_parameters(g);
  NetworkGraph sized = g;
  sized.input_size = input_size;
  const auto rf = receptive_field(sized);
  for (const auto& l : g.layers) {
    LayerSummary row;
    row.id = l.id;
    row.kind = kind_name(l.kind);
    const ShapeInfo sh = shapes.at(l.id);
    row.out_c = sh.c;
    row.out_h = sh.h;
    row.out_w = sh.w;
    row.params = params.per_layer.at(l.id);
    const RFEntry e = rf.per_layer.at(l.id);
    row.rf = e.rf;
    row.effective_stride = e.effective_stride;
    row.coverage = e.coverage;
    s.rows.push_back(std::move(row));
  }
  s.total_params = params.total;
  return s;
}

std::string summary_text(const ModelSummary& s) {
  std::ostringstream os;
  os << "model " << s.variant << " @ " << s.input_size << "x" << s.input_size << "\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-18s %-12s %-16s %10s %6s %7s %9s\n", "layer", "kind",
                "output", "params", "rf", "stride", "coverage");
  os << buf;
  for (const auto& r : s.rows) {
    std::string shape = std::to_string(r.out_c) + "x" + std::to_string(r.out_h) + "x" +
                        std::to_string(r.out_w);
    std::snprintf(buf, sizeof(buf), "%-18s %-12s %-16s %10zu %6zu %7zu %9.3f\n",
                  r.id.c_str(), r.kind.c_str(), shape.c_str(), r.params, r.rf,
                  r.effective_stride, r.coverage);
    os << buf;
  }
  os << "taps:";
  for (const auto& t : s.taps) os << " " << t;
  os << "\n";
  os << "total_params " << s.total_params << "\n";
  return os.str();
}

std::string summary_records(const ModelSummary& s) {
  std::ostringstream os;
  os << "record=model variant=" << s.variant << " input_size=" << s.input_size << "\n";
  for (const auto& r : s.rows) {
    char cov[40];
    std::snprintf(cov, sizeof(cov), "%.17g", r.coverage);
    os << "record=layer id=" << r.id << " kind=" << r.kind << " out_c=" << r.out_c
       << " out_h=" << r.out_h << " out_w=" << r.out_w << " params=" << r.params
       << " rf=" << r.rf << " stride=" << r.effective_stride << " coverage=" << cov
       << "\n";
  }
  for (const auto& t : s.taps) os << "record=tap id=" << t << "\n";
  os << "record=total params=" << s.total_params << "\n";
  return os.str();
}

namespace {

std::map<std::string, std::string> parse_record(const std::string& line, int lineno) {
  std::map<std::string, std::string> kv;
  std::istringstream ls(line);
  std::string tok;
  while (ls >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw ParseError("records line " + std::to_string(lineno) + ": bad token '" + tok + "'");
    }
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

}  // namespace

ModelSummary summary_from_records(const std::string& text) {
  ModelSummary s;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto kv = parse_record(line, lineno);
    const std::string type = kv.at("record");
    if (type == "model") {
      s.variant = kv.at("variant");
      s.input_size = std::stoi(kv.at("input_size"));
    } else if (type == "layer") {
      LayerSummary r;
      r.id = kv.at("id");
      r.kind = kv.at("kind");
      r.out_c = std::stoull(kv.at("out_c"));
      r.out_h = std::stoull(kv.at("out_h"));
      r.out_w = std::stoull(kv.at("out_w"));
      r.params = std::stoull(kv.at("params"));
      r.rf = std::stoull(kv.at("rf"));
      r.effective_stride = std::stoull(kv.at("stride"));
      r.coverage = std::stod(kv.at("coverage"));
      s.rows.push_back(std::move(r));
    } else if (type == "tap") {
      s.taps.push_back(kv.at("id"));
    } else if (type == "total") {
      s.total_params = std::stoull(kv.at("params"));
    } else {
      throw ParseError("records line " + std::to_string(lineno) + ": unknown record '" +
                       type + "'");
    }
  }
  return s;
}

bool operator==(const LayerSummary& a, const LayerSummary& b) {
  return a.id == b.id && a.kind == b.kind && a.out_c == b.out_c && a.out_h == b.out_h &&
         a.out_w == b.out_w && a.params == b.params && a.rf == b.rf &&
         a.effective_stride == b.effective_stride && a.coverage == b.coverage;
}

bool operator==(const ModelSummary& a, const ModelSummary& b) {
  return a.variant == b.variant && a.input_size == b.input_size && a.rows == b.rows &&
         a.taps == b.taps && a.total_params == b.total_params;
}

}  // namespace mdcn
