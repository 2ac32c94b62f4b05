#include "analyzer.hpp"

#include <cstdio>

#include <json.hpp>

namespace repnet {

using json = nlohmann::json;

static json layer_json(const LayerReport& l) {
  json j;
  j["name"] = l.name;
  j["kind"] = l.kind;
  j["params"] = l.params;
  j["flops"] = l.flops;
  j["bytes_moved"] = l.bytes_moved;
  j["arithmetic_intensity"] = l.arithmetic_intensity;
  j["attainable_flops"] = l.attainable;
  j["bound"] = bound_name(l.bound);
  return j;
}

std::string report_json(const AnalysisReport& r) {
  json j;
  j["convention"] = {{"flops", "2*MAC, bias excluded; batchnorm 2, add/relu 1 per element"},
                     {"bytes", "weights + input + output, each crossing memory once"}};
  j["model"] = r.model;
  j["mode"] = r.mode;
  j["precision"] = precision_name(r.precision);
  j["element_bytes"] = element_bytes(r.precision);
  j["input"] = {{"n", r.input.n}, {"c", r.input.c}, {"h", r.input.h}, {"w", r.input.w}};
  j["hardware"] = {{"name", r.hw.name},
                   {"peak_flops", r.hw.peak_flops},
                   {"mem_bandwidth_bytes", r.hw.mem_bandwidth},
                   {"ridge_flops_per_byte", r.hw.ridge()}};
  j["layers"] = json::array();
  for (const auto& l : r.layers) j["layers"].push_back(layer_json(l));
  j["totals"] = {{"params", r.totals.params},
                 {"flops", r.totals.flops},
                 {"bytes_moved", r.totals.bytes_moved},
                 {"layers", r.totals.layers},
                 {"memory_bound_layers", r.totals.memory_bound_layers},
                 {"memory_bound_flops_fraction", r.totals.memory_bound_flops_fraction}};
  return j.dump(2);
}

std::string report_table(const AnalysisReport& r) {
  std::string out;
  char line[256];
  auto emit = [&](const char* fmt, auto&&... args) {
    std::snprintf(line, sizeof(line), fmt, args...);
    out += line;
  };
  emit("model %s (%s, %s), input %dx%dx%dx%d\n", r.model.c_str(), r.mode.c_str(),
       precision_name(r.precision), r.input.n, r.input.c, r.input.h, r.input.w);
  emit("hardware %s: peak %.4g FLOP/s, bandwidth %.4g B/s, ridge %.4g FLOP/B\n",
       r.hw.name.c_str(), r.hw.peak_flops, r.hw.mem_bandwidth, r.hw.ridge());
  out += "flops = 2*MAC (bias excluded); bytes = weights + input + output, no cache reuse\n";
  emit("%-44s %-10s %12s %14s %14s %9s %8s %12s\n", "layer", "kind", "params", "flops", "bytes",
       "AI", "bound", "attainable");
  for (const auto& l : r.layers)
    emit("%-44s %-10s %12llu %14llu %14llu %9.3f %8s %12.4g\n", l.name.c_str(), l.kind.c_str(),
         static_cast<unsigned long long>(l.params), static_cast<unsigned long long>(l.flops),
         static_cast<unsigned long long>(l.bytes_moved), l.arithmetic_intensity,
         bound_name(l.bound), l.attainable);
  emit("%-44s %-10s %12llu %14llu %14llu\n", "total", "",
       static_cast<unsigned long long>(r.totals.params),
       static_cast<unsigned long long>(r.totals.flops),
       static_cast<unsigned long long>(r.totals.bytes_moved));
  emit("memory-bound layers: %llu of %llu; memory-bound flops fraction: %.4f\n",
       static_cast<unsigned long long>(r.totals.memory_bound_layers),
       static_cast<unsigned long long>(r.totals.layers), r.totals.memory_bound_flops_fraction);
  return out;
}

}  // namespace repnet
