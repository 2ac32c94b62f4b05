// repnet command-line driver. Everything goes through the C API in repnet.h;
// exit code 0 = success, 1 = operational failure (I/O, mismatch, verification
// over tolerance), 2 = bad invocation, spec or schema error.
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "repnet.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int status_exit_code(repnet_status s) {
  switch (s) {
    case REPNET_OK: return 0;
    case REPNET_ERROR_SPEC:
    case REPNET_ERROR_INVALID_ARGUMENT: return kExitUsage;
    default: return kExitFailure;
  }
}

int report_error(repnet_status s) {
  std::fprintf(stderr, "error: %s\n", repnet_last_error());
  return status_exit_code(s);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

struct ModelHandle {
  repnet_model* m = nullptr;
  ~ModelHandle() { repnet_model_release(m); }
};

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { repnet_string_release(s); }
};

repnet_precision parse_precision(const std::string& p) {
  return p == "f32" ? REPNET_PRECISION_F32 : REPNET_PRECISION_F64;
}

// Opens from weights when given, otherwise builds from the spec with the seed.
int acquire_model(const std::string& spec_path, const std::string& weights,
                  const std::string& precision, uint64_t seed, ModelHandle& h) {
  std::string spec_json;
  if (!read_file(spec_path, spec_json)) {
    std::fprintf(stderr, "error: cannot read model spec %s\n", spec_path.c_str());
    return kExitUsage;
  }
  const repnet_status s =
      weights.empty()
          ? repnet_model_create(spec_json.c_str(), parse_precision(precision), seed, &h.m)
          : repnet_model_open(spec_json.c_str(), weights.c_str(), &h.m);
  if (s != REPNET_OK) return report_error(s);
  return 0;
}

void print_summary(const ModelHandle& h) {
  OwnedString desc;
  if (repnet_model_describe(h.m, &desc.s) != REPNET_OK) return;
  const auto j = nlohmann::json::parse(desc.s);
  std::printf("model       %s\n", j["model"].get<std::string>().c_str());
  std::printf("structure   %s bodies, depth x%.2f, width x%.2f\n",
              j["structure"].get<std::string>().c_str(), j["depth_multiplier"].get<double>(),
              j["width_multiplier"].get<double>());
  if (j.contains("partial_ratio"))
    std::printf("partial     %.6g\n", j["partial_ratio"].get<double>());
  std::printf("mode        %s (%s)\n", j["mode"].get<std::string>().c_str(),
              j["precision"].get<std::string>().c_str());
  auto ints = [](const nlohmann::json& a) {
    std::string s;
    for (const auto& v : a) s += (s.empty() ? "" : " ") + std::to_string(v.get<int>());
    return s;
  };
  std::printf("backbone    repeats [%s], widths [%s]\n", ints(j["backbone"]["repeats"]).c_str(),
              ints(j["backbone"]["widths"]).c_str());
  std::printf("neck        depths [%s], widths [%s]\n", ints(j["neck"]["depths"]).c_str(),
              ints(j["neck"]["widths"]).c_str());
  for (const auto& tap : j["taps"])
    std::printf("tap %s      %d channels at stride %d\n", tap["name"].get<std::string>().c_str(),
                tap["channels"].get<int>(), tap["stride"].get<int>());
  std::printf("parameters  %llu\n",
              static_cast<unsigned long long>(j["param_count"].get<uint64_t>()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RepVGG-style network builder, fusion verifier and roofline analyzer"};
  app.set_version_flag("--version", repnet_version());
  app.require_subcommand(1);

  std::string spec_path, weights_in, out_path, precision = "f64", format = "table",
              hw_name = "hw";
  uint64_t seed = 0;
  double tol = 1e-10, peak = 0.0, bw = 0.0;
  int trials = 3, size = 64, batch = 1;
  bool emit_json = false, analyze_fused = false;

  auto add_spec = [&](CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "model spec JSON file")->required();
  };
  auto add_precision = [&](CLI::App* cmd) {
    cmd->add_option("--precision", precision, "numeric width: f32 or f64 (default f64)")
        ->check(CLI::IsMember({"f32", "f64"}));
  };

  CLI::App* build = app.add_subcommand("build", "build a model and print its structure");
  add_spec(build);
  add_precision(build);
  build->add_option("--seed", seed, "parameter seed (default 0)");
  build->add_option("--out", out_path, "also export weights to this REPF file");
  build->add_flag("--json", emit_json, "print the structure summary as JSON");

  CLI::App* fuse = app.add_subcommand("fuse", "fuse training-form weights into inference form");
  add_spec(fuse);
  fuse->add_option("--weights", weights_in, "training-form REPF weights")->required();
  fuse->add_option("--out", out_path, "fused REPF output path")->required();

  CLI::App* verify =
      app.add_subcommand("verify", "compare training-form vs fused forward passes");
  add_spec(verify);
  add_precision(verify);
  verify->add_option("--seed", seed, "seed for parameters and inputs")->required();
  verify->add_option("--tol", tol, "max allowed abs deviation (default 1e-10)");
  verify->add_option("--trials", trials, "random inputs to test (default 3)");
  verify->add_option("--size", size, "square input size, divisible by 32 (default 64)");
  verify->add_option("--weights", weights_in, "verify these weights instead of seeded ones");

  CLI::App* analyze = app.add_subcommand("analyze", "per-layer roofline report");
  add_spec(analyze);
  add_precision(analyze);
  analyze->add_option("--weights", weights_in, "analyze these weights instead of seeded ones");
  analyze->add_option("--seed", seed, "parameter seed when building from spec (default 0)");
  analyze->add_option("--peak", peak, "peak compute, FLOP/s")->required();
  analyze->add_option("--bw", bw, "memory bandwidth, bytes/s")->required();
  analyze->add_option("--size", size, "square input size (default 64)");
  analyze->add_option("--batch", batch, "batch size (default 1)");
  analyze->add_option("--format", format, "table or json (default table)")
      ->check(CLI::IsMember({"table", "json"}));
  analyze->add_flag("--fused", analyze_fused, "fuse before analyzing");

  CLI::App* exportc = app.add_subcommand("export", "build a model and export REPF weights");
  add_spec(exportc);
  add_precision(exportc);
  exportc->add_option("--seed", seed, "parameter seed (default 0)");
  exportc->add_option("--out", out_path, "REPF output path")->required();

  CLI::App* import = app.add_subcommand("import", "load REPF weights and print the structure");
  add_spec(import);
  import->add_option("--weights", weights_in, "REPF weights file")->required();
  import->add_flag("--json", emit_json, "print the structure summary as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }

  if (build->parsed() || exportc->parsed()) {
    ModelHandle h;
    if (int rc = acquire_model(spec_path, "", precision, seed, h)) return rc;
    if (build->parsed()) {
      if (emit_json) {
        OwnedString desc;
        if (auto s = repnet_model_describe(h.m, &desc.s); s != REPNET_OK) return report_error(s);
        std::printf("%s\n", desc.s);
      } else {
        print_summary(h);
      }
    }
    if (!out_path.empty()) {
      if (auto s = repnet_model_save(h.m, out_path.c_str()); s != REPNET_OK)
        return report_error(s);
      std::printf("wrote %s\n", out_path.c_str());
    }
    return 0;
  }

  if (fuse->parsed()) {
    ModelHandle h;
    if (int rc = acquire_model(spec_path, weights_in, precision, seed, h)) return rc;
    uint64_t before = 0, after = 0;
    repnet_model_param_count(h.m, &before);
    if (auto s = repnet_model_fuse(h.m); s != REPNET_OK) return report_error(s);
    repnet_model_param_count(h.m, &after);
    if (auto s = repnet_model_save(h.m, out_path.c_str()); s != REPNET_OK)
      return report_error(s);
    std::printf("fused %llu -> %llu parameters, wrote %s\n",
                static_cast<unsigned long long>(before), static_cast<unsigned long long>(after),
                out_path.c_str());
    return 0;
  }

  if (verify->parsed()) {
    ModelHandle h;
    if (int rc = acquire_model(spec_path, weights_in, precision, seed, h)) return rc;
    double deviation = 0.0;
    int passed = 0;
    if (auto s = repnet_model_verify(h.m, trials, size, size, tol, seed, &deviation, &passed);
        s != REPNET_OK)
      return report_error(s);
    std::printf("trials %d, input %dx%d, precision %s\n", trials, size, size,
                repnet_model_precision(h.m) == REPNET_PRECISION_F32 ? "f32" : "f64");
    std::printf("max_abs_deviation %.17g\n", deviation);
    std::printf("%s (tol %.17g)\n", passed ? "PASS" : "FAIL", tol);
    return passed ? 0 : kExitFailure;
  }

  if (analyze->parsed()) {
    ModelHandle h;
    if (int rc = acquire_model(spec_path, weights_in, precision, seed, h)) return rc;
    if (analyze_fused && repnet_model_is_fused(h.m) == 0)
      if (auto s = repnet_model_fuse(h.m); s != REPNET_OK) return report_error(s);
    OwnedString report;
    if (auto s = repnet_model_analyze(h.m, batch, size, size, peak, bw, format == "table",
                                      &report.s);
        s != REPNET_OK)
      return report_error(s);
    std::printf("%s", report.s);
    if (format == "json") std::printf("\n");
    return 0;
  }

  if (import->parsed()) {
    ModelHandle h;
    if (int rc = acquire_model(spec_path, weights_in, precision, seed, h)) return rc;
    if (emit_json) {
      OwnedString desc;
      if (auto s = repnet_model_describe(h.m, &desc.s); s != REPNET_OK) return report_error(s);
      std::printf("%s\n", desc.s);
    } else {
      print_summary(h);
    }
    return 0;
  }

  return kExitUsage;
}
