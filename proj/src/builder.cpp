#include "builder.hpp"

#include <cmath>

#include <json.hpp>

namespace repnet {

using json = nlohmann::json;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::N: return "n";
    case Variant::S: return "s";
    case Variant::M: return "m";
    default: return "l";
  }
}

const char* version_name(Version v) { return v == Version::V1 ? "v1" : "v2"; }

const std::vector<VariantRow>& variant_table() {
  static const std::vector<VariantRow> rows = {
      {Variant::N, Version::V1, 0.33, 0.25},
      {Variant::S, Version::V1, 0.33, 0.50},
      {Variant::N, Version::V2, 0.33, 0.25},
      {Variant::S, Version::V2, 0.33, 0.50},
      {Variant::M, Version::V2, 0.60, 0.75},
      {Variant::L, Version::V2, 1.0, 1.0},
  };
  return rows;
}

static const VariantRow* find_row(Variant v, Version ver) {
  for (const auto& r : variant_table())
    if (r.variant == v && r.version == ver) return &r;
  return nullptr;
}

int scale_depth(int base, double multiplier) {
  if (base < 1) fail(ErrorKind::InvalidArgument, "scale_depth: base must be >= 1, got ", base);
  if (!(multiplier > 0.0))
    fail(ErrorKind::InvalidArgument, "scale_depth: multiplier must be > 0");
  return static_cast<int>(std::max<long long>(1, std::llround(base * multiplier)));
}

int scale_width(int base, double multiplier, int divisor) {
  if (base < 1) fail(ErrorKind::InvalidArgument, "scale_width: base must be >= 1, got ", base);
  if (!(multiplier > 0.0))
    fail(ErrorKind::InvalidArgument, "scale_width: multiplier must be > 0");
  if (divisor < 1) fail(ErrorKind::InvalidArgument, "scale_width: divisor must be >= 1");
  const long long snapped = std::llround(base * multiplier / divisor) * divisor;
  return static_cast<int>(std::max<long long>(divisor, snapped));
}

int bep_unit_count(int declared_depth) {
  if (declared_depth < 1)
    fail(ErrorKind::InvalidArgument, "bep_unit_count: depth must be >= 1, got ", declared_depth);
  return static_cast<int>(std::max<long long>(1, std::llround(declared_depth / 2.0)));
}

ScaledShape scaled_shape(const ModelSpec& spec) {
  spec.validate();
  ScaledShape s;
  for (int d : kBackboneBaseDepths) s.backbone_repeats.push_back(scale_depth(d, spec.depth_multiplier));
  for (int w : kBackboneBaseWidths) s.backbone_widths.push_back(scale_width(w, spec.width_multiplier));
  for (int d : kNeckBaseDepths) s.neck_depths.push_back(scale_depth(d, spec.depth_multiplier));
  for (int w : kNeckBaseWidths) s.neck_widths.push_back(scale_width(w, spec.width_multiplier));
  return s;
}

ModelSpec ModelSpec::named(Variant v, Version ver) {
  const VariantRow* row = find_row(v, ver);
  if (!row)
    fail(ErrorKind::Spec, "no such model row: yolov6", variant_name(v), "-", version_name(ver));
  ModelSpec spec;
  spec.variant = v;
  spec.version = ver;
  spec.depth_multiplier = row->depth_multiplier;
  spec.width_multiplier = row->width_multiplier;
  return spec;
}

std::string ModelSpec::name() const {
  return cat("yolov6", variant_name(variant), "-", version_name(version));
}

bool ModelSpec::csp_bodies() const {
  if (structure == BodyStyle::PureRep) return false;
  if (structure == BodyStyle::Csp) return true;
  return version == Version::V2 && (variant == Variant::M || variant == Variant::L);
}

double ModelSpec::resolved_partial_ratio() const {
  if (partial_ratio) return *partial_ratio;
  return variant == Variant::M ? 2.0 / 3.0 : 0.5;
}

void ModelSpec::validate() const {
  const VariantRow* row = find_row(variant, version);
  if (!row)
    fail(ErrorKind::Spec, "no such model row: ", name(),
         " (v1 provides n/s, v2 provides n/s/m/l)");
  if (std::abs(depth_multiplier - row->depth_multiplier) > 1e-9)
    fail(ErrorKind::Spec, "depth_multiplier ", depth_multiplier, " does not match the ", name(),
         " row value ", row->depth_multiplier);
  if (std::abs(width_multiplier - row->width_multiplier) > 1e-9)
    fail(ErrorKind::Spec, "width_multiplier ", width_multiplier, " does not match the ", name(),
         " row value ", row->width_multiplier);
  if (input_channels < 1)
    fail(ErrorKind::Spec, "input_channels must be >= 1, got ", input_channels);
  if (version == Version::V1 && structure == BodyStyle::Csp)
    fail(ErrorKind::Spec, "structure \"bepc3\" is not available for v1 models");
  if (partial_ratio) {
    if (!csp_bodies())
      fail(ErrorKind::Spec, "partial_ratio is only meaningful for BepC3 bodies (", name(),
           " uses pure rep-style bodies)");
    if (*partial_ratio <= 0.0 || *partial_ratio >= 1.0)
      fail(ErrorKind::Spec, "partial_ratio must lie in (0,1), got ", *partial_ratio);
  }
}

static Variant parse_variant(const std::string& s) {
  if (s == "n") return Variant::N;
  if (s == "s") return Variant::S;
  if (s == "m") return Variant::M;
  if (s == "l") return Variant::L;
  fail(ErrorKind::Spec, "variant must be one of n/s/m/l, got \"", s, "\"");
}

static Version parse_version(const std::string& s) {
  if (s == "v1") return Version::V1;
  if (s == "v2") return Version::V2;
  fail(ErrorKind::Spec, "version must be v1 or v2, got \"", s, "\"");
}

static BodyStyle parse_structure(const std::string& s) {
  if (s == "auto") return BodyStyle::Auto;
  if (s == "rep") return BodyStyle::PureRep;
  if (s == "bepc3") return BodyStyle::Csp;
  fail(ErrorKind::Spec, "structure must be auto/rep/bepc3, got \"", s, "\"");
}

// Accepts 0.5 or "1/2".
static double parse_ratio(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      const double num = std::stod(s.substr(0, slash));
      const double den = std::stod(s.substr(slash + 1));
      if (den == 0.0) fail(ErrorKind::Spec, "partial_ratio denominator is zero");
      return num / den;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(ErrorKind::Spec, "partial_ratio \"", s, "\" is not a number or a/b fraction");
    }
  }
  fail(ErrorKind::Spec, "partial_ratio must be a number or an \"a/b\" string");
}

ModelSpec ModelSpec::parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Spec, "model spec is not valid JSON: ", e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Spec, "model spec must be a JSON object");

  static const std::vector<std::string> known = {
      "variant",       "version",        "depth_multiplier", "width_multiplier",
      "partial_ratio", "input_channels", "structure"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      fail(ErrorKind::Spec, "unknown model spec field \"", key, "\"");
  if (!j.contains("variant") || !j.contains("version"))
    fail(ErrorKind::Spec, "model spec requires \"variant\" and \"version\" fields");
  if (!j["variant"].is_string() || !j["version"].is_string())
    fail(ErrorKind::Spec, "\"variant\" and \"version\" must be strings");

  ModelSpec spec = named(parse_variant(j["variant"].get<std::string>()),
                         parse_version(j["version"].get<std::string>()));
  if (j.contains("depth_multiplier")) {
    if (!j["depth_multiplier"].is_number())
      fail(ErrorKind::Spec, "depth_multiplier must be a number");
    spec.depth_multiplier = j["depth_multiplier"].get<double>();
  }
  if (j.contains("width_multiplier")) {
    if (!j["width_multiplier"].is_number())
      fail(ErrorKind::Spec, "width_multiplier must be a number");
    spec.width_multiplier = j["width_multiplier"].get<double>();
  }
  if (j.contains("input_channels")) {
    if (!j["input_channels"].is_number_integer())
      fail(ErrorKind::Spec, "input_channels must be an integer");
    spec.input_channels = j["input_channels"].get<int>();
  }
  if (j.contains("structure")) {
    if (!j["structure"].is_string()) fail(ErrorKind::Spec, "structure must be a string");
    spec.structure = parse_structure(j["structure"].get<std::string>());
  }
  if (j.contains("partial_ratio")) spec.partial_ratio = parse_ratio(j["partial_ratio"]);
  spec.validate();
  return spec;
}

std::string ModelSpec::to_json() const {
  json j;
  j["variant"] = variant_name(variant);
  j["version"] = version_name(version);
  j["depth_multiplier"] = depth_multiplier;
  j["width_multiplier"] = width_multiplier;
  if (partial_ratio) j["partial_ratio"] = *partial_ratio;
  j["input_channels"] = input_channels;
  if (structure != BodyStyle::Auto)
    j["structure"] = structure == BodyStyle::PureRep ? "rep" : "bepc3";
  return j.dump();
}

}  // namespace repnet
