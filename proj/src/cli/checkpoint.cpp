#include "kanwm/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kanwm/error.hpp"

namespace kanwm {

using nlohmann::json;

namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    require(std::isfinite(v), ErrorKind::format, std::string("checkpoint: non-finite ") + what);
}

json nest2(std::span<const double> flat, std::size_t rows, std::size_t cols) {
  json out = json::array();
  for (std::size_t r = 0; r < rows; ++r)
    out.push_back(std::vector<double>(flat.begin() + r * cols, flat.begin() + (r + 1) * cols));
  return out;
}

json nest3(std::span<const double> flat, std::size_t a, std::size_t b, std::size_t c) {
  json out = json::array();
  for (std::size_t i = 0; i < a; ++i) out.push_back(nest2(flat.subspan(i * b * c, b * c), b, c));
  return out;
}

// Row-major flattening of a nested array with the given shape.
template <typename T>
void flatten(const json& node, std::span<const std::size_t> shape, std::vector<T>& out,
             const std::string& where) {
  require(node.is_array() && node.size() == shape.front(), ErrorKind::format,
          "checkpoint: " + where + " has the wrong shape");
  for (const auto& item : node) {
    if (shape.size() > 1) {
      flatten(item, shape.subspan(1), out, where);
    } else {
      require(item.is_number(), ErrorKind::format, "checkpoint: " + where + " holds a non-number");
      out.push_back(item.get<T>());
    }
  }
}

template <typename T>
T field(const json& node, const char* key, const std::string& where) {
  require(node.is_object() && node.contains(key), ErrorKind::format,
          "checkpoint: " + where + " lacks \"" + key + "\"");
  try {
    return node.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::format, "checkpoint: " + where + "." + key + ": " + e.what());
  }
}

json kan_to_json(const KanModel& model) {
  json layers = json::array();
  for (const auto& layer : model.layers) {
    check_finite(layer.coeffs, "spline coefficient");
    check_finite(layer.w_base, "base weight");
    check_finite(layer.w_spline, "spline weight");
    json mask = json::array();
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      std::vector<int> row;
      for (std::size_t i = 0; i < layer.in_dim; ++i) row.push_back(layer.mask[layer.edge(j, i)]);
      mask.push_back(row);
    }
    layers.push_back(json{
        {"in_dim", layer.in_dim},
        {"out_dim", layer.out_dim},
        {"grid",
         {{"degree", layer.grid.degree},
          {"intervals", layer.grid.intervals},
          {"t_min", layer.grid.t_min},
          {"t_max", layer.grid.t_max}}},
        {"coeffs", nest3(layer.coeffs, layer.out_dim, layer.in_dim, layer.basis_count())},
        {"w_base", nest2(layer.w_base, layer.out_dim, layer.in_dim)},
        {"w_spline", nest2(layer.w_spline, layer.out_dim, layer.in_dim)},
        {"mask", mask}});
  }
  return json{{"widths", model.widths()}, {"layers", layers}};
}

KanModel kan_from_json(const json& arch) {
  KanModel model;
  const json& layers = arch.at("layers");
  require(layers.is_array() && !layers.empty(), ErrorKind::format,
          "checkpoint: KAN needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const json& node = layers[l];
    const std::string where = "layers[" + std::to_string(l) + "]";
    auto in = field<std::size_t>(node, "in_dim", where);
    auto out = field<std::size_t>(node, "out_dim", where);
    const json& g = node.at("grid");
    SplineGrid grid;
    try {
      grid = build_grid(field<int>(g, "degree", where + ".grid"),
                        field<int>(g, "intervals", where + ".grid"),
                        field<double>(g, "t_min", where + ".grid"),
                        field<double>(g, "t_max", where + ".grid"));
    } catch (const Error& e) {
      fail(ErrorKind::format, std::string("checkpoint: ") + e.what());
    }
    KanLayer layer(in, out, grid);
    if (!model.layers.empty())
      require(model.layers.back().out_dim == in, ErrorKind::format,
              "checkpoint: layer widths do not chain at " + where);
    std::size_t basis = layer.basis_count();
    layer.coeffs.clear();
    layer.w_base.clear();
    layer.w_spline.clear();
    std::vector<int> mask;
    const std::size_t s3[] = {out, in, basis};
    const std::size_t s2[] = {out, in};
    flatten(node.at("coeffs"), std::span<const std::size_t>(s3), layer.coeffs, where + ".coeffs");
    flatten(node.at("w_base"), std::span<const std::size_t>(s2), layer.w_base, where + ".w_base");
    flatten(node.at("w_spline"), std::span<const std::size_t>(s2), layer.w_spline,
            where + ".w_spline");
    flatten(node.at("mask"), std::span<const std::size_t>(s2), mask, where + ".mask");
    for (std::size_t e = 0; e < mask.size(); ++e) {
      require(mask[e] == 0 || mask[e] == 1, ErrorKind::format,
              "checkpoint: " + where + ".mask entries must be 0 or 1");
      layer.mask[e] = static_cast<std::uint8_t>(mask[e]);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

json mlp_to_json(const MlpModel& model) {
  json layers = json::array();
  for (const auto& layer : model.layers) {
    check_finite(layer.weight.values(), "dense weight");
    check_finite(layer.bias, "dense bias");
    layers.push_back(json{{"weight", nest2(layer.weight.values(), layer.weight.rows(),
                                           layer.weight.cols())},
                          {"bias", layer.bias}});
  }
  return json{{"widths", model.widths()},
              {"head", model.head == MlpHead::logits ? "logits" : "scalar"},
              {"layers", layers}};
}

MlpModel mlp_from_json(const json& arch) {
  MlpModel model;
  auto head = field<std::string>(arch, "head", "architecture");
  if (head == "logits") model.head = MlpHead::logits;
  else if (head == "scalar") model.head = MlpHead::scalar;
  else fail(ErrorKind::format, "checkpoint: unknown MLP head \"" + head + "\"");
  auto widths = field<std::vector<std::size_t>>(arch, "widths", "architecture");
  const json& layers = arch.at("layers");
  require(widths.size() >= 2 && layers.is_array() && layers.size() == widths.size() - 1,
          ErrorKind::format, "checkpoint: MLP widths and layers disagree");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string where = "layers[" + std::to_string(l) + "]";
    std::vector<double> w;
    std::vector<double> b;
    const std::size_t s2[] = {widths[l + 1], widths[l]};
    const std::size_t s1[] = {widths[l + 1]};
    flatten(layers[l].at("weight"), std::span<const std::size_t>(s2), w, where + ".weight");
    flatten(layers[l].at("bias"), std::span<const std::size_t>(s1), b, where + ".bias");
    model.layers.push_back(DenseLayer{Mat(widths[l + 1], widths[l], std::move(w)), std::move(b)});
  }
  return model;
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kan ? "kan" : "mlp"; }

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::clean: return "clean";
    case Stage::watermarked: return "watermarked";
    case Stage::attacked: return "attacked";
  }
  return "clean";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "kan") return ModelKind::kan;
  if (name == "mlp") return ModelKind::mlp;
  fail(ErrorKind::config, "unknown model kind \"" + std::string(name) + "\" (expected kan or mlp)");
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json provenance = ckpt.provenance.is_object() ? ckpt.provenance : json::object();
  provenance["stage"] = std::string(to_string(ckpt.stage));
  return json{{"format_version", kCheckpointFormatVersion},
              {"kind", std::string(to_string(ckpt.kind))},
              {"architecture",
               ckpt.kind == ModelKind::kan ? kan_to_json(ckpt.kan) : mlp_to_json(ckpt.mlp)},
              {"provenance", provenance}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::format, "checkpoint: expected a JSON object");
  auto version = field<int>(doc, "format_version", "checkpoint");
  require(version == kCheckpointFormatVersion, ErrorKind::format,
          "checkpoint: unsupported format_version " + std::to_string(version));
  Checkpoint ckpt;
  auto kind = field<std::string>(doc, "kind", "checkpoint");
  require(kind == "kan" || kind == "mlp", ErrorKind::format,
          "checkpoint: unknown kind \"" + kind + "\"");
  ckpt.kind = kind == "kan" ? ModelKind::kan : ModelKind::mlp;

  require(doc.contains("provenance") && doc.at("provenance").is_object(), ErrorKind::format,
          "checkpoint: missing provenance");
  ckpt.provenance = doc.at("provenance");
  auto stage = field<std::string>(ckpt.provenance, "stage", "provenance");
  if (stage == "clean") ckpt.stage = Stage::clean;
  else if (stage == "watermarked") ckpt.stage = Stage::watermarked;
  else if (stage == "attacked") ckpt.stage = Stage::attacked;
  else fail(ErrorKind::format, "checkpoint: unknown stage \"" + stage + "\"");
  field<std::string>(ckpt.provenance, "config_hash", "provenance");
  require(ckpt.provenance.contains("seeds"), ErrorKind::format, "checkpoint: provenance lacks seeds");

  require(doc.contains("architecture"), ErrorKind::format, "checkpoint: missing architecture");
  try {
    if (ckpt.kind == ModelKind::kan) ckpt.kan = kan_from_json(doc.at("architecture"));
    else ckpt.mlp = mlp_from_json(doc.at("architecture"));
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

std::string dump_checkpoint(const Checkpoint& ckpt) {
  return checkpoint_to_json(ckpt).dump(1) + "\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string text = dump_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::data, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::data, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::data, "cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace kanwm
