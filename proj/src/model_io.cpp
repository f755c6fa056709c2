// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "thinner/error.hpp"
#include "thinner/random.hpp"

namespace thinner {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;
constexpr std::uint32_t kDatasetVersion = 1;
constexpr char kDatasetMagic[4] = {'T', 'H', 'D', 'S'};

static_assert(std::endian::native == std::endian::little,
              "blob and dataset I/O assume a little-endian host");

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const fs::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(path.string() + ": truncated dataset file");
  }
  return v;
}

void write_floats(std::ostream& os, std::span<const float> values) {
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size_bytes()));
}

json shape_json(const Shape& s) { return json::array({s.n, s.c, s.h, s.w}); }

Shape shape_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw FormatError(what + ": shape must be a 4-element array");
  Shape s{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (!s.valid()) throw FormatError(what + ": non-positive extent in shape " + s.str());
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::byte> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

json layer_to_json(const LayerSpec& spec) {
  json j{{"id", spec.id}, {"kind", std::string(to_string(spec.kind))}, {"inputs", spec.inputs}};
  switch (spec.kind) {
    case LayerKind::conv:
      j["out_channels"] = spec.out_channels;
      j["kernel"] = spec.kernel;
      j["stride"] = spec.stride;
      j["pad"] = spec.pad;
      j["bias"] = spec.bias;
      j["projection"] = spec.projection;
      break;
    case LayerKind::fc:
      j["out_channels"] = spec.out_channels;
      break;
    case LayerKind::maxpool:
      j["window"] = spec.window;
      j["stride"] = spec.stride;
      j["pad"] = spec.pad;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  try {
    LayerSpec s;
    s.id = j.at("id").get<std::string>();
    s.kind = parse_layer_kind(j.at("kind").get<std::string>());
    s.inputs = j.value("inputs", std::vector<std::string>{});
    s.out_channels = j.value("out_channels", 0);
    s.kernel = j.value("kernel", 1);
    s.stride = j.value("stride", 1);
    s.pad = j.value("pad", 0);
    s.window = j.value("window", 2);
    s.bias = j.value("bias", true);
    s.projection = j.value("projection", false);
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed layer spec: ") + e.what());
  }
}

void save_model(const ModelGraph& model, const fs::path& path) {
  model.validate();
  fs::path blob_path = path;
  blob_path.replace_extension(".bin");

  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw FormatError("cannot write " + blob_path.string());

  json layers = json::array();
  json blobs = json::array();
  std::uint64_t offset = 0;
  auto emit = [&](const std::string& layer, const char* role, const Shape& shape,
                  std::span<const float> values) {
    write_floats(blob, values);
    blobs.push_back({{"name", layer + "." + role},
                     {"layer", layer},
                     {"role", role},
                     {"shape", shape_json(shape)},
                     {"offset", offset},
                     {"length", values.size_bytes()},
                     {"fnv1a64", hex64(fnv1a64(std::as_bytes(values)))}});
    offset += values.size_bytes();
  };
  for (const auto& spec : model.layers) {
    layers.push_back(layer_to_json(spec));
    if (!has_params(spec.kind)) continue;
    const auto& p = model.params_of(spec.id);
    emit(spec.id, "weight", p.weight.shape(), p.weight.data());
    if (spec.kind != LayerKind::conv || spec.bias) {
      emit(spec.id, "bias", {1, static_cast<int>(p.bias.size()), 1, 1}, p.bias);
    }
  }
  blob.close();
  if (!blob) throw FormatError("failed writing " + blob_path.string());

  json manifest{{"format", "thinner-model"},
                {"version", kModelFormatVersion},
                {"input_shape", {model.input_shape.c, model.input_shape.h, model.input_shape.w}},
                {"classes", model.classes},
                {"blob_file", blob_path.filename().string()},
                {"blob_bytes", offset},
                {"layers", layers},
                {"blobs", blobs}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << manifest.dump(1) << '\n';
  if (!out) throw FormatError("failed writing " + path.string());
}

ModelGraph load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model manifest " + path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": manifest does not parse: " + e.what());
  }

  ModelGraph model;
  std::vector<char> bytes;
  try {
    if (manifest.value("format", "") != "thinner-model") {
      throw FormatError(path.string() + ": not a thinner model manifest");
    }
    if (manifest.at("version").get<int>() != kModelFormatVersion) {
      throw FormatError(path.string() + ": unsupported model format version");
    }
    const auto& ishape = manifest.at("input_shape");
    if (!ishape.is_array() || ishape.size() != 3) {
      throw FormatError(path.string() + ": input_shape must be [C, H, W]");
    }
    model.input_shape = {1, ishape[0].get<int>(), ishape[1].get<int>(), ishape[2].get<int>()};
    model.classes = manifest.at("classes").get<int>();
    for (const auto& l : manifest.at("layers")) model.layers.push_back(layer_from_json(l));

    const fs::path blob_path = path.parent_path() / manifest.at("blob_file").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw FormatError("cannot open blob file " + blob_path.string());
    bytes.assign(std::istreambuf_iterator<char>(blob), std::istreambuf_iterator<char>());

    for (const auto& b : manifest.at("blobs")) {
      const std::string name = b.at("name").get<std::string>();
      const std::string layer = b.at("layer").get<std::string>();
      const std::string role = b.at("role").get<std::string>();
      const Shape shape = shape_from_json(b.at("shape"), "blob '" + name + "'");
      const auto offset = b.at("offset").get<std::uint64_t>();
      const auto length = b.at("length").get<std::uint64_t>();
      if (length != shape.count() * sizeof(float)) {
        throw FormatError("blob '" + name + "' declares shape " + shape.str() + " (" +
                          std::to_string(shape.count()) + " floats) over a region of " +
                          std::to_string(length / sizeof(float)) + " floats");
      }
      if (offset + length > bytes.size()) {
        throw FormatError("blob '" + name + "' extends past the end of " + blob_path.string());
      }
      std::vector<float> values(shape.count());
      std::memcpy(values.data(), bytes.data() + offset, length);
      const std::string checksum = hex64(fnv1a64(std::as_bytes(std::span<const float>(values))));
      if (checksum != b.at("fnv1a64").get<std::string>()) {
        throw FormatError("blob '" + name + "' fails its checksum");
      }
      if (model.index_of(layer) < 0) {
        throw FormatError("blob '" + name + "' belongs to unknown layer '" + layer + "'");
      }
      auto& p = model.params[layer];
      if (role == "weight") {
        p.weight = Tensor(shape, std::move(values));
      } else if (role == "bias") {
        p.bias = std::move(values);
      } else {
        throw FormatError("blob '" + name + "' has unknown role '" + role + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed manifest: " + e.what());
  }
  // Bias-free convs carry an implicit zero bias.
  for (const auto& spec : model.layers) {
    if (spec.kind == LayerKind::conv && !spec.bias) {
      auto it = model.params.find(spec.id);
      if (it != model.params.end()) it->second.bias.assign(spec.out_channels, 0.0f);
    }
  }
  model.validate();
  return model;
}

void Dataset::validate(std::optional<int> classes) const {
  if (static_cast<int>(labels.size()) != images.shape().n) {
    throw ConfigError("dataset has " + std::to_string(images.shape().n) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || (classes && labels[i] >= *classes)) {
      throw ConfigError("label " + std::to_string(labels[i]) + " at index " +
                        std::to_string(i) + " is out of range" +
                        (classes ? " for " + std::to_string(*classes) + " classes" : ""));
    }
  }
}

Dataset Dataset::subset(std::span<const int> indices) const {
  Dataset out{gather_samples(images, indices), {}};
  out.labels.reserve(indices.size());
  for (int i : indices) out.labels.push_back(labels[i]);
  return out;
}

void save_dataset(const Dataset& data, const fs::path& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kDatasetMagic, 4);
  write_u32(out, kDatasetVersion);
  const Shape& s = data.images.shape();
  for (int e : {s.n, s.c, s.h, s.w}) write_u32(out, static_cast<std::uint32_t>(e));
  write_floats(out, data.images.data());
  for (int label : data.labels) write_u32(out, static_cast<std::uint32_t>(label));
  if (!out) throw FormatError("failed writing " + path.string());
}

Dataset load_dataset(const fs::path& path, std::optional<int> classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError(path.string() + ": truncated dataset file");
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) throw FormatError(path.string() + ": bad magic");
  if (read_u32(in, path) != kDatasetVersion) throw FormatError(path.string() + ": unsupported dataset version");
  Shape s;
  s.n = static_cast<int>(read_u32(in, path));
  s.c = static_cast<int>(read_u32(in, path));
  s.h = static_cast<int>(read_u32(in, path));
  s.w = static_cast<int>(read_u32(in, path));
  if (!s.valid()) throw FormatError(path.string() + ": invalid dataset shape " + s.str());
  std::vector<float> values(s.count());
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(float)))) {
    throw FormatError(path.string() + ": truncated dataset file");
  }
  Dataset data{Tensor(s, std::move(values)), std::vector<int>(s.n)};
  for (int i = 0; i < s.n; ++i) data.labels[i] = static_cast<int>(read_u32(in, path));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after dataset payload");
  }
  try {
    data.validate(classes);
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return data;
}

Dataset generate_synthetic(int classes, int per_class, Shape chw, std::uint64_t seed,
                           double noise) {
  if (classes < 2 || per_class < 1) throw ConfigError("synthetic data needs >= 2 classes and >= 1 image per class");
  chw.n = 1;
  if (!chw.valid()) throw ConfigError("invalid synthetic image shape " + chw.str());
  Rng proto_rng = make_rng(seed, "synthetic-prototypes");
  Rng noise_rng = make_rng(seed, "synthetic-noise");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Each prototype is a sum of three Gaussian bumps with per-channel
  // amplitudes, normalized to unit RMS.
  constexpr int kBumps = 3;
  const double sigma = 0.2 * std::max(chw.h, chw.w);
  std::vector<std::vector<double>> prototypes(classes, std::vector<double>(chw.sample_size(), 0.0));
  for (auto& proto : prototypes) {
    for (int b = 0; b < kBumps; ++b) {
      const double cy = unit(proto_rng) * (chw.h - 1);
      const double cx = unit(proto_rng) * (chw.w - 1);
      std::vector<double> amp(chw.c);
      for (double& a : amp) a = gauss(proto_rng);
      for (int c = 0; c < chw.c; ++c)
        for (int y = 0; y < chw.h; ++y)
          for (int x = 0; x < chw.w; ++x) {
            const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            proto[(static_cast<std::size_t>(c) * chw.h + y) * chw.w + x] +=
                amp[c] * std::exp(-r2 / (2.0 * sigma * sigma));
          }
    }
    double ss = 0.0;
    for (double v : proto) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(proto.size()));
    if (rms > 0.0)
      for (double& v : proto) v /= rms;
  }

  Shape s = chw;
  s.n = classes * per_class;
  Dataset data{Tensor(s), std::vector<int>(s.n)};
  for (int k = 0; k < classes; ++k)
    for (int i = 0; i < per_class; ++i) {
      const int n = k * per_class + i;
      data.labels[n] = k;
      float* dst = data.images.sample(n);
      for (std::size_t j = 0; j < chw.sample_size(); ++j)
        dst[j] = static_cast<float>(prototypes[k][j] + noise * gauss(noise_rng));
    }
  return data;
}

}  // namespace thinner
