#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mfkl/errors.hpp"
#include "mfkl/pipeline.hpp"

namespace mfkl {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

double get_double(const json& obj, const std::string& key, double fallback,
                  const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError(where + "." + key + ": expected a number");
  return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback,
            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return obj[key].get<int>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback,
              const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    throw ConfigError(where + "." + key + ": expected a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw ConfigError(where + "." + key + ": expected a string");
  return obj[key].get<std::string>();
}

std::vector<double> get_double_list(const json& obj, const std::string& key,
                                    std::vector<double> fallback,
                                    const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_array() || obj[key].empty())
    throw ConfigError(where + "." + key + ": expected a non-empty array");
  std::vector<double> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number())
      throw ConfigError(where + "." + key + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<int> get_int_list(const json& obj, const std::string& key,
                              std::vector<int> fallback,
                              const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_array() || obj[key].empty())
    throw ConfigError(where + "." + key + ": expected a non-empty array");
  std::vector<int> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number_integer())
      throw ConfigError(where + "." + key + ": expected integers");
    out.push_back(v.get<int>());
  }
  return out;
}

std::string fnv1a_digest(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : text) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

DatasetConfig parse_dataset(const json& obj) {
  DatasetConfig out;
  std::string mode = get_string(obj, "mode", "dataset");
  if (mode == "image") {
    check_keys(obj, "dataset", {"mode", "gallery_dir", "probe_dir"});
    out.image_mode = true;
    out.gallery_dir = get_string(obj, "gallery_dir", "dataset");
    out.probe_dir = get_string(obj, "probe_dir", "dataset");
  } else if (mode == "feature") {
    check_keys(obj, "dataset", {"mode", "channels"});
    out.image_mode = false;
    if (!obj.contains("channels") || !obj["channels"].is_array() ||
        obj["channels"].empty())
      throw ConfigError("dataset.channels: expected a non-empty array");
    std::set<std::string> seen;
    for (const auto& ch : obj["channels"]) {
      check_keys(ch, "dataset.channels[]", {"name", "gallery_csv", "probe_csv"});
      ChannelConfig channel;
      channel.name = get_string(ch, "name", "dataset.channels[]");
      channel.gallery_csv = get_string(ch, "gallery_csv", "dataset.channels[]");
      channel.probe_csv = get_string(ch, "probe_csv", "dataset.channels[]");
      if (channel.name.empty())
        throw ConfigError("dataset.channels[].name: must not be empty");
      if (!seen.insert(channel.name).second)
        throw ConfigError("dataset.channels: duplicate channel '" +
                          channel.name + "'");
      out.channels.push_back(std::move(channel));
    }
  } else {
    throw ConfigError("dataset.mode: must be 'image' or 'feature'");
  }
  return out;
}

PreprocessingConfig parse_preprocessing(const json& obj) {
  check_keys(obj, "preprocessing",
             {"gamma", "k", "sigma_grid", "upsample", "enable_degradation"});
  PreprocessingConfig out;
  out.gamma = get_double(obj, "gamma", out.gamma, "preprocessing");
  out.k = get_double(obj, "k", out.k, "preprocessing");
  out.upsample = get_double(obj, "upsample", out.upsample, "preprocessing");
  out.enable_degradation = get_bool(obj, "enable_degradation",
                                    out.enable_degradation, "preprocessing");
  if (obj.contains("sigma_grid")) {
    const auto& grid = obj["sigma_grid"];
    check_keys(grid, "preprocessing.sigma_grid", {"lo", "hi", "step"});
    out.sigma_grid.lo =
        get_double(grid, "lo", out.sigma_grid.lo, "preprocessing.sigma_grid");
    out.sigma_grid.hi =
        get_double(grid, "hi", out.sigma_grid.hi, "preprocessing.sigma_grid");
    out.sigma_grid.step = get_double(grid, "step", out.sigma_grid.step,
                                     "preprocessing.sigma_grid");
  }
  if (!(out.gamma > 0)) throw ConfigError("preprocessing.gamma: must be > 0");
  if (!(out.k > 0)) throw ConfigError("preprocessing.k: must be > 0");
  if (!(out.upsample > 0))
    throw ConfigError("preprocessing.upsample: must be > 0");
  if (!(out.sigma_grid.lo > 0) || !(out.sigma_grid.step > 0) ||
      out.sigma_grid.hi < out.sigma_grid.lo)
    throw ConfigError("preprocessing.sigma_grid: need 0 < lo <= hi, step > 0");
  return out;
}

FeatureConfig parse_feature(const json& obj) {
  FeatureConfig out;
  std::string name = get_string(obj, "name", "features[]");
  out.id = feat::feature_from_name(name);
  std::string where = "features[" + name + "]";
  switch (out.id) {
    case feat::FeatureId::Lbp:
      check_keys(obj, where, {"name", "grid_rows", "grid_cols"});
      out.grid_rows = get_int(obj, "grid_rows", out.grid_rows, where);
      out.grid_cols = get_int(obj, "grid_cols", out.grid_cols, where);
      if (out.grid_rows < 1 || out.grid_cols < 1)
        throw ConfigError(where + ": grid must be at least 1x1");
      break;
    case feat::FeatureId::EigenFace:
      check_keys(obj, where, {"name", "variance_keep"});
      out.variance_keep =
          get_double(obj, "variance_keep", out.variance_keep, where);
      if (!(out.variance_keep > 0) || out.variance_keep > 1.0)
        throw ConfigError(where + ": variance_keep must lie in (0, 1]");
      break;
    case feat::FeatureId::FisherFace:
      check_keys(obj, where, {"name"});
      break;
    case feat::FeatureId::GaborFace:
      check_keys(obj, where, {"name", "scales", "orientations"});
      out.scales = get_int_list(obj, "scales", out.scales, where);
      out.orientations = get_int(obj, "orientations", out.orientations, where);
      for (int v : out.scales)
        if (v < 0) throw ConfigError(where + ": scales must be >= 0");
      if (out.orientations < 1)
        throw ConfigError(where + ": orientations must be >= 1");
      break;
    case feat::FeatureId::WeberFace:
      check_keys(obj, where, {"name", "alpha"});
      out.alpha_w = get_double(obj, "alpha", out.alpha_w, where);
      if (!(out.alpha_w > 0)) throw ConfigError(where + ": alpha must be > 0");
      break;
    case feat::FeatureId::Bow:
    case feat::FeatureId::Vlad:
      check_keys(obj, where, {"name", "k", "patch", "stride"});
      out.codebook_k = get_int(obj, "k", out.codebook_k, where);
      out.patch = get_int(obj, "patch", out.patch, where);
      out.stride = get_int(obj, "stride", out.stride, where);
      if (out.codebook_k < 1) throw ConfigError(where + ": k must be >= 1");
      if (out.patch < 4 || out.patch % 4 != 0)
        throw ConfigError(where + ": patch must be a positive multiple of 4");
      if (out.stride < 1) throw ConfigError(where + ": stride must be >= 1");
      break;
  }
  return out;
}

KernelGridConfig parse_kernel(const json& obj) {
  KernelGridConfig out;
  std::string family = get_string(obj, "family", "kernels[]");
  out.family = family_from_name(family);
  std::string where = "kernels[" + family + "]";
  switch (out.family) {
    case KernelFamily::Linear:
      check_keys(obj, where, {"family", "c"});
      out.c = get_double_list(obj, "c", out.c, where);
      break;
    case KernelFamily::Polynomial:
      check_keys(obj, where, {"family", "alpha", "c", "degree"});
      out.alpha = get_double_list(obj, "alpha", out.alpha, where);
      out.c = get_double_list(obj, "c", {1.0}, where);
      if (obj.contains("degree")) {
        out.degree = get_int_list(obj, "degree", out.degree, where);
        for (int d : out.degree)
          if (d < 1) throw ConfigError(where + ": degree must be >= 1");
      }
      for (double a : out.alpha)
        if (!(a > 0)) throw ConfigError(where + ": alpha must be > 0");
      for (double c : out.c)
        if (c < 0) throw ConfigError(where + ": c must be >= 0");
      break;
    case KernelFamily::Gaussian:
    case KernelFamily::Rbf:
    case KernelFamily::RbfPlusChiSquare:
      check_keys(obj, where, {"family", "sigma_scale"});
      out.sigma_scale = get_double_list(obj, "sigma_scale", out.sigma_scale, where);
      for (double s : out.sigma_scale)
        if (!(s > 0)) throw ConfigError(where + ": sigma_scale must be > 0");
      break;
    case KernelFamily::ChiSquare:
      check_keys(obj, where, {"family"});
      break;
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"dataset", "preprocessing", "features", "kernels", "mkl", "da",
              "knn", "metrics", "output_dir"});

  ExperimentConfig cfg;
  if (!root.contains("dataset"))
    throw ConfigError("config: missing required 'dataset'");
  cfg.dataset = parse_dataset(root["dataset"]);

  if (root.contains("preprocessing"))
    cfg.preprocessing = parse_preprocessing(root["preprocessing"]);

  if (root.contains("features")) {
    if (!root["features"].is_array())
      throw ConfigError("features: expected an array");
    std::set<feat::FeatureId> seen;
    for (const auto& f : root["features"]) {
      FeatureConfig fc = parse_feature(f);
      if (!seen.insert(fc.id).second)
        throw ConfigError("features: duplicate feature '" +
                          feat::feature_name(fc.id) + "'");
      cfg.features.push_back(std::move(fc));
    }
  }
  if (cfg.dataset.image_mode && cfg.features.empty())
    throw ConfigError("config: image mode needs at least one feature");
  if (!cfg.dataset.image_mode && !cfg.features.empty())
    throw ConfigError("config: 'features' applies to image mode only");

  if (!root.contains("kernels") || !root["kernels"].is_array() ||
      root["kernels"].empty())
    throw ConfigError("config: need at least one kernel");
  {
    std::set<KernelFamily> seen;
    for (const auto& k : root["kernels"]) {
      KernelGridConfig kc = parse_kernel(k);
      if (!seen.insert(kc.family).second)
        throw ConfigError("kernels: duplicate family '" +
                          family_name(kc.family) + "'");
      cfg.kernels.push_back(std::move(kc));
    }
  }

  if (root.contains("mkl")) {
    const auto& obj = root["mkl"];
    check_keys(obj, "mkl", {"C", "threshold", "max_iterations", "seed"});
    cfg.mkl.C = get_double(obj, "C", cfg.mkl.C, "mkl");
    cfg.mkl.threshold = get_double(obj, "threshold", cfg.mkl.threshold, "mkl");
    cfg.mkl.max_iterations =
        get_int(obj, "max_iterations", cfg.mkl.max_iterations, "mkl");
    if (obj.contains("seed")) {
      if (!obj["seed"].is_number_unsigned() && !obj["seed"].is_number_integer())
        throw ConfigError("mkl.seed: expected an integer");
      long long seed = obj["seed"].get<long long>();
      if (seed < 0) throw ConfigError("mkl.seed: must be >= 0");
      cfg.mkl.seed = static_cast<std::uint64_t>(seed);
    }
    if (!(cfg.mkl.C > 0)) throw ConfigError("mkl.C: must be > 0");
    if (cfg.mkl.threshold < 0 || cfg.mkl.threshold >= 1)
      throw ConfigError("mkl.threshold: must lie in [0, 1)");
    if (cfg.mkl.max_iterations < 1)
      throw ConfigError("mkl.max_iterations: must be >= 1");
  }

  if (root.contains("da")) {
    const auto& obj = root["da"];
    check_keys(obj, "da", {"enabled", "rank_tol", "targets_per_subject"});
    cfg.da.enabled = get_bool(obj, "enabled", cfg.da.enabled, "da");
    cfg.da.rank_tol = get_double(obj, "rank_tol", cfg.da.rank_tol, "da");
    cfg.da.targets_per_subject =
        get_int(obj, "targets_per_subject", cfg.da.targets_per_subject, "da");
    if (!(cfg.da.rank_tol > 0)) throw ConfigError("da.rank_tol: must be > 0");
    if (cfg.da.targets_per_subject < 0)
      throw ConfigError("da.targets_per_subject: must be >= 0");
  }

  if (root.contains("knn")) {
    const auto& obj = root["knn"];
    check_keys(obj, "knn", {"k"});
    cfg.knn.k = get_int(obj, "k", cfg.knn.k, "knn");
    if (cfg.knn.k < 1) throw ConfigError("knn.k: must be >= 1");
  }

  if (root.contains("metrics")) {
    const auto& obj = root["metrics"];
    check_keys(obj, "metrics", {"rank_max", "roc_points"});
    cfg.metrics.rank_max = get_int(obj, "rank_max", cfg.metrics.rank_max, "metrics");
    cfg.metrics.roc_points =
        get_int(obj, "roc_points", cfg.metrics.roc_points, "metrics");
    if (cfg.metrics.rank_max < 0)
      throw ConfigError("metrics.rank_max: must be >= 0");
    if (cfg.metrics.roc_points < 0)
      throw ConfigError("metrics.roc_points: must be >= 0");
  }

  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string() ||
        root["output_dir"].get<std::string>().empty())
      throw ConfigError("output_dir: expected a non-empty string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }

  cfg.digest = fnv1a_digest(root.dump());
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig cfg = parse_config(buffer.str());

  // Relative dataset/output paths are taken relative to the config file.
  namespace fs = std::filesystem;
  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  resolve(cfg.dataset.gallery_dir);
  resolve(cfg.dataset.probe_dir);
  for (auto& ch : cfg.dataset.channels) {
    resolve(ch.gallery_csv);
    resolve(ch.probe_csv);
  }
  resolve(cfg.output_dir);
  return cfg;
}

void validate_paths(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  if (config.dataset.image_mode) {
    if (!fs::is_directory(config.dataset.gallery_dir))
      throw DataError("gallery_dir '" + config.dataset.gallery_dir +
                      "' is not a directory");
    if (!fs::is_directory(config.dataset.probe_dir))
      throw DataError("probe_dir '" + config.dataset.probe_dir +
                      "' is not a directory");
  } else {
    for (const auto& ch : config.dataset.channels) {
      if (!fs::is_regular_file(ch.gallery_csv))
        throw DataError("channel '" + ch.name + "': gallery csv '" +
                        ch.gallery_csv + "' not found");
      if (!fs::is_regular_file(ch.probe_csv))
        throw DataError("channel '" + ch.name + "': probe csv '" +
                        ch.probe_csv + "' not found");
    }
  }
}

}  // namespace mfkl
