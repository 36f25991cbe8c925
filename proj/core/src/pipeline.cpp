#include "mfkl/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mfkl/eigen_da.hpp"
#include "mfkl/errors.hpp"
#include "mfkl/parallel.hpp"
#include "mfkl/solver.hpp"

#ifndef MFKL_VERSION_STRING
#define MFKL_VERSION_STRING "0.1.0"
#endif

namespace mfkl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Error capture for parallel regions (keeps the exception category).
// ---------------------------------------------------------------------------

enum class ErrKind { None, Config, Data, Numeric, Other };

struct ErrSlot {
  ErrKind kind = ErrKind::None;
  std::string msg;
};

template <typename Fn>
void capture_into(ErrSlot& slot, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    slot = {ErrKind::Config, e.what()};
  } catch (const DataError& e) {
    slot = {ErrKind::Data, e.what()};
  } catch (const NumericError& e) {
    slot = {ErrKind::Numeric, e.what()};
  } catch (const std::exception& e) {
    slot = {ErrKind::Other, e.what()};
  }
}

void rethrow_first(const std::vector<ErrSlot>& slots) {
  for (const auto& s : slots) {
    switch (s.kind) {
      case ErrKind::None: continue;
      case ErrKind::Config: throw ConfigError(s.msg);
      case ErrKind::Data: throw DataError(s.msg);
      case ErrKind::Numeric: throw NumericError(s.msg);
      case ErrKind::Other: throw NumericError(s.msg);
    }
  }
}

// ---------------------------------------------------------------------------
// JSON round-trip helpers for the bundle and cache files.
// ---------------------------------------------------------------------------

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + ": expected an array of rows");
  if (j.empty()) return Eigen::MatrixXd();
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) throw DataError(what + ": expected nested arrays");
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError(what + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw DataError(what + ": expected numbers");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) throw DataError(what + ": expected numbers");
    v[i] = x.get<double>();
  }
  return v;
}

json kernel_to_json(const KernelSpec& spec) {
  return json{{"family", family_name(spec.family)},
              {"c", spec.c},
              {"alpha", spec.alpha},
              {"degree", spec.degree},
              {"sigma", spec.sigma}};
}

KernelSpec kernel_from_json(const json& j) {
  KernelSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  spec.c = j.at("c").get<double>();
  spec.alpha = j.at("alpha").get<double>();
  spec.degree = j.at("degree").get<int>();
  spec.sigma = j.at("sigma").get<double>();
  spec.validate();
  return spec;
}

json preprocessing_to_json(const PreprocessingConfig& p) {
  return json{{"gamma", p.gamma},
              {"k", p.k},
              {"upsample", p.upsample},
              {"enable_degradation", p.enable_degradation},
              {"sigma_grid",
               {{"lo", p.sigma_grid.lo},
                {"hi", p.sigma_grid.hi},
                {"step", p.sigma_grid.step}}}};
}

PreprocessingConfig preprocessing_from_json(const json& j) {
  PreprocessingConfig p;
  p.gamma = j.at("gamma").get<double>();
  p.k = j.at("k").get<double>();
  p.upsample = j.at("upsample").get<double>();
  p.enable_degradation = j.at("enable_degradation").get<bool>();
  p.sigma_grid.lo = j.at("sigma_grid").at("lo").get<double>();
  p.sigma_grid.hi = j.at("sigma_grid").at("hi").get<double>();
  p.sigma_grid.step = j.at("sigma_grid").at("step").get<double>();
  return p;
}

json feature_config_to_json(const FeatureConfig& fc) {
  json scales = json::array();
  for (int s : fc.scales) scales.push_back(s);
  return json{{"name", feat::feature_name(fc.id)},
              {"grid_rows", fc.grid_rows},
              {"grid_cols", fc.grid_cols},
              {"variance_keep", fc.variance_keep},
              {"scales", scales},
              {"orientations", fc.orientations},
              {"alpha", fc.alpha_w},
              {"k", fc.codebook_k},
              {"patch", fc.patch},
              {"stride", fc.stride}};
}

FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig fc;
  fc.id = feat::feature_from_name(j.at("name").get<std::string>());
  fc.grid_rows = j.at("grid_rows").get<int>();
  fc.grid_cols = j.at("grid_cols").get<int>();
  fc.variance_keep = j.at("variance_keep").get<double>();
  fc.scales.clear();
  for (const auto& s : j.at("scales")) fc.scales.push_back(s.get<int>());
  fc.orientations = j.at("orientations").get<int>();
  fc.alpha_w = j.at("alpha").get<double>();
  fc.codebook_k = j.at("k").get<int>();
  fc.patch = j.at("patch").get<int>();
  fc.stride = j.at("stride").get<int>();
  return fc;
}

json models_to_json(const std::map<std::string, FeatureModels>& models) {
  json out = json::object();
  for (const auto& [name, m] : models) {
    json entry;
    if (m.has_projection) {
      entry["projection"] = json{{"mean", vector_to_json(m.projection.mean)},
                                 {"basis", matrix_to_json(m.projection.basis)},
                                 {"eigenvalues",
                                  vector_to_json(m.projection.eigenvalues)},
                                 {"width", m.projection.width},
                                 {"height", m.projection.height}};
    }
    if (m.has_codebook) {
      entry["codebook"] = json{{"centers", matrix_to_json(m.codebook.centers)},
                               {"seed", m.codebook.seed},
                               {"trained_on", m.codebook.trained_on}};
    }
    out[name] = std::move(entry);
  }
  return out;
}

std::map<std::string, FeatureModels> models_from_json(const json& j) {
  std::map<std::string, FeatureModels> out;
  for (const auto& item : j.items()) {
    FeatureModels m;
    const json& entry = item.value();
    if (entry.contains("projection")) {
      const json& p = entry["projection"];
      m.has_projection = true;
      m.projection.mean = vector_from_json(p.at("mean"), "model mean");
      m.projection.basis = matrix_from_json(p.at("basis"), "model basis");
      m.projection.eigenvalues =
          vector_from_json(p.at("eigenvalues"), "model eigenvalues");
      m.projection.width = p.at("width").get<int>();
      m.projection.height = p.at("height").get<int>();
    }
    if (entry.contains("codebook")) {
      const json& c = entry["codebook"];
      m.has_codebook = true;
      m.codebook.centers = matrix_from_json(c.at("centers"), "codebook centers");
      m.codebook.seed = c.at("seed").get<std::uint64_t>();
      m.codebook.trained_on = c.at("trained_on").get<std::string>();
    }
    out[item.key()] = std::move(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labeled sample tables.
// ---------------------------------------------------------------------------

struct LabeledSamples {
  SampleMatrix samples;
  std::vector<int> labels;
  std::vector<bool> labeled;
};

LabeledSamples from_table(const feat::FeatureTable& t) {
  LabeledSamples out;
  out.samples.values = t.values;
  out.samples.ids = t.ids;
  out.labels = t.labels;
  out.labeled = t.labeled;
  return out;
}

feat::FeatureTable to_table(const LabeledSamples& s) {
  feat::FeatureTable t;
  t.values = s.samples.values;
  t.ids = s.samples.ids;
  t.labels = s.labels;
  t.labeled = s.labeled;
  return t;
}

// ---------------------------------------------------------------------------
// Image-mode dataset loading and preparation.
// ---------------------------------------------------------------------------

struct ImageSet {
  std::vector<GrayImage> images;
  std::vector<std::string> ids;  // "<class>/<file>"
  std::vector<int> labels;
  std::vector<std::string> class_names;  // sorted; label = index
};

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm";
}

// gallery/<class>/*.png|pgm; class directories become classes in sorted
// order. When `name_to_id` is given (probe side), directory names must map
// into it.
ImageSet load_image_dir(const std::string& dir,
                        const std::map<std::string, int>* name_to_id) {
  if (!fs::is_directory(dir))
    throw DataError("'" + dir + "' is not a directory");
  std::vector<std::pair<std::string, std::vector<fs::path>>> classes;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(entry.path()))
      if (f.is_regular_file() && has_image_extension(f.path()))
        files.push_back(f.path());
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    classes.emplace_back(entry.path().filename().string(), std::move(files));
  }
  std::sort(classes.begin(), classes.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (classes.empty())
    throw DataError("'" + dir + "' contains no class directories with images");

  ImageSet out;
  for (const auto& [name, files] : classes) {
    int label;
    if (name_to_id) {
      auto it = name_to_id->find(name);
      if (it == name_to_id->end())
        throw DataError("probe class '" + name + "' not present in gallery");
      label = it->second;
    } else {
      label = static_cast<int>(out.class_names.size());
      out.class_names.push_back(name);
    }
    for (const auto& f : files) {
      out.images.push_back(read_image(f.string()));
      out.ids.push_back(name + "/" + f.filename().string());
      out.labels.push_back(label);
    }
  }
  return out;
}

std::pair<int, int> canonical_size(const std::vector<GrayImage>& gallery) {
  std::vector<int> ws, hs;
  for (const auto& img : gallery) {
    ws.push_back(img.width);
    hs.push_back(img.height);
  }
  auto median = [](std::vector<int>& v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  int w = std::max(8, median(ws) / 2);
  int h = std::max(8, median(hs) / 2);
  return {w, h};
}

GrayImage resample_to(const GrayImage& img, int w, int h) {
  if (img.width == w && img.height == h) return img;
  return bicubic_resample(img, static_cast<double>(w) / img.width,
                          static_cast<double>(h) / img.height);
}

std::vector<GrayImage> prepare_gallery(const std::vector<GrayImage>& in, int w,
                                       int h) {
  std::vector<GrayImage> out(in.size());
  std::vector<ErrSlot> errs(in.size());
  parallel_for(in.size(), [&](std::size_t i) {
    capture_into(errs[i], [&] { out[i] = resample_to(in[i], w, h); });
  });
  rethrow_first(errs);
  return out;
}

std::vector<GrayImage> prepare_probes(const std::vector<GrayImage>& in, int w,
                                      int h, const PreprocessingConfig& pre) {
  std::vector<GrayImage> out(in.size());
  std::vector<ErrSlot> errs(in.size());
  parallel_for(in.size(), [&](std::size_t i) {
    capture_into(errs[i], [&] {
      GrayImage img = in[i];
      if (pre.upsample != 1.0) img = bicubic_resample(img, pre.upsample);
      img = resample_to(img, w, h);
      out[i] = power_law(img, pre.gamma, pre.k);
    });
  });
  rethrow_first(errs);
  return out;
}

// ---------------------------------------------------------------------------
// Feature extraction (image mode).
// ---------------------------------------------------------------------------

FeatureModels fit_feature_models(const FeatureConfig& fc,
                                 const std::vector<GrayImage>& gallery,
                                 const std::vector<int>& labels,
                                 std::uint64_t seed,
                                 std::vector<std::string>* warnings) {
  FeatureModels models;
  switch (fc.id) {
    case feat::FeatureId::EigenFace:
      models.has_projection = true;
      models.projection = feat::fit_eigenfaces(gallery, fc.variance_keep);
      break;
    case feat::FeatureId::FisherFace:
      models.has_projection = true;
      models.projection = feat::fit_fisherfaces(gallery, labels, warnings);
      break;
    case feat::FeatureId::Bow:
    case feat::FeatureId::Vlad: {
      std::vector<std::vector<Eigen::VectorXd>> per_image(gallery.size());
      std::vector<ErrSlot> errs(gallery.size());
      parallel_for(gallery.size(), [&](std::size_t i) {
        capture_into(errs[i], [&] {
          per_image[i] =
              feat::dense_patch_descriptors(gallery[i], fc.patch, fc.stride);
        });
      });
      rethrow_first(errs);
      std::vector<Eigen::VectorXd> pool;
      for (auto& v : per_image)
        for (auto& d : v) pool.push_back(std::move(d));
      models.has_codebook = true;
      models.codebook = feat::fit_codebook(pool, fc.codebook_k, seed);
      break;
    }
    default:
      break;  // stateless extractors
  }
  return models;
}

Eigen::VectorXd extract_one(const GrayImage& img, const FeatureConfig& fc,
                            const FeatureModels& models) {
  switch (fc.id) {
    case feat::FeatureId::Lbp:
      return feat::lbp_histogram(img, fc.grid_rows, fc.grid_cols).values;
    case feat::FeatureId::EigenFace:
    case feat::FeatureId::FisherFace:
      return models.projection.project(img);
    case feat::FeatureId::GaborFace:
      return feat::gabor_face(img, fc.scales, fc.orientations).values;
    case feat::FeatureId::WeberFace:
      return feat::weber_face(img, fc.alpha_w).values;
    case feat::FeatureId::Bow:
      return feat::bow_encode(
                 feat::dense_patch_descriptors(img, fc.patch, fc.stride),
                 models.codebook)
          .values;
    case feat::FeatureId::Vlad:
      return feat::vlad_encode(
                 feat::dense_patch_descriptors(img, fc.patch, fc.stride),
                 models.codebook)
          .values;
  }
  throw ConfigError("unknown feature id");
}

LabeledSamples extract_set(const std::vector<GrayImage>& images,
                           const std::vector<std::string>& ids,
                           const std::vector<int>& labels,
                           const FeatureConfig& fc, const FeatureModels& models) {
  std::vector<Eigen::VectorXd> rows(images.size());
  std::vector<ErrSlot> errs(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    capture_into(errs[i], [&] { rows[i] = extract_one(images[i], fc, models); });
  });
  rethrow_first(errs);
  LabeledSamples out;
  if (!rows.empty()) {
    out.samples.values.resize(static_cast<Eigen::Index>(rows.size()),
                              rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size())
        throw DataError("feature '" + feat::feature_name(fc.id) +
                        "': inconsistent dimensions across images");
      out.samples.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
  }
  out.samples.ids = ids;
  out.labels = labels;
  out.labeled.assign(labels.size(), true);
  return out;
}

// ---------------------------------------------------------------------------
// Extraction cache (image mode), keyed by the config digest.
// ---------------------------------------------------------------------------

fs::path cache_dir(const ExperimentConfig& config) {
  return fs::path(config.output_dir) / "cache" / config.digest;
}

bool try_load_cached(const fs::path& dir, const std::string& feature,
                     const std::vector<std::string>& gallery_ids,
                     const std::vector<std::string>& probe_ids,
                     LabeledSamples& gallery, LabeledSamples& probes,
                     FeatureModels& models) {
  fs::path gpath = dir / ("gallery_" + feature + ".csv");
  fs::path ppath = dir / ("probe_" + feature + ".csv");
  fs::path mpath = dir / "models.json";
  if (!fs::is_regular_file(gpath) || !fs::is_regular_file(ppath) ||
      !fs::is_regular_file(mpath))
    return false;
  try {
    LabeledSamples g = from_table(feat::read_feature_csv(gpath.string()));
    LabeledSamples p = from_table(feat::read_feature_csv(ppath.string()));
    if (g.samples.ids != gallery_ids || p.samples.ids != probe_ids) return false;
    std::ifstream in(mpath);
    json j = json::parse(in);
    auto all = models_from_json(j);
    auto it = all.find(feature);
    if (it == all.end()) return false;
    gallery = std::move(g);
    probes = std::move(p);
    models = it->second;
    return true;
  } catch (const std::exception&) {
    return false;  // unreadable cache entries are treated as absent
  }
}

void save_cache(const fs::path& dir, const std::string& feature,
                const LabeledSamples& gallery, const LabeledSamples& probes,
                const std::map<std::string, FeatureModels>& all_models) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return;  // cache is best-effort
  try {
    feat::write_feature_csv((dir / ("gallery_" + feature + ".csv")).string(),
                            to_table(gallery));
    feat::write_feature_csv((dir / ("probe_" + feature + ".csv")).string(),
                            to_table(probes));
    std::ofstream out(dir / "models.json");
    out << models_to_json(all_models).dump(1) << '\n';
  } catch (const std::exception&) {
    // best-effort: a failed cache write never fails the run
  }
}

// ---------------------------------------------------------------------------
// Kernel grid expansion with the median-distance bandwidth heuristic.
// ---------------------------------------------------------------------------

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) return 0.0;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d.push_back((x.row(i) - x.row(j)).norm());
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

std::vector<KernelSpec> expand_kernels(const std::vector<KernelGridConfig>& grids,
                                       const Eigen::MatrixXd& gallery_values,
                                       bool non_negative,
                                       const std::string& feature,
                                       std::vector<std::string>* warnings) {
  double med = median_pairwise_distance(gallery_values);
  auto gaussian_sigma = [&](double scale) {
    return med > 0 ? scale * med : scale;
  };
  auto rbf_sigma = [&](double scale) {
    return med > 0 ? scale * std::sqrt(med / 2.0) : scale;
  };

  std::vector<KernelSpec> specs;
  for (const auto& grid : grids) {
    switch (grid.family) {
      case KernelFamily::Linear:
        for (double c : grid.c) {
          KernelSpec s;
          s.family = KernelFamily::Linear;
          s.c = c;
          specs.push_back(s);
        }
        break;
      case KernelFamily::Polynomial:
        for (double a : grid.alpha)
          for (double c : grid.c)
            for (int deg : grid.degree) {
              KernelSpec s;
              s.family = KernelFamily::Polynomial;
              s.alpha = a;
              s.c = c;
              s.degree = deg;
              specs.push_back(s);
            }
        break;
      case KernelFamily::Gaussian:
        for (double scale : grid.sigma_scale) {
          KernelSpec s;
          s.family = KernelFamily::Gaussian;
          s.sigma = gaussian_sigma(scale);
          specs.push_back(s);
        }
        break;
      case KernelFamily::Rbf:
        for (double scale : grid.sigma_scale) {
          KernelSpec s;
          s.family = KernelFamily::Rbf;
          s.sigma = rbf_sigma(scale);
          specs.push_back(s);
        }
        break;
      case KernelFamily::ChiSquare: {
        if (!non_negative) {
          if (warnings)
            warnings->push_back("feature '" + feature +
                                "': ChiSquare skipped (negative values)");
          break;
        }
        KernelSpec s;
        s.family = KernelFamily::ChiSquare;
        specs.push_back(s);
        break;
      }
      case KernelFamily::RbfPlusChiSquare:
        if (!non_negative) {
          if (warnings)
            warnings->push_back("feature '" + feature +
                                "': RbfPlusChiSquare skipped (negative values)");
          break;
        }
        for (double scale : grid.sigma_scale) {
          KernelSpec s;
          s.family = KernelFamily::RbfPlusChiSquare;
          s.sigma = rbf_sigma(scale);
          specs.push_back(s);
        }
        break;
    }
  }
  if (specs.empty())
    throw DataError("feature '" + feature +
                    "': every configured kernel was skipped");
  for (auto& s : specs) s.validate();
  return specs;
}

// ---------------------------------------------------------------------------
// Target subset selection for the adaptation pool.
// ---------------------------------------------------------------------------

std::vector<Eigen::Index> select_target_rows(const LabeledSamples& probes,
                                             int per_subject) {
  std::vector<Eigen::Index> rows;
  if (per_subject == 0) {
    rows.resize(static_cast<std::size_t>(probes.samples.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
  }
  std::map<int, int> taken;
  for (Eigen::Index i = 0; i < probes.samples.rows(); ++i) {
    if (!probes.labeled[static_cast<std::size_t>(i)]) continue;
    int& count = taken[probes.labels[static_cast<std::size_t>(i)]];
    if (count < per_subject) {
      rows.push_back(i);
      ++count;
    }
  }
  if (rows.empty())
    throw DataError(
        "domain adaptation: no target samples selected (probes unlabeled and "
        "targets_per_subject > 0)");
  return rows;
}

SampleMatrix take_rows(const SampleMatrix& in,
                       const std::vector<Eigen::Index>& rows) {
  SampleMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), in.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = in.values.row(rows[i]);
    if (!in.ids.empty())
      out.ids.push_back(in.ids[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Core training over per-feature labeled tables (both modes converge here).
// ---------------------------------------------------------------------------

void check_tables_consistent(
    const std::map<std::string, LabeledSamples>& tables, const char* what) {
  const LabeledSamples* first = nullptr;
  std::string first_name;
  for (const auto& [name, t] : tables) {
    if (!first) {
      first = &t;
      first_name = name;
      continue;
    }
    if (t.samples.ids != first->samples.ids || t.labels != first->labels ||
        t.labeled != first->labeled)
      throw DataError(std::string(what) + ": channels '" + first_name +
                      "' and '" + name + "' disagree on sample ids or labels");
  }
}

void train_on_features(const ExperimentConfig& config,
                       const std::map<std::string, LabeledSamples>& gallery,
                       const std::map<std::string, LabeledSamples>& probes,
                       TrainedBundle& bundle) {
  if (gallery.empty()) throw DataError("training: no features");
  check_tables_consistent(gallery, "gallery");
  check_tables_consistent(probes, "probes");

  const LabeledSamples& g0 = gallery.begin()->second;
  for (bool l : g0.labeled)
    if (!l) throw DataError("training: every gallery sample needs a label");
  const std::vector<int>& labels = g0.labels;

  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2)
    throw DataError("training: need at least 2 gallery classes");
  bool binary = classes.size() == 2 && classes[0] == -1 && classes[1] == 1;

  if (bundle.class_names.empty())
    for (int c : classes) bundle.class_names[c] = std::to_string(c);

  // Per-feature kernel grids and unit-trace Grams for the selection solver.
  std::map<std::string, std::vector<KernelSpec>> specs;
  std::map<std::string, std::vector<GramMatrix>> raw_grams;
  std::map<std::string, std::vector<GramMatrix>> normalized_grams;
  for (const auto& [name, table] : gallery) {
    const auto pit = probes.find(name);
    if (pit == probes.end())
      throw DataError("training: feature '" + name + "' missing probe table");
    bool non_negative = (table.samples.values.array() >= 0.0).all() &&
                        (pit->second.samples.values.array() >= 0.0).all();
    specs[name] = expand_kernels(config.kernels, table.samples.values,
                                 non_negative, name, &bundle.warnings);
    auto& raws = raw_grams[name];
    auto& norms = normalized_grams[name];
    for (const auto& spec : specs[name]) {
      GramMatrix raw = gram(spec, table.samples);
      norms.push_back(unit_trace_normalize(raw));
      raws.push_back(std::move(raw));
    }
  }

  SolverOptions options;
  options.max_iterations = config.mkl.max_iterations;
  FeatureKernelPairing pairing =
      binary ? mfkl_select(normalized_grams, labels, config.mkl.C,
                           config.mkl.threshold, options)
             : mfkl_select_multiclass(normalized_grams, labels, config.mkl.C,
                                      config.mkl.threshold, options);
  bundle.dropped_features = pairing.dropped_features;

  // Shared adaptation subset: channel tables agree on ids and labels, so the
  // row choice from the first channel applies to every feature.
  std::vector<Eigen::Index> target_rows;
  if (bundle.da_enabled)
    target_rows = select_target_rows(probes.begin()->second,
                                     config.da.targets_per_subject);

  for (const auto& selected : pairing.pairs) {
    TrainedPair pair;
    pair.feature = selected.feature;
    pair.kernel = selected.kernel;
    pair.eta = selected.eta;
    pair.beta = selected.beta;
    pair.source = gallery.at(selected.feature).samples;
    pair.source_labels = labels;

    const GramMatrix& k_ss =
        raw_grams.at(selected.feature)[static_cast<std::size_t>(
            selected.kernel_index)];
    if (bundle.da_enabled) {
      pair.target = take_rows(probes.at(selected.feature).samples, target_rows);
      GramMatrix k_tt = gram(pair.kernel, pair.target);
      GramMatrix k_st = gram(pair.kernel, pair.source, pair.target);
      da::DaGramSet adapted = da::kernel_da(k_ss, k_st, k_tt, config.da.rank_tol,
                                            &bundle.warnings);
      pair.source_map = adapted.source_map;
      pair.adapted_diag = adapted.k_ss.diagonal();
    } else {
      pair.adapted_diag = k_ss.values.diagonal();
    }
    bundle.pairs.push_back(std::move(pair));
  }
}

std::map<int, std::string> invert_names(const std::vector<std::string>& names) {
  std::map<int, std::string> out;
  for (std::size_t i = 0; i < names.size(); ++i)
    out[static_cast<int>(i)] = names[i];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public pipeline entry points.
// ---------------------------------------------------------------------------

TrainedBundle run_training(const ExperimentConfig& config) {
  validate_paths(config);
  TrainedBundle bundle;
  bundle.config_digest = config.digest;
  bundle.image_mode = config.dataset.image_mode;
  bundle.da_enabled = config.da.enabled;
  bundle.knn_k = config.knn.k;
  bundle.preprocessing = config.preprocessing;

  std::map<std::string, LabeledSamples> gallery_feats, probe_feats;

  if (config.dataset.image_mode) {
    ImageSet gallery_raw = load_image_dir(config.dataset.gallery_dir, nullptr);
    std::map<std::string, int> name_to_id;
    for (std::size_t i = 0; i < gallery_raw.class_names.size(); ++i)
      name_to_id[gallery_raw.class_names[i]] = static_cast<int>(i);
    ImageSet probe_raw = load_image_dir(config.dataset.probe_dir, &name_to_id);
    bundle.class_names = invert_names(gallery_raw.class_names);

    auto [cw, ch] = canonical_size(gallery_raw.images);
    bundle.canonical_width = cw;
    bundle.canonical_height = ch;

    std::vector<GrayImage> gallery_imgs = prepare_gallery(gallery_raw.images, cw, ch);
    std::vector<GrayImage> probe_imgs =
        prepare_probes(probe_raw.images, cw, ch, config.preprocessing);

    if (config.preprocessing.enable_degradation) {
      SigmaEstimate est = estimate_sigma(
          gallery_imgs, probe_imgs, config.preprocessing.sigma_grid.lo,
          config.preprocessing.sigma_grid.hi, config.preprocessing.sigma_grid.step);
      bundle.sigma_opt = est.sigma_opt;
      bundle.sigma_curve = est.curve;
      std::vector<ErrSlot> errs(gallery_imgs.size());
      std::vector<GrayImage> blurred(gallery_imgs.size());
      parallel_for(gallery_imgs.size(), [&](std::size_t i) {
        capture_into(errs[i], [&] {
          blurred[i] = gaussian_blur(gallery_imgs[i], bundle.sigma_opt);
        });
      });
      rethrow_first(errs);
      gallery_imgs = std::move(blurred);
    }

    fs::path cache = cache_dir(config);
    for (const auto& fc : config.features) {
      std::string name = feat::feature_name(fc.id);
      bundle.feature_params[name] = fc;
      LabeledSamples g, p;
      FeatureModels models;
      if (!try_load_cached(cache, name, gallery_raw.ids, probe_raw.ids, g, p,
                           models)) {
        models = fit_feature_models(fc, gallery_imgs, gallery_raw.labels,
                                    config.mkl.seed, &bundle.warnings);
        g = extract_set(gallery_imgs, gallery_raw.ids, gallery_raw.labels, fc,
                        models);
        p = extract_set(probe_imgs, probe_raw.ids, probe_raw.labels, fc, models);
        bundle.models[name] = models;
        save_cache(cache, name, g, p, bundle.models);
      } else {
        bundle.models[name] = models;
      }
      gallery_feats[name] = std::move(g);
      probe_feats[name] = std::move(p);
    }
  } else {
    for (const auto& ch : config.dataset.channels) {
      gallery_feats[ch.name] =
          from_table(feat::read_feature_csv(ch.gallery_csv));
      probe_feats[ch.name] = from_table(feat::read_feature_csv(ch.probe_csv));
    }
  }

  train_on_features(config, gallery_feats, probe_feats, bundle);

  // Keep only the models of retained features in the bundle.
  std::set<std::string> retained;
  for (const auto& pair : bundle.pairs) retained.insert(pair.feature);
  for (auto it = bundle.models.begin(); it != bundle.models.end();)
    it = retained.count(it->first) ? std::next(it) : bundle.models.erase(it);
  for (auto it = bundle.feature_params.begin(); it != bundle.feature_params.end();)
    it = retained.count(it->first) ? std::next(it)
                                   : bundle.feature_params.erase(it);
  return bundle;
}

void save_bundle(const TrainedBundle& bundle, const std::string& path) {
  json pairs = json::array();
  for (const auto& p : bundle.pairs) {
    json labels = json::array();
    for (int l : p.source_labels) labels.push_back(l);
    pairs.push_back(json{{"feature", p.feature},
                         {"kernel", kernel_to_json(p.kernel)},
                         {"eta", p.eta},
                         {"beta", p.beta},
                         {"source_ids", p.source.ids},
                         {"source_labels", labels},
                         {"source", matrix_to_json(p.source.values)},
                         {"target_ids", p.target.ids},
                         {"target", matrix_to_json(p.target.values)},
                         {"source_map", matrix_to_json(p.source_map)},
                         {"adapted_diag", vector_to_json(p.adapted_diag)}});
  }
  json classes = json::array();
  for (const auto& [id, name] : bundle.class_names)
    classes.push_back(json{{"id", id}, {"name", name}});
  json params = json::object();
  for (const auto& [name, fc] : bundle.feature_params)
    params[name] = feature_config_to_json(fc);
  json curve = json::array();
  for (const auto& [s, kl] : bundle.sigma_curve)
    curve.push_back(json::array({s, kl}));

  json root{{"version", 1},
            {"config_digest", bundle.config_digest},
            {"image_mode", bundle.image_mode},
            {"da_enabled", bundle.da_enabled},
            {"knn_k", bundle.knn_k},
            {"pairs", pairs},
            {"dropped_features", bundle.dropped_features},
            {"classes", classes},
            {"models", models_to_json(bundle.models)},
            {"feature_params", params},
            {"preprocessing", preprocessing_to_json(bundle.preprocessing)},
            {"canonical_width", bundle.canonical_width},
            {"canonical_height", bundle.canonical_height},
            {"sigma_opt", bundle.sigma_opt},
            {"sigma_curve", curve},
            {"warnings", bundle.warnings}};

  fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write bundle '" + path + "'");
  out << root.dump(1) << '\n';
  if (!out) throw DataError("failed writing bundle '" + path + "'");
}

TrainedBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bundle '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("bundle '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    TrainedBundle b;
    if (root.at("version").get<int>() != 1)
      throw DataError("unsupported bundle version");
    b.config_digest = root.at("config_digest").get<std::string>();
    b.image_mode = root.at("image_mode").get<bool>();
    b.da_enabled = root.at("da_enabled").get<bool>();
    b.knn_k = root.at("knn_k").get<int>();
    for (const auto& c : root.at("classes"))
      b.class_names[c.at("id").get<int>()] = c.at("name").get<std::string>();
    b.models = models_from_json(root.at("models"));
    for (const auto& item : root.at("feature_params").items())
      b.feature_params[item.key()] = feature_config_from_json(item.value());
    b.preprocessing = preprocessing_from_json(root.at("preprocessing"));
    b.canonical_width = root.at("canonical_width").get<int>();
    b.canonical_height = root.at("canonical_height").get<int>();
    b.sigma_opt = root.at("sigma_opt").get<double>();
    for (const auto& row : root.at("sigma_curve"))
      b.sigma_curve.emplace_back(row.at(0).get<double>(),
                                 row.at(1).get<double>());
    b.dropped_features =
        root.at("dropped_features").get<std::vector<std::string>>();
    b.warnings = root.at("warnings").get<std::vector<std::string>>();
    for (const auto& pj : root.at("pairs")) {
      TrainedPair p;
      p.feature = pj.at("feature").get<std::string>();
      p.kernel = kernel_from_json(pj.at("kernel"));
      p.eta = pj.at("eta").get<double>();
      p.beta = pj.at("beta").get<double>();
      p.source.ids = pj.at("source_ids").get<std::vector<std::string>>();
      p.source.values = matrix_from_json(pj.at("source"), "bundle source");
      p.source_labels = pj.at("source_labels").get<std::vector<int>>();
      p.target.ids = pj.at("target_ids").get<std::vector<std::string>>();
      p.target.values = matrix_from_json(pj.at("target"), "bundle target");
      p.source_map = matrix_from_json(pj.at("source_map"), "bundle source_map");
      p.adapted_diag =
          vector_from_json(pj.at("adapted_diag"), "bundle adapted_diag");
      b.pairs.push_back(std::move(p));
    }
    if (b.pairs.empty()) throw DataError("bundle has no trained pairs");
    return b;
  } catch (const json::exception& e) {
    throw DataError("bundle '" + path + "' is malformed: " + e.what());
  }
}

EvalResult run_testing(const TrainedBundle& bundle,
                       const ExperimentConfig& config) {
  if (bundle.pairs.empty()) throw DataError("testing: empty bundle");

  // Collect probe features per retained feature.
  std::map<std::string, LabeledSamples> probe_feats;
  if (bundle.image_mode) {
    if (!config.dataset.image_mode)
      throw DataError("testing: bundle was trained on images");
    std::map<std::string, int> name_to_id;
    for (const auto& [id, name] : bundle.class_names) name_to_id[name] = id;
    ImageSet probe_raw = load_image_dir(config.dataset.probe_dir, &name_to_id);
    std::vector<GrayImage> probe_imgs =
        prepare_probes(probe_raw.images, bundle.canonical_width,
                       bundle.canonical_height, bundle.preprocessing);
    for (const auto& [name, fc] : bundle.feature_params) {
      auto mit = bundle.models.find(name);
      if (mit == bundle.models.end())
        throw DataError("testing: bundle lacks models for feature '" + name +
                        "'");
      probe_feats[name] = extract_set(probe_imgs, probe_raw.ids,
                                      probe_raw.labels, fc, mit->second);
    }
  } else {
    if (config.dataset.image_mode)
      throw DataError("testing: bundle was trained on feature tables");
    std::set<std::string> needed;
    for (const auto& pair : bundle.pairs) needed.insert(pair.feature);
    for (const auto& ch : config.dataset.channels) {
      if (!needed.count(ch.name)) continue;
      probe_feats[ch.name] = from_table(feat::read_feature_csv(ch.probe_csv));
    }
    for (const auto& name : needed)
      if (!probe_feats.count(name))
        throw DataError("testing: config lacks channel '" + name +
                        "' required by the bundle");
    check_tables_consistent(probe_feats, "probes");
  }

  // Scored probes: the labeled rows.
  const LabeledSamples& p0 = probe_feats.begin()->second;
  std::vector<Eigen::Index> scored;
  for (Eigen::Index i = 0; i < p0.samples.rows(); ++i)
    if (p0.labeled[static_cast<std::size_t>(i)]) scored.push_back(i);
  if (scored.empty()) throw DataError("testing: no labeled probes to score");
  const Eigen::Index n_probes = static_cast<Eigen::Index>(scored.size());

  std::vector<int> true_labels;
  for (Eigen::Index i : scored)
    true_labels.push_back(p0.labels[static_cast<std::size_t>(i)]);

  std::vector<int> class_ids(bundle.pairs.front().source_labels);
  std::sort(class_ids.begin(), class_ids.end());
  class_ids.erase(std::unique(class_ids.begin(), class_ids.end()),
                  class_ids.end());
  const Eigen::Index n_classes = static_cast<Eigen::Index>(class_ids.size());
  std::map<int, Eigen::Index> class_col;
  for (Eigen::Index c = 0; c < n_classes; ++c)
    class_col[class_ids[static_cast<std::size_t>(c)]] = c;
  for (int t : true_labels)
    if (!class_col.count(t))
      throw DataError("testing: probe class " + std::to_string(t) +
                      " not present in the gallery");

  EvalResult result;
  result.class_ids = class_ids;
  result.probes = static_cast<int>(n_probes);

  std::vector<std::vector<int>> per_feature_preds;
  std::vector<double> betas;
  // Fused verification scores per probe/class, built feature by feature.
  Eigen::MatrixXd verification =
      Eigen::MatrixXd::Zero(n_probes, n_classes);

  for (const auto& pair : bundle.pairs) {
    auto fit = probe_feats.find(pair.feature);
    if (fit == probe_feats.end())
      throw DataError("testing: missing probe features for '" + pair.feature +
                      "'");
    const LabeledSamples& table = fit->second;
    if (table.samples.cols() != pair.source.cols())
      throw DataError("testing: feature '" + pair.feature + "' has dimension " +
                      std::to_string(table.samples.cols()) +
                      " but the bundle was trained with " +
                      std::to_string(pair.source.cols()));

    SampleMatrix probes = take_rows(table.samples, scored);
    const Eigen::Index n_s = pair.source.rows();

    Eigen::VectorXd kzz(n_probes);
    for (Eigen::Index p = 0; p < n_probes; ++p) {
      Eigen::VectorXd z = probes.values.row(p).transpose();
      kzz[p] = eval_kernel(pair.kernel, z, z);
    }

    // Squared RKHS distances probe x source.
    Eigen::MatrixXd dist2(n_probes, n_s);
    if (bundle.da_enabled) {
      GramMatrix u = gram(pair.kernel, pair.target, probes);  // n_T x n_P
      Eigen::RowVectorXd mu = u.values.colwise().mean();
      Eigen::MatrixXd cross =
          pair.source_map *
          (u.values - Eigen::VectorXd::Ones(u.values.rows()) * mu);
      cross.noalias() += Eigen::VectorXd::Ones(n_s) * mu;
      for (Eigen::Index p = 0; p < n_probes; ++p)
        for (Eigen::Index i = 0; i < n_s; ++i)
          dist2(p, i) =
              std::max(0.0, pair.adapted_diag[i] + kzz[p] - 2.0 * cross(i, p));
    } else {
      GramMatrix ksp = gram(pair.kernel, pair.source, probes);  // n_S x n_P
      for (Eigen::Index p = 0; p < n_probes; ++p)
        for (Eigen::Index i = 0; i < n_s; ++i)
          dist2(p, i) = std::max(
              0.0, pair.adapted_diag[i] + kzz[p] - 2.0 * ksp.values(i, p));
    }
    Eigen::MatrixXd dist = dist2.cwiseSqrt();

    std::vector<int> preds =
        da::knn_from_distances(dist, pair.source_labels, config.knn.k);

    double correct = 0;
    for (Eigen::Index p = 0; p < n_probes; ++p)
      if (preds[static_cast<std::size_t>(p)] ==
          true_labels[static_cast<std::size_t>(p)])
        correct += 1.0;
    result.per_feature_rank1[pair.feature] =
        correct / static_cast<double>(n_probes);

    // Per-class minimum distances drive the verification scores.
    Eigen::MatrixXd class_min(n_probes, n_classes);
    class_min.setConstant(std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n_s; ++i) {
      Eigen::Index c =
          class_col.at(pair.source_labels[static_cast<std::size_t>(i)]);
      for (Eigen::Index p = 0; p < n_probes; ++p)
        class_min(p, c) = std::min(class_min(p, c), dist(p, i));
    }
    std::vector<double> flat(class_min.data(),
                             class_min.data() + class_min.size());
    std::nth_element(flat.begin(), flat.begin() + flat.size() / 2, flat.end());
    double med = flat[flat.size() / 2];
    if (!(med > 0)) med = 1.0;
    verification.noalias() += (pair.beta / med) * (-class_min);

    per_feature_preds.push_back(std::move(preds));
    betas.push_back(pair.beta);
  }

  std::vector<int> fused = da::vote_across_features(per_feature_preds, betas);

  // Identification scores: the beta mass each class collected in the vote.
  // compute_cmc breaks score ties by the smaller class id, exactly like the
  // vote itself, so cmc(1) always equals the plurality accuracy below.
  Eigen::MatrixXd vote_scores = Eigen::MatrixXd::Zero(n_probes, n_classes);
  for (std::size_t f = 0; f < per_feature_preds.size(); ++f)
    for (Eigen::Index p = 0; p < n_probes; ++p)
      vote_scores(p, class_col.at(per_feature_preds[f][static_cast<std::size_t>(
                         p)])) += betas[f];

  double correct = 0;
  result.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (Eigen::Index p = 0; p < n_probes; ++p) {
    int t = true_labels[static_cast<std::size_t>(p)];
    int y = fused[static_cast<std::size_t>(p)];
    if (t == y) correct += 1.0;
    result.confusion(class_col.at(t), class_col.at(y)) += 1;
  }
  result.rank1 = correct / static_cast<double>(n_probes);

  int rank_max = config.metrics.rank_max > 0
                     ? std::min<int>(config.metrics.rank_max,
                                     static_cast<int>(n_classes))
                     : static_cast<int>(n_classes);
  result.cmc = compute_cmc(vote_scores, class_ids, true_labels, rank_max);

  std::vector<double> genuine, impostor;
  for (Eigen::Index p = 0; p < n_probes; ++p) {
    Eigen::Index t = class_col.at(true_labels[static_cast<std::size_t>(p)]);
    for (Eigen::Index c = 0; c < n_classes; ++c)
      (c == t ? genuine : impostor).push_back(verification(p, c));
  }
  result.roc = compute_roc(genuine, impostor, config.metrics.roc_points);
  return result;
}

void emit_results(const EvalResult& result, const TrainedBundle& bundle,
                  const ExperimentConfig& config,
                  const std::string& output_dir) {
  fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::is_directory(dir))
    throw DataError("cannot create output dir '" + output_dir + "'");

  auto write_file = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + p.string() + "'");
  };

  json pairing = json::array();
  for (const auto& p : bundle.pairs)
    pairing.push_back(json{{"feature", p.feature},
                           {"kernel", p.kernel.describe()},
                           {"eta", p.eta},
                           {"beta", p.beta}});
  json cmc = json::array();
  for (double r : result.cmc) cmc.push_back(r);
  json roc = json::array();
  for (const auto& pt : result.roc) roc.push_back(json::array({pt.far, pt.vr}));
  json per_feature = json::object();
  for (const auto& [name, r1] : result.per_feature_rank1) per_feature[name] = r1;
  json confusion = json::array();
  for (Eigen::Index i = 0; i < result.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < result.confusion.cols(); ++j)
      row.push_back(result.confusion(i, j));
    confusion.push_back(std::move(row));
  }
  json class_ids = json::array();
  for (int c : result.class_ids) class_ids.push_back(c);

  json results{{"rank1", result.rank1},
               {"config_digest", config.digest},
               {"pairing", pairing},
               {"dropped_features", bundle.dropped_features},
               {"cmc", cmc},
               {"roc", roc},
               {"confusion", confusion},
               {"class_ids", class_ids},
               {"per_feature_rank1", per_feature},
               {"probes", result.probes},
               {"classes", static_cast<int>(result.class_ids.size())},
               {"sigma_opt", bundle.sigma_opt}};
  write_file(dir / "results.json", results.dump(1) + "\n");

  std::ostringstream cmc_csv;
  cmc_csv << "rank,identification_rate\n";
  for (std::size_t r = 0; r < result.cmc.size(); ++r) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", r + 1, result.cmc[r]);
    cmc_csv << buf;
  }
  write_file(dir / "cmc.csv", cmc_csv.str());

  std::ostringstream roc_csv;
  roc_csv << "false_accept_rate,verification_rate\n";
  for (const auto& pt : result.roc) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", pt.far, pt.vr);
    roc_csv << buf;
  }
  write_file(dir / "roc.csv", roc_csv.str());

  std::ostringstream sigma_csv;
  sigma_csv << "sigma,symmetric_kl\n";
  for (const auto& [s, kl] : bundle.sigma_curve) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", s, kl);
    sigma_csv << buf;
  }
  write_file(dir / "sigma_curve.csv", sigma_csv.str());

  char stamp[32] = "unknown";
  {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc;
    if (gmtime_r(&now, &tm_utc))
      std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  }
  json manifest{{"timestamp", stamp},
                {"config_digest", config.digest},
                {"seed", config.mkl.seed},
                {"threads", thread_count()},
                {"warnings", bundle.warnings},
                {"versions",
                 {{"project", MFKL_VERSION_STRING},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)}}}};
  write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

SigmaEstimate run_sigma(const ExperimentConfig& config) {
  if (!config.dataset.image_mode)
    throw ConfigError("sigma estimation requires an image-mode dataset");
  validate_paths(config);
  ImageSet gallery_raw = load_image_dir(config.dataset.gallery_dir, nullptr);
  std::map<std::string, int> name_to_id;
  for (std::size_t i = 0; i < gallery_raw.class_names.size(); ++i)
    name_to_id[gallery_raw.class_names[i]] = static_cast<int>(i);
  ImageSet probe_raw = load_image_dir(config.dataset.probe_dir, &name_to_id);
  auto [cw, ch] = canonical_size(gallery_raw.images);
  std::vector<GrayImage> gallery_imgs = prepare_gallery(gallery_raw.images, cw, ch);
  std::vector<GrayImage> probe_imgs =
      prepare_probes(probe_raw.images, cw, ch, config.preprocessing);
  return estimate_sigma(gallery_imgs, probe_imgs, config.preprocessing.sigma_grid.lo,
                        config.preprocessing.sigma_grid.hi,
                        config.preprocessing.sigma_grid.step);
}

}  // namespace mfkl
