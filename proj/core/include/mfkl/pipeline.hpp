#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfkl/features.hpp"
#include "mfkl/image.hpp"
#include "mfkl/kernel.hpp"
#include "mfkl/metrics.hpp"

namespace mfkl {

// ---------------------------------------------------------------------------
// Experiment configuration (JSON-backed; unknown keys are rejected).
// ---------------------------------------------------------------------------

struct SigmaGridConfig {
  double lo = 0.5;
  double hi = 3.0;
  double step = 0.05;
};

struct PreprocessingConfig {
  double gamma = 1.25;          // power-law exponent applied to probes
  double k = 1.0;               // power-law gain
  SigmaGridConfig sigma_grid;   // blur-matching search grid
  double upsample = 1.0;        // probe upsampling factor before resizing
  bool enable_degradation = true;  // blur-match the gallery to the probes
};

// Per-feature extraction parameters (image mode). Only the fields relevant
// to the feature id are consumed.
struct FeatureConfig {
  feat::FeatureId id = feat::FeatureId::Lbp;
  int grid_rows = 4;             // lbp
  int grid_cols = 4;             // lbp
  double variance_keep = 0.95;   // eigenface
  std::vector<int> scales = {0, 1, 2};  // gaborface
  int orientations = 8;          // gaborface
  double alpha_w = 1.0;          // weberface
  int codebook_k = 64;           // bow / vlad
  int patch = 16;                // bow / vlad descriptor patch
  int stride = 4;                // bow / vlad descriptor stride
};

// One kernel family with hyperparameter grids; the cross product expands
// into concrete KernelSpecs. sigma_scale values multiply the median
// heuristic bandwidth computed on the gallery features.
struct KernelGridConfig {
  KernelFamily family = KernelFamily::Linear;
  std::vector<double> c = {0.0};
  std::vector<double> alpha = {1.0};
  std::vector<int> degree = {2};
  std::vector<double> sigma_scale = {1.0};
};

struct MklConfig {
  double C = 10.0;
  double threshold = 0.1;   // drop features whose best kernel weight <= this
  int max_iterations = 5000;
  std::uint64_t seed = 1;   // synthetic data + codebook clustering only
};

struct DaConfig {
  bool enabled = true;
  double rank_tol = 1e-10;
  int targets_per_subject = 0;  // 0 = every probe joins the target pool
};

struct KnnConfig {
  int k = 1;
};

struct MetricsConfig {
  int rank_max = 0;   // 0 = up to the class count
  int roc_points = 0; // 0 = every distinct threshold
};

// Feature mode: each channel is a precomputed feature with its own CSVs.
struct ChannelConfig {
  std::string name;
  std::string gallery_csv;
  std::string probe_csv;
};

struct DatasetConfig {
  bool image_mode = false;
  std::string gallery_dir;  // image mode: gallery/<class>/*.png|pgm
  std::string probe_dir;    // image mode: probe/<class>/*.png|pgm
  std::vector<ChannelConfig> channels;  // feature mode
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PreprocessingConfig preprocessing;
  std::vector<FeatureConfig> features;  // image mode extraction set
  std::vector<KernelGridConfig> kernels;
  MklConfig mkl;
  DaConfig da;
  KnnConfig knn;
  MetricsConfig metrics;
  std::string output_dir = "out";
  std::string digest;  // hash of the canonical config JSON, set on parse
};

// Parses a JSON config string. Unknown keys anywhere raise ConfigError;
// relative dataset/output paths stay as written.
ExperimentConfig parse_config(const std::string& json_text);

// Reads, parses and finalizes a config file: relative paths are resolved
// against the config file's directory.
ExperimentConfig load_config(const std::string& path);

// Existence checks for every referenced input path (DataError on failure).
void validate_paths(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Trained state.
// ---------------------------------------------------------------------------

// One retained (feature, kernel) pairing with everything needed to score
// probes: the gallery features, the unlabeled target subset, and the
// domain-adaptation map of the source Gram onto the target span.
struct TrainedPair {
  std::string feature;
  KernelSpec kernel;
  double eta = 0.0;
  double beta = 0.0;
  SampleMatrix source;             // gallery feature vectors
  std::vector<int> source_labels;  // class ids per gallery sample
  SampleMatrix target;             // adaptation subset feature vectors
  Eigen::MatrixXd source_map;      // n_S x n_T; empty when DA is off
  Eigen::VectorXd adapted_diag;    // diag of the adapted source Gram
};

// Fitted extraction models for one image-mode feature.
struct FeatureModels {
  bool has_projection = false;
  feat::ProjectionModel projection;
  bool has_codebook = false;
  feat::Codebook codebook;
};

struct TrainedBundle {
  std::string config_digest;
  bool image_mode = false;
  bool da_enabled = false;
  int knn_k = 1;
  std::vector<TrainedPair> pairs;
  std::vector<std::string> dropped_features;
  std::map<int, std::string> class_names;
  std::map<std::string, FeatureModels> models;        // image mode
  std::map<std::string, FeatureConfig> feature_params;  // image mode
  PreprocessingConfig preprocessing;
  int canonical_width = 0;
  int canonical_height = 0;
  double sigma_opt = 0.0;
  std::vector<std::pair<double, double>> sigma_curve;  // (sigma, divergence)
  std::vector<std::string> warnings;
};

struct EvalResult {
  double rank1 = 0.0;
  std::vector<double> cmc;                  // cmc[r-1] = rate at rank r
  std::vector<RocPoint> roc;
  Eigen::MatrixXi confusion;                // rows true, cols predicted
  std::vector<int> class_ids;               // column order of the confusion
  std::map<std::string, double> per_feature_rank1;
  int probes = 0;
};

// Preprocess -> extract -> Grams -> feature/kernel selection -> per-pair
// domain adaptation on the configured unlabeled target subset.
TrainedBundle run_training(const ExperimentConfig& config);

void save_bundle(const TrainedBundle& bundle, const std::string& path);
TrainedBundle load_bundle(const std::string& path);

// Preprocess probes, extract the selected features, extend the adapted
// Grams, classify per feature, fuse by weighted vote, compute metrics.
EvalResult run_testing(const TrainedBundle& bundle,
                       const ExperimentConfig& config);

// Writes results.json, cmc.csv, roc.csv, sigma_curve.csv and manifest.json
// into output_dir. results.json is timestamp-free so that repeated runs with
// one seed are byte-identical; the manifest carries the timestamp.
void emit_results(const EvalResult& result, const TrainedBundle& bundle,
                  const ExperimentConfig& config,
                  const std::string& output_dir);

// Degradation-matching curve alone (image mode): preprocess, estimate the
// blur level, return the estimate with its full divergence curve.
SigmaEstimate run_sigma(const ExperimentConfig& config);

// Built-in synthetic experiments ("blobs_shift", "blobs_plain",
// "feature_noise"): writes CSVs plus ready-to-run config JSONs into out_dir.
void generate_synthetic(const std::string& preset, const std::string& out_dir,
                        std::uint64_t seed);

}  // namespace mfkl
