#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "triq/quality_head.hpp"
#include "triq/tensor.hpp"

namespace triq {

// ---------------------------------------------------------------------------
// Images

/// Decodes a PNG or BMP into an [H, W, 3] RGB tensor with values in [0, 1].
/// Grayscale files are replicated across the three channels.
Tensor load_image(const std::filesystem::path& path);

/// Writes an [H, W], [H, W, 1] or [H, W, 3] tensor (values in [0, 1],
/// clamped) as an 8-bit PNG.
void save_png(const std::filesystem::path& path, const Tensor& image);

/// 2x2 box-average downsampling to (ceil(H/2), ceil(W/2)); partial windows on
/// odd edges average the pixels they cover. Works for any channel count.
Tensor half_size(const Tensor& image);

/// ITU-T P.910 spatial information: population standard deviation of the
/// Sobel gradient magnitude of the Rec. 601 luma plane, interior pixels only.
double spatial_information(const Tensor& image);

// ---------------------------------------------------------------------------
// Score distributions

/// Discretises N(mu, sigma) truncated to [1, 5] over the grade bins
/// [1,1.5], [1.5,2.5], [2.5,3.5], [3.5,4.5], [4.5,5].
QualityDistribution discretize_truncated_gaussian(double mu, double sigma);

// ---------------------------------------------------------------------------
// Manifests

enum class SplitTag { Train, Test };
enum class SiClass { Low, High };

struct Stratum {
  SiClass si_class = SiClass::Low;
  int mos_class = 3;

  bool operator==(const Stratum&) const = default;
};

struct DatasetRecord {
  std::filesystem::path image_ref;
  double mos = 3.0;
  std::optional<double> score_std;
  std::optional<QualityDistribution> distribution;
  std::optional<double> si;
  std::optional<Stratum> stratum;
  std::optional<SplitTag> split;

  /// The explicit distribution if present, else the truncated-Gaussian one
  /// derived from (mos, score_std). ContractError when neither is available.
  QualityDistribution target_distribution() const;
};

/// Rows of a manifest CSV. Relative image paths are resolved against the
/// directory of the manifest file.
struct Manifest {
  std::vector<DatasetRecord> records;
};

/// Parses `path,mos[,std][,p1..p5][,si][,split]` (any column order after the
/// header). Throws ParseError with the line number on malformed rows and
/// RangeError when a MOS lies outside [1, 5].
Manifest load_manifest(const std::filesystem::path& path);

/// Writes every column of the canonical header; image paths are written
/// relative to the output file's directory.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct SplitSummary {
  double si_threshold = 0.0;
  std::vector<std::string> warnings;  // one per empty stratum
};

/// Assigns train/test tags within each of the ten (SI class x MOS class)
/// strata. SI class: above the corpus median is high. MOS class: nearest
/// grade. round(fraction * count) records of each stratum, drawn uniformly
/// with `seed`, go to train.
SplitSummary stratified_split(Manifest& manifest, double train_fraction, std::uint64_t seed);

/// One corpus and its own train fraction.
struct SplitSource {
  Manifest* manifest;
  double train_fraction;
};

/// Splits each corpus independently (its own SI median), with a distinct
/// sub-seed per source index.
std::vector<SplitSummary> stratified_split(std::vector<SplitSource>& sources, std::uint64_t seed);

}  // namespace triq
