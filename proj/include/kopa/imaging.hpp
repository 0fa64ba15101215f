#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kopa/fit.hpp"
#include "kopa/matrix.hpp"
#include "kopa/selection.hpp"
#include "kopa/spectral.hpp"

namespace kopa {

/// Grayscale image, row-major. Loaded pixels lie in [0, 1] (0 is black);
/// after demean() they are centred and mean_removed holds the offset.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
  std::optional<double> mean_removed;

  DenseMatrix to_matrix() const;
  static GrayImage from_matrix(const DenseMatrix& m, std::optional<double> mean_removed = {});
  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

enum class PgmFormat { automatic, p2, p5 };
enum class DyadicPolicy { require, pad };

/// Parses P2 or P5 data. maxval may be up to 65535 (two bytes per sample,
/// big-endian, in P5). Throws ParseError with the byte offset of the fault.
GrayImage decode_pgm(std::string_view bytes, PgmFormat expect = PgmFormat::automatic);

/// pixels (plus mean_removed, if set) clamped to [0, 1] and quantized to maxval.
std::string encode_pgm(const GrayImage& img, PgmFormat format = PgmFormat::p5, int maxval = 255);

/// Reads a PGM file. Non-power-of-two sizes throw DimensionError unless
/// policy is pad, which zero-pads on the right and bottom.
GrayImage load_image(const std::filesystem::path& path, PgmFormat format = PgmFormat::automatic,
                     DyadicPolicy policy = DyadicPolicy::require);
void save_image(const std::filesystem::path& path, const GrayImage& img,
                PgmFormat format = PgmFormat::p5, int maxval = 255);

/// Subtracts the pixel mean; repeated calls accumulate into mean_removed.
GrayImage demean(const GrayImage& img);
/// Adds mean_removed back and clears it.
GrayImage remean(const GrayImage& img);
/// Affine map of the pixel range onto [0, 1] for display; a constant image maps to 0.
GrayImage display_rescale(const GrayImage& img);

/// Adds iid N(0, sigma^2) to every pixel (no clipping, no 1/sqrt(PQ) scaling).
GrayImage corrupt(const GrayImage& img, double sigma, std::uint64_t seed);

/// Population standard deviation of the pixels.
double pixel_std(const GrayImage& img);

struct DenoiseResult {
  KopaModel model;
  GrayImage recon;  // in the input's scale, mean re-added
  SelectionReport report;
};

/// Selects a configuration on the de-meaned input, fits K terms there and
/// reconstructs.
DenoiseResult denoise(const GrayImage& img, const Criterion& crit, std::size_t k,
                      const IterationControl& ctl = {}, ScanOptions opts = {});

struct LowRankResult {
  GrayImage recon;
  std::uint64_t params = 0;              // 1 + sum_j (2^M + 2^N - 2j + 1)
  std::uint64_t params_constrained = 0;  // params - 1
  double ratio = 0;                      // variance explained
};

/// Rank-k approximation of the de-meaned image by its top-k singular triplets.
LowRankResult lowrank_baseline(const GrayImage& img, std::size_t k,
                               const IterationControl& ctl = {});

/// Low-rank parameter count 1 + sum_{j=1..k} (rows + cols - 2j + 1).
std::uint64_t lowrank_params(std::size_t rows, std::size_t cols, std::size_t k);

enum class CurveMethod { kopa, lowrank };

struct CurvePoint {
  std::uint64_t params = 0;
  double ratio = 0;
  CurveMethod method = CurveMethod::kopa;
  std::string detail;  // "m,n" or the rank
};

/// One-term KoPA points (best configuration for each m+n = 1..M+N-1) then
/// low-rank points for k = 1..min(rows, cols).
std::vector<CurvePoint> compression_curve(const GrayImage& img, const IterationControl& ctl = {},
                                          ScanOptions opts = {});
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

/// ||Y - Y_hat||_F^2 / ||Y||_F^2 with Y the de-meaned original. Both images
/// are compared in absolute scale (mean_removed re-added) and centred by the
/// original's mean. Throws DomainError when the centred original is zero.
double reconstruction_error(const GrayImage& original, const GrayImage& recon);

/// Reconstruction error against `original` of the first k terms of `model`,
/// for k = 1..K, where the model was fitted to an image whose removed mean is
/// `fit_mean`. Uses the orthonormality of the terms, so no image is rebuilt.
std::vector<double> error_by_terms(const GrayImage& original, const KopaModel& model,
                                   double fit_mean);

/// Same as error_by_terms for a rank-k sequence of singular triplets of the
/// de-meaned image whose removed mean is `fit_mean`.
std::vector<double> error_by_rank(const GrayImage& original,
                                  const std::vector<SingularTriplet>& triplets, double fit_mean);

}  // namespace kopa
