#include "kopa/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "kopa/error.hpp"
#include "kopa/kron.hpp"
#include "kopa/rng.hpp"

namespace kopa {

namespace {

// Header tokenizer for PGM: whitespace separated, '#' comments to end of line.
class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : s_(bytes) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= s_.size(); }

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      const unsigned char c = static_cast<unsigned char>(s_[pos_]);
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    unsigned long v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + static_cast<unsigned long>(s_[pos_] - '0');
      if (v > 0xffffffffUL) throw ParseError(std::string("PGM: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("PGM: expected ") + what +
                           (at_end() ? ", found end of file" : ", found a non-digit"),
                       pos_);
    }
    return v;
  }

  unsigned char byte() { return static_cast<unsigned char>(s_[pos_++]); }
  std::size_t remaining() const { return s_.size() - pos_; }
  void advance() { ++pos_; }
  char peek() const { return s_[pos_]; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> absolute_pixels(const GrayImage& img) {
  std::vector<double> out = img.pixels;
  if (img.mean_removed) {
    for (double& p : out) p += *img.mean_removed;
  }
  return out;
}

void require_same_shape(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError("images differ in size: " + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height));
  }
}

// ||Z - sum_{j<=k} lambda_j T_j||^2 / denom for orthonormal T_j, given
// c_j = <Z, T_j>.
std::vector<double> prefix_errors(double z2, const std::vector<double>& lambdas,
                                  const std::vector<double>& c, double denom) {
  std::vector<double> out;
  out.reserve(lambdas.size());
  double acc = z2;
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    acc += lambdas[j] * lambdas[j] - 2 * lambdas[j] * c[j];
    out.push_back(std::max(acc, 0.0) / denom);
  }
  return out;
}

struct CenteredTarget {
  DenseMatrix z;  // original (absolute) minus fit_mean
  double denom;   // ||original - mean(original)||^2
};

CenteredTarget centered_target(const GrayImage& original, double fit_mean) {
  std::vector<double> abs_px = absolute_pixels(original);
  const double mu = mean_of(abs_px);
  double denom = 0;
  for (double p : abs_px) denom += (p - mu) * (p - mu);
  if (!(denom > 0)) throw DomainError("reconstruction error: the de-meaned original is zero");
  for (double& p : abs_px) p -= fit_mean;
  return {DenseMatrix(original.height, original.width, std::move(abs_px)), denom};
}

}  // namespace

DenseMatrix GrayImage::to_matrix() const { return DenseMatrix(height, width, pixels); }

GrayImage GrayImage::from_matrix(const DenseMatrix& m, std::optional<double> mean_removed) {
  auto data = m.data();
  return {m.cols(), m.rows(), std::vector<double>(data.begin(), data.end()), mean_removed};
}

GrayImage decode_pgm(std::string_view bytes, PgmFormat expect) {
  PgmCursor cur(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw ParseError("PGM: missing P2/P5 magic number", 0);
  }
  const bool binary = bytes[1] == '5';
  if ((expect == PgmFormat::p2 && binary) || (expect == PgmFormat::p5 && !binary)) {
    throw ParseError(std::string("PGM: expected ") + (binary ? "P2" : "P5") + " data", 0);
  }
  cur.advance();
  cur.advance();
  if (!cur.at_end() && !std::isspace(static_cast<unsigned char>(cur.peek())) && cur.peek() != '#') {
    throw ParseError("PGM: malformed magic number", cur.pos());
  }
  const std::size_t width_at = cur.pos();
  const unsigned long width = cur.read_uint("width");
  const unsigned long height = cur.read_uint("height");
  if (width == 0 || height == 0) throw ParseError("PGM: zero image dimension", width_at);
  const std::size_t maxval_at = cur.pos();
  const unsigned long maxval = cur.read_uint("maxval");
  if (maxval == 0 || maxval > 65535) {
    throw ParseError("PGM: maxval must lie in [1, 65535]", maxval_at);
  }

  GrayImage img;
  img.width = width;
  img.height = height;
  const std::size_t count = static_cast<std::size_t>(width) * height;
  img.pixels.resize(count);
  const double scale = 1.0 / static_cast<double>(maxval);

  if (binary) {
    if (cur.at_end() || !std::isspace(static_cast<unsigned char>(cur.peek()))) {
      throw ParseError("PGM: expected one whitespace byte before the raster", cur.pos());
    }
    cur.advance();
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (cur.remaining() < count * bps) {
      throw ParseError("PGM: raster truncated, need " + std::to_string(count * bps) + " bytes",
                       bytes.size());
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t at = cur.pos();
      unsigned long v = cur.byte();
      if (bps == 2) v = (v << 8) | cur.byte();
      if (v > maxval) throw ParseError("PGM: sample exceeds maxval", at);
      img.pixels[i] = static_cast<double>(v) * scale;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      cur.skip_space_and_comments();
      const std::size_t at = cur.pos();
      const unsigned long v = cur.read_uint("sample");
      if (v > maxval) throw ParseError("PGM: sample exceeds maxval", at);
      img.pixels[i] = static_cast<double>(v) * scale;
    }
  }
  return img;
}

std::string encode_pgm(const GrayImage& img, PgmFormat format, int maxval) {
  if (maxval < 1 || maxval > 65535) throw DomainError("PGM: maxval must lie in [1, 65535]");
  if (img.pixels.size() != img.width * img.height || img.pixels.empty()) {
    throw DimensionError("PGM: pixel buffer does not match the image size");
  }
  const bool binary = format != PgmFormat::p2;
  std::string out = (binary ? "P5\n" : "P2\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n" + std::to_string(maxval) + "\n";
  const double offset = img.mean_removed.value_or(0.0);
  std::size_t col = 0;
  for (double p : img.pixels) {
    const double v = std::clamp(p + offset, 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(v * maxval));
    if (binary) {
      if (maxval > 255) out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    } else {
      out += std::to_string(q);
      out.push_back(++col % img.width == 0 ? '\n' : ' ');
    }
  }
  return out;
}

GrayImage load_image(const std::filesystem::path& path, PgmFormat format, DyadicPolicy policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  GrayImage img;
  try {
    img = decode_pgm(bytes, format);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
  if (dyadic_exponent(img.width) && dyadic_exponent(img.height)) return img;
  if (policy == DyadicPolicy::require) {
    throw DimensionError(path.string() + " is " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) +
                         "; both sides must be powers of two (use the pad option to zero-pad)");
  }
  return GrayImage::from_matrix(pad_to_dyadic(img.to_matrix()));
}

void save_image(const std::filesystem::path& path, const GrayImage& img, PgmFormat format,
                int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image '" + path.string() + "'");
  const std::string bytes = encode_pgm(img, format, maxval);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

GrayImage demean(const GrayImage& img) {
  GrayImage out = img;
  const double mu = mean_of(img.pixels);
  for (double& p : out.pixels) p -= mu;
  out.mean_removed = img.mean_removed.value_or(0.0) + mu;
  return out;
}

GrayImage remean(const GrayImage& img) {
  GrayImage out = img;
  out.pixels = absolute_pixels(img);
  out.mean_removed.reset();
  return out;
}

GrayImage display_rescale(const GrayImage& img) {
  GrayImage out = img;
  out.mean_removed.reset();
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double lo_v = *lo;
  const double span = *hi - *lo;
  for (double& p : out.pixels) p = span > 0 ? (p - lo_v) / span : 0.0;
  return out;
}

GrayImage corrupt(const GrayImage& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw DomainError("corrupt: sigma must be >= 0");
  GrayImage out = img;
  if (sigma == 0) return out;
  CounterRng rng(seed, 0x1a9e);
  for (double& p : out.pixels) p += sigma * rng.gaussian();
  return out;
}

double pixel_std(const GrayImage& img) {
  const double mu = mean_of(img.pixels);
  double s = 0;
  for (double p : img.pixels) s += (p - mu) * (p - mu);
  return std::sqrt(s / static_cast<double>(img.pixels.size()));
}

DenoiseResult denoise(const GrayImage& img, const Criterion& crit, std::size_t k,
                      const IterationControl& ctl, ScanOptions opts) {
  const GrayImage centred = demean(img);
  const DenseMatrix y = centred.to_matrix();
  SelectionReport report = select_configuration(y, crit, ctl, opts);
  KopaModel model = fit_k_terms(y, report.chosen, k, ctl);
  const double added = centred.mean_removed.value_or(0.0) - img.mean_removed.value_or(0.0);
  GrayImage recon = GrayImage::from_matrix(reconstruct(model), img.mean_removed);
  for (double& p : recon.pixels) p += added;
  return {std::move(model), std::move(recon), std::move(report)};
}

std::uint64_t lowrank_params(std::size_t rows, std::size_t cols, std::size_t k) {
  std::uint64_t total = 1;
  for (std::size_t j = 1; j <= k; ++j) total += rows + cols - 2 * j + 1;
  return total;
}

LowRankResult lowrank_baseline(const GrayImage& img, std::size_t k, const IterationControl& ctl) {
  const std::size_t max_k = std::min(img.width, img.height);
  if (k < 1 || k > max_k) {
    throw DimensionError("lowrank_baseline: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(max_k) + "]");
  }
  const GrayImage centred = demean(img);
  const DenseMatrix y = centred.to_matrix();
  const double y2 = y.frobenius_norm2();
  if (!(y2 > 0)) throw DomainError("lowrank_baseline: the de-meaned image is zero");
  const auto triplets = top_k_triplets(y, k, ctl);

  DenseMatrix recon(y.rows(), y.cols());
  double captured = 0;
  for (const auto& t : triplets) {
    captured += t.sigma * t.sigma;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      const double s = t.sigma * t.u[i];
      for (std::size_t j = 0; j < y.cols(); ++j) recon(i, j) += s * t.v[j];
    }
  }
  LowRankResult out;
  out.recon = GrayImage::from_matrix(recon, centred.mean_removed);
  out.params = lowrank_params(y.rows(), y.cols(), k);
  out.params_constrained = out.params - 1;
  out.ratio = captured / y2;
  return out;
}

std::vector<CurvePoint> compression_curve(const GrayImage& img, const IterationControl& ctl,
                                          ScanOptions opts) {
  const GrayImage centred = demean(img);
  const DenseMatrix y = centred.to_matrix();
  const double y2 = y.frobenius_norm2();
  if (!(y2 > 0)) throw DomainError("compression_curve: the de-meaned image is zero");

  // The MSE scan already holds lambda_hat for every candidate configuration.
  const SelectionReport scan = select_configuration(y, Criterion::mse(), ctl, opts);
  std::map<int, const IcRecord*> best;
  for (const auto& r : scan.table) {
    if (r.flag == IcFlag::not_converged) continue;
    const int c = r.cfg.m() + r.cfg.n();
    auto it = best.find(c);
    if (it == best.end() || r.lambda_hat > it->second->lambda_hat) best[c] = &r;
  }
  std::vector<CurvePoint> curve;
  for (const auto& [c, r] : best) {
    curve.push_back({r->eta, r->lambda_hat * r->lambda_hat / y2, CurveMethod::kopa,
                     std::to_string(r->cfg.m()) + "," + std::to_string(r->cfg.n())});
  }
  const std::vector<double> sv = singular_values(y);
  double captured = 0;
  for (std::size_t k = 1; k <= sv.size(); ++k) {
    captured += sv[k - 1] * sv[k - 1];
    curve.push_back({lowrank_params(y.rows(), y.cols(), k), std::min(captured / y2, 1.0),
                     CurveMethod::lowrank, std::to_string(k)});
  }
  return curve;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "method,detail,params,ratio\n";
  for (const auto& p : curve) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", p.ratio);
    os << (p.method == CurveMethod::kopa ? "kopa" : "lowrank") << ",\"" << p.detail << "\","
       << p.params << ',' << buf << '\n';
  }
  return os.str();
}

double reconstruction_error(const GrayImage& original, const GrayImage& recon) {
  require_same_shape(original, recon);
  const std::vector<double> o = absolute_pixels(original);
  const std::vector<double> r = absolute_pixels(recon);
  const double mu = mean_of(o);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    num += (o[i] - r[i]) * (o[i] - r[i]);
    den += (o[i] - mu) * (o[i] - mu);
  }
  if (!(den > 0)) throw DomainError("reconstruction_error: the de-meaned original is zero");
  return num / den;
}

std::vector<double> error_by_terms(const GrayImage& original, const KopaModel& model,
                                   double fit_mean) {
  const CenteredTarget t = centered_target(original, fit_mean);
  if (t.z.rows() != (std::size_t{1} << model.cfg.M()) ||
      t.z.cols() != (std::size_t{1} << model.cfg.N())) {
    throw DimensionError("error_by_terms: image and model sizes differ");
  }
  const DenseMatrix rz = rearrange(t.z, model.cfg);
  std::vector<double> lambdas, c;
  for (const auto& term : model.terms) {
    lambdas.push_back(term.lambda);
    auto va = term.a.data();
    auto vb = term.b.data();
    double s = 0;
    for (std::size_t i = 0; i < rz.rows(); ++i) {
      if (va[i] != 0) s += va[i] * dot(rz.row_span(i), vb);
    }
    c.push_back(s);
  }
  return prefix_errors(t.z.frobenius_norm2(), lambdas, c, t.denom);
}

std::vector<double> error_by_rank(const GrayImage& original,
                                  const std::vector<SingularTriplet>& triplets, double fit_mean) {
  const CenteredTarget t = centered_target(original, fit_mean);
  std::vector<double> lambdas, c;
  for (const auto& tr : triplets) {
    if (tr.u.size() != t.z.rows() || tr.v.size() != t.z.cols()) {
      throw DimensionError("error_by_rank: triplet and image sizes differ");
    }
    lambdas.push_back(tr.sigma);
    double s = 0;
    for (std::size_t i = 0; i < t.z.rows(); ++i) s += tr.u[i] * dot(t.z.row_span(i), tr.v);
    c.push_back(s);
  }
  return prefix_errors(t.z.frobenius_norm2(), lambdas, c, t.denom);
}

}  // namespace kopa
