#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "kopa/error.hpp"
#include "kopa/imaging.hpp"

using kopa::GrayImage;

namespace {

const std::filesystem::path kData = KOPA_TEST_DATA_DIR;

GrayImage make_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  GrayImage img;
  img.width = w;
  img.height = h;
  const auto m = testutil::random_matrix(h, w, seed);
  for (double x : m.data()) img.pixels.push_back(0.5 + 0.1 * x);
  return img;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("kopa_test_" + name);
}

}  // namespace

TEST_CASE("ASCII PGM") {
  const GrayImage img = kopa::decode_pgm("P2\n# comment\n2 2\n255\n0 255\n128 64\n");
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.at(0, 0) == 0);
  CHECK(img.at(0, 1) == 1);
  CHECK(img.at(1, 0) == doctest::Approx(128.0 / 255));
  CHECK_FALSE(img.mean_removed.has_value());
  CHECK_THROWS_AS(kopa::decode_pgm("P2\n2 2\n255\n0 255\n128 64\n", kopa::PgmFormat::p5), kopa::ParseError);
}

TEST_CASE("binary round trip at 8 and 16 bits") {
  GrayImage img = make_image(8, 4, 1);
  for (int maxval : {255, 65535}) {
    const std::string bytes = kopa::encode_pgm(img, kopa::PgmFormat::p5, maxval);
    const GrayImage back = kopa::decode_pgm(bytes);
    REQUIRE(back.pixels.size() == img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 0.5 / maxval + 1e-15);
    const GrayImage again = kopa::decode_pgm(kopa::encode_pgm(back, kopa::PgmFormat::p5, maxval));
    CHECK(again.pixels == back.pixels);
  }
  const std::string ascii = kopa::encode_pgm(img, kopa::PgmFormat::p2, 255);
  CHECK(ascii.rfind("P2", 0) == 0);
  CHECK(kopa::decode_pgm(ascii).pixels == kopa::decode_pgm(kopa::encode_pgm(img)).pixels);
}

TEST_CASE("PGM parse errors carry offsets") {
  try {
    kopa::decode_pgm("P5\n2 2\n255\nabc");
    FAIL("expected a parse error");
  } catch (const kopa::ParseError& e) {
    CHECK(e.offset() == 14);  // where the data ran out
  }
  try {
    kopa::decode_pgm("P2\n2 1\n10\n3 11\n");
    FAIL("expected a parse error");
  } catch (const kopa::ParseError& e) {
    CHECK(e.offset() == 12);
  }
  CHECK_THROWS_AS(kopa::decode_pgm("P6\n1 1\n255\n\0"), kopa::ParseError);
  CHECK_THROWS_AS(kopa::decode_pgm("P2\n1 1\n70000\n0\n"), kopa::ParseError);
  CHECK_THROWS_AS(kopa::decode_pgm(""), kopa::ParseError);
}

TEST_CASE("non power-of-two images") {
  const auto path = temp_path("odd.pgm");
  kopa::save_image(path, make_image(6, 4, 2));
  CHECK_THROWS_WITH_AS(kopa::load_image(path), doctest::Contains("pad"), kopa::DimensionError);
  const GrayImage padded = kopa::load_image(path, kopa::PgmFormat::automatic, kopa::DyadicPolicy::pad);
  CHECK(padded.width == 8);
  CHECK(padded.height == 4);
  CHECK(padded.at(3, 7) == 0);
  CHECK(padded.at(0, 0) > 0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(kopa::load_image(temp_path("missing.pgm")), kopa::InputError);
}

TEST_CASE("demean and remean") {
  const GrayImage img = make_image(8, 8, 3);
  const GrayImage d = kopa::demean(img);
  double s = 0;
  for (double x : d.pixels) s += x;
  CHECK(std::abs(s) <= 1e-12);
  REQUIRE(d.mean_removed.has_value());
  const GrayImage dd = kopa::demean(d);
  CHECK(*dd.mean_removed == doctest::Approx(*d.mean_removed).epsilon(1e-14));
  const GrayImage back = kopa::remean(dd);
  CHECK_FALSE(back.mean_removed.has_value());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1e-12);

  const GrayImage r = kopa::display_rescale(d);
  CHECK(*std::min_element(r.pixels.begin(), r.pixels.end()) == 0);
  CHECK(*std::max_element(r.pixels.begin(), r.pixels.end()) == doctest::Approx(1));
}

TEST_CASE("corruption statistics") {
  GrayImage flat;
  flat.width = flat.height = 256;
  flat.pixels.assign(256 * 256, 0.5);
  const GrayImage noisy = kopa::corrupt(flat, 0.2, 4);
  CHECK(kopa::pixel_std(noisy) == doctest::Approx(0.2).epsilon(0.02));
  CHECK(kopa::corrupt(flat, 0.2, 4).pixels == noisy.pixels);
  CHECK_FALSE(kopa::corrupt(flat, 0.2, 5).pixels == noisy.pixels);
  // No clipping: values leave [0, 1].
  CHECK(*std::max_element(noisy.pixels.begin(), noisy.pixels.end()) > 1.0);
  CHECK(kopa::corrupt(flat, 0.0, 4).pixels == flat.pixels);
  CHECK_THROWS_AS(kopa::corrupt(flat, -1.0, 4), kopa::DomainError);
}

TEST_CASE("low-rank baseline") {
  CHECK(kopa::lowrank_params(512, 512, 1) == 1024);
  CHECK(kopa::lowrank_params(4, 8, 4) == 1 + 11 + 9 + 7 + 5);
  const GrayImage img = make_image(8, 16, 5);
  const auto full = kopa::lowrank_baseline(img, 8);
  CHECK(full.ratio == doctest::Approx(1).epsilon(1e-10));
  CHECK(kopa::reconstruction_error(img, full.recon) <= 1e-10);
  const auto one = kopa::lowrank_baseline(img, 1);
  CHECK(one.params_constrained == one.params - 1);
  CHECK(one.ratio < 1);
  CHECK(kopa::reconstruction_error(img, one.recon) == doctest::Approx(1 - one.ratio).epsilon(1e-8));
  CHECK_THROWS_AS(kopa::lowrank_baseline(img, 9), kopa::DimensionError);
}

TEST_CASE("reconstruction error reference points") {
  const GrayImage img = make_image(8, 8, 6);
  CHECK(kopa::reconstruction_error(img, img) == 0);
  GrayImage mean_only = img;
  double mean = 0;
  for (double x : img.pixels) mean += x / 64;
  for (double& x : mean_only.pixels) x = mean;
  CHECK(kopa::reconstruction_error(img, mean_only) == doctest::Approx(1).epsilon(1e-12));
  // De-meaned reconstructions are compared in absolute scale.
  CHECK(kopa::reconstruction_error(img, kopa::demean(img)) <= 1e-24);
  GrayImage wrong = make_image(4, 8, 6);
  CHECK_THROWS_AS(kopa::reconstruction_error(img, wrong), kopa::DimensionError);
}

TEST_CASE("denoise returns an image in input scale") {
  const GrayImage img = make_image(16, 16, 7);
  const auto res = kopa::denoise(img, kopa::Criterion::aic(), 2);
  CHECK(res.recon.width == 16);
  CHECK(res.model.terms.size() == 2);
  CHECK_FALSE(res.recon.mean_removed.has_value());
  const auto centred = kopa::denoise(kopa::demean(img), kopa::Criterion::aic(), 2);
  CHECK(centred.recon.mean_removed == kopa::demean(img).mean_removed);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(std::abs(centred.recon.pixels[i] + *centred.recon.mean_removed - res.recon.pixels[i]) <= 1e-12);
  const auto errs = kopa::error_by_terms(img, res.model, *kopa::demean(img).mean_removed);
  CHECK(errs.back() == doctest::Approx(kopa::reconstruction_error(img, res.recon)).epsilon(1e-9));
  CHECK(errs[0] >= errs[1]);
}

TEST_CASE("compression curve") {
  const GrayImage img = make_image(16, 8, 8);
  const auto curve = kopa::compression_curve(img);
  std::size_t kopa_points = 0, lr_points = 0;
  for (const auto& p : curve) {
    CHECK(p.ratio >= 0);
    CHECK(p.ratio <= 1 + 1e-12);
    (p.method == kopa::CurveMethod::kopa ? kopa_points : lr_points)++;
  }
  CHECK(kopa_points == 6);
  CHECK(lr_points == 8);
  CHECK(curve.back().ratio == doctest::Approx(1).epsilon(1e-10));
  CHECK(kopa::curve_to_csv(curve).rfind("method,detail,params,ratio\n", 0) == 0);
}

TEST_CASE("cameraman one-term fits") {
  const auto path = kData / "cameraman.pgm";
  if (!std::filesystem::exists(path)) {
    MESSAGE("cameraman.pgm not present, skipped");
    return;
  }
  const GrayImage img = kopa::demean(kopa::load_image(path));
  CHECK(img.width == 512);
  const auto y = img.to_matrix();
  const auto at = [&](int m, int n) {
    return kopa::variance_explained(kopa::fit_one_term(y, kopa::Configuration(m, n, 9, 9)));
  };
  CHECK(at(4, 5) == doctest::Approx(0.7755).epsilon(5e-4));
  CHECK(at(8, 9) > 0.99);
  CHECK(kopa::lowrank_baseline(kopa::load_image(path), 1).ratio == doctest::Approx(0.4563).epsilon(1e-3));
}
