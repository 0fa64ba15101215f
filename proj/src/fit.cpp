#include "kopa/fit.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "kopa/error.hpp"

namespace kopa {

namespace {

void require_shape(const DenseMatrix& y, const Configuration& cfg) {
  if (y.rows() != (std::size_t{1} << cfg.M()) || y.cols() != (std::size_t{1} << cfg.N())) {
    throw DimensionError("fit: Y is " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                         " but the configuration expects 2^" + std::to_string(cfg.M()) + "x2^" +
                         std::to_string(cfg.N()));
  }
}

void finish_noise_estimate(KopaModel& model) {
  double captured = 0;
  for (const auto& t : model.terms) captured += t.lambda * t.lambda;
  const double s2 = model.y_frob2 - captured;
  if (s2 < 0) {
    if (s2 < -1e-8 * model.y_frob2) {
      throw ConvergenceError("fit: captured energy exceeds ||Y||_F^2", SingularTriplet{});
    }
    model.sigma2_hat = 0;
    model.sigma2_clamped = true;
  } else {
    model.sigma2_hat = s2;
  }
}

}  // namespace

KopaModel fit_k_terms(const DenseMatrix& y, const Configuration& cfg, std::size_t k,
                      const IterationControl& ctl) {
  require_shape(y, cfg);
  const std::size_t max_k = std::min(cfg.rearranged_rows(), cfg.rearranged_cols());
  if (k < 1 || k > max_k) {
    throw DimensionError("fit_k_terms: K=" + std::to_string(k) + " outside [1, " +
                         std::to_string(max_k) + "]");
  }
  const double y2 = y.frobenius_norm2();
  if (y2 == 0) throw DomainError("fit: Y is zero, lambda must be positive");

  const auto triplets = top_k_triplets(rearrange(y, cfg), k, ctl);
  KopaModel model{cfg, {}, 0, y2, false, false};
  model.terms.reserve(k);
  for (const auto& t : triplets) {
    model.terms.push_back({t.sigma, unvec(t.u, cfg.a_rows(), cfg.a_cols()),
                           unvec(t.v, cfg.b_rows(), cfg.b_cols())});
    model.near_tie = model.near_tie || t.near_tie;
  }
  if (const double defect = orthonormality_defect(model); defect > 1e-6) {
    throw ConvergenceError("fit_k_terms: factors lost orthonormality (defect " +
                               std::to_string(defect) + ")",
                           triplets.back());
  }
  finish_noise_estimate(model);
  return model;
}

KopaModel fit_one_term(const DenseMatrix& y, const Configuration& cfg,
                       const IterationControl& ctl) {
  return fit_k_terms(y, cfg, 1, ctl);
}

DenseMatrix reconstruct(const KopaModel& model) {
  const auto& cfg = model.cfg;
  if (model.terms.empty()) return DenseMatrix(std::size_t{1} << cfg.M(), std::size_t{1} << cfg.N());
  // Sum in rearranged space (rank-K outer products), then map back once.
  DenseMatrix r(cfg.rearranged_rows(), cfg.rearranged_cols());
  for (const auto& t : model.terms) {
    auto va = t.a.data();
    auto vb = t.b.data();
    for (std::size_t i = 0; i < r.rows(); ++i) {
      const double s = t.lambda * va[i];
      if (s == 0) continue;
      for (std::size_t j = 0; j < r.cols(); ++j) r(i, j) += s * vb[j];
    }
  }
  return inverse_rearrange(r, cfg);
}

double variance_explained(const KopaModel& model) {
  if (!(model.y_frob2 > 0)) throw DomainError("variance_explained: ||Y||_F is zero");
  double captured = 0;
  for (const auto& t : model.terms) captured += t.lambda * t.lambda;
  return captured / model.y_frob2;
}

double orthonormality_defect(const KopaModel& model) {
  double worst = 0;
  const auto& ts = model.terms;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    for (std::size_t l = k; l < ts.size(); ++l) {
      const double target = k == l ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(dot(ts[k].a.data(), ts[l].a.data()) - target));
      worst = std::max(worst, std::abs(dot(ts[k].b.data(), ts[l].b.data()) - target));
    }
  }
  return worst;
}

std::string model_to_json(const KopaModel& model) {
  nlohmann::json j;
  j["M"] = model.cfg.M();
  j["N"] = model.cfg.N();
  j["m"] = model.cfg.m();
  j["n"] = model.cfg.n();
  j["K"] = model.terms.size();
  auto lambdas = nlohmann::json::array();
  auto vas = nlohmann::json::array();
  auto vbs = nlohmann::json::array();
  for (const auto& t : model.terms) {
    lambdas.push_back(t.lambda);
    vas.push_back(vec(t.a));
    vbs.push_back(vec(t.b));
  }
  j["lambda"] = std::move(lambdas);
  j["vec(A)"] = std::move(vas);
  j["vec(B)"] = std::move(vbs);
  j["sigma2_hat"] = model.sigma2_hat;
  return j.dump(2);
}

KopaModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), e.byte);
  }
  try {
    Configuration cfg(j.at("m").get<int>(), j.at("n").get<int>(), j.at("M").get<int>(),
                      j.at("N").get<int>());
    const auto k = j.at("K").get<std::size_t>();
    const auto lambdas = j.at("lambda").get<std::vector<double>>();
    const auto vas = j.at("vec(A)").get<std::vector<std::vector<double>>>();
    const auto vbs = j.at("vec(B)").get<std::vector<std::vector<double>>>();
    if (lambdas.size() != k || vas.size() != k || vbs.size() != k) {
      throw InputError("model JSON: K does not match the term arrays");
    }
    KopaModel model{cfg, {}, j.at("sigma2_hat").get<double>(), 0, false, false};
    double captured = 0;
    for (std::size_t i = 0; i < k; ++i) {
      model.terms.push_back({lambdas[i], unvec(vas[i], cfg.a_rows(), cfg.a_cols()),
                             unvec(vbs[i], cfg.b_rows(), cfg.b_cols())});
      captured += lambdas[i] * lambdas[i];
    }
    model.y_frob2 = model.sigma2_hat + captured;
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace kopa
