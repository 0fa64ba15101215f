#include "kopa/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "kopa/error.hpp"
#include "kopa/rng.hpp"

namespace kopa {

namespace {

void require_unit(const DenseMatrix& x, const char* what) {
  if (std::abs(x.frobenius_norm() - 1.0) > 1e-8) {
    throw DomainError(std::string(what) + " must have unit Frobenius norm (got " +
                      std::to_string(x.frobenius_norm()) + ")");
  }
}

int exponent_of(std::size_t value, const char* what) {
  const auto e = dyadic_exponent(value);
  if (!e) throw DimensionError(std::string(what) + " dimension is not a power of two");
  return *e;
}

std::vector<double> unit_gaussian(std::size_t n, CounterRng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.gaussian();
  const double nv = norm2(v);
  for (auto& x : v) x /= nv;
  return v;
}

// sqrt(w) [1;0] (x) D1 + sqrt(1-w) [0;1] (x) D2 for a 2p x q result.
DenseMatrix stacked(double w, const DenseMatrix& d1, const DenseMatrix& d2) {
  const DenseMatrix top = DenseMatrix::column(std::vector<double>{1.0, 0.0});
  const DenseMatrix bottom = DenseMatrix::column(std::vector<double>{0.0, 1.0});
  return std::sqrt(w) * kron(top, d1) + std::sqrt(1.0 - w) * kron(bottom, d2);
}

std::pair<DenseMatrix, DenseMatrix> orthonormal_pair(std::size_t p, std::size_t q,
                                                     CounterRng& rng) {
  std::vector<double> a = unit_gaussian(p * q, rng);
  std::vector<double> b = unit_gaussian(p * q, rng);
  const double c = dot(a, b);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] -= c * a[i];
  const double nb = norm2(b);
  for (auto& x : b) x /= nb;
  return {unvec(a, p, q), unvec(b, p, q)};
}

void add_noise(DenseMatrix& y, double sigma, std::uint64_t seed) {
  if (sigma == 0) return;
  const double scale = sigma / std::sqrt(static_cast<double>(y.size()));
  CounterRng rng(seed, streams::noise);
  for (double& x : y.data()) x += scale * rng.gaussian();
}

void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx + e.what(), e.best_iterate());
  } catch (const DimensionError& e) {
    throw DimensionError(ctx + e.what());
  } catch (const DomainError& e) {
    throw DomainError(ctx + e.what());
  } catch (const InputError& e) {
    throw InputError(ctx + e.what());
  } catch (const Error& e) {
    throw Error(ctx + e.what());
  }
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_real(double x) {
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            std::uint64_t stream) {
  DenseMatrix out(rows, cols);
  CounterRng rng(seed, stream);
  for (double& x : out.data()) x = rng.gaussian();
  return out;
}

GeneratedInstance gen_deterministic(double lambda, const DenseMatrix& a, const DenseMatrix& b,
                                    double sigma, std::uint64_t seed) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw DomainError("generator: lambda must be > 0");
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw DomainError("generator: sigma must be >= 0");
  require_unit(a, "generator: A");
  require_unit(b, "generator: B");
  const int m = exponent_of(a.rows(), "A row");
  const int n = exponent_of(a.cols(), "A column");
  const int M = m + exponent_of(b.rows(), "B row");
  const int N = n + exponent_of(b.cols(), "B column");
  Configuration cfg(m, n, M, N);

  DenseMatrix y = kron(a, b);
  y *= lambda;
  const double signal2 = y.frobenius_norm2();
  add_noise(y, sigma, seed);
  KopaModel truth{cfg, {{lambda, a, b}}, sigma * sigma, signal2};
  return {std::move(y), std::move(truth), sigma, seed};
}

GeneratedInstance gen_random_scheme(double lambda0, const Configuration& cfg, double sigma,
                                    std::uint64_t seed) {
  if (!(lambda0 > 0)) throw DomainError("gen_random_scheme: lambda0 must be > 0");
  DenseMatrix a = gaussian_matrix(cfg.a_rows(), cfg.a_cols(), seed, streams::factor_a);
  DenseMatrix b = gaussian_matrix(cfg.b_rows(), cfg.b_cols(), seed, streams::factor_b);
  const double na = a.frobenius_norm();
  const double nb = b.frobenius_norm();
  a *= 1.0 / na;
  b *= 1.0 / nb;
  const double lambda = lambda0 * na * nb / std::sqrt(std::ldexp(1.0, cfg.M() + cfg.N()));
  return gen_deterministic(lambda, a, b, sigma, seed);
}

std::pair<DenseMatrix, DenseMatrix> gen_gap_controlled(double varphi2, const Configuration& cfg,
                                                       std::uint64_t seed) {
  if (!(varphi2 > 0 && varphi2 <= 0.5)) {
    throw DomainError("gen_gap_controlled: varphi2 must lie in (0, 0.5]");
  }
  if (cfg.m() < 1 || cfg.m_dagger() < 1) {
    throw DimensionError("gen_gap_controlled: A and B need at least two rows each");
  }
  CounterRng rng(seed, streams::gap_d);
  auto [d1, d2] = orthonormal_pair(cfg.a_rows() / 2, cfg.a_cols(), rng);
  auto [d3, d4] = orthonormal_pair(cfg.b_rows() / 2, cfg.b_cols(), rng);
  return {stacked(varphi2, d1, d2), stacked(varphi2, d3, d4)};
}

GeneratedInstance gen_two_term(double lambda10, double lambda20, const Configuration& cfg,
                               double sigma, std::uint64_t seed) {
  if (!(lambda20 >= 0) || lambda10 < lambda20) {
    throw DomainError("gen_two_term: need lambda10 >= lambda20 >= 0");
  }
  GeneratedInstance inst = gen_random_scheme(lambda10, cfg, sigma, seed);
  if (lambda20 == 0) return inst;

  DenseMatrix a2 = gaussian_matrix(cfg.a_rows(), cfg.a_cols(), seed, streams::factor_a2);
  DenseMatrix b2 = gaussian_matrix(cfg.b_rows(), cfg.b_cols(), seed, streams::factor_b2);
  const double na = a2.frobenius_norm();
  const double nb = b2.frobenius_norm();
  a2 *= 1.0 / na;
  b2 *= 1.0 / nb;
  const double lambda2 = lambda20 * na * nb / std::sqrt(std::ldexp(1.0, cfg.M() + cfg.N()));

  DenseMatrix second = kron(a2, b2);
  second *= lambda2;
  inst.y += second;
  inst.truth.terms.push_back({lambda2, std::move(a2), std::move(b2)});
  std::stable_sort(inst.truth.terms.begin(), inst.truth.terms.end(),
                   [](const KroneckerTerm& x, const KroneckerTerm& y) { return x.lambda > y.lambda; });
  inst.truth.y_frob2 = reconstruct(inst.truth).frobenius_norm2();
  return inst;
}

void ExperimentSpec::validate() const {
  try {
    (void)true_cfg();
  } catch (const Error& e) {
    throw InputError(std::string("experiment spec: ") + e.what());
  }
  if (reps < 1) throw InputError("experiment spec: reps must be >= 1");
  if (lambda_grid.empty()) throw InputError("experiment spec: lambda_grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0) || !std::isfinite(l)) throw InputError("experiment spec: lambda values must be > 0");
  }
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw InputError("experiment spec: sigma must be >= 0");
  if (!(kappa >= 0) || !std::isfinite(kappa)) throw InputError("experiment spec: kappa must be >= 0");
  for (double v : varphi2_grid) {
    if (!(v > 0 && v <= 0.5)) throw InputError("experiment spec: varphi2 values must lie in (0, 0.5]");
  }
  for (double r : lambda_ratio_grid) {
    if (!(r >= 0 && r <= 1)) throw InputError("experiment spec: lambda ratios must lie in [0, 1]");
  }
  if (kind == ExperimentKind::select_two_term && lambda_ratio_grid.empty()) {
    throw InputError("experiment spec: select-two-term needs lambda_ratio_grid");
  }
  if (kind == ExperimentKind::select_one_term && !varphi2_grid.empty() &&
      (m0 < 1 || M - m0 < 1)) {
    throw InputError("experiment spec: varphi2_grid needs 1 <= m0 <= M-1");
  }
  if (kind != ExperimentKind::select_one_term && !varphi2_grid.empty()) {
    throw InputError("experiment spec: varphi2_grid only applies to select-one-term");
  }
  if (kind != ExperimentKind::select_two_term && !lambda_ratio_grid.empty()) {
    throw InputError("experiment spec: lambda_ratio_grid only applies to select-two-term");
  }
  if (kind != ExperimentKind::estimation && true_cfg().is_corner()) {
    throw InputError("experiment spec: the true configuration is a corner");
  }
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment spec: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw InputError("experiment spec: top level must be an object");
  static const char* const known[] = {"kind",          "M",     "N",    "m0",    "n0",
                                      "lambda_grid",   "varphi2_grid",  "lambda_ratio_grid",
                                      "sigma",         "reps",  "kappa", "base_seed"};
  for (const auto& item : j.items()) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return item.key() == k; }) == std::end(known)) {
      throw InputError("experiment spec: unknown field '" + item.key() + "'");
    }
  }
  ExperimentSpec s;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "estimation") {
      s.kind = ExperimentKind::estimation;
    } else if (kind == "select-one-term") {
      s.kind = ExperimentKind::select_one_term;
    } else if (kind == "select-two-term") {
      s.kind = ExperimentKind::select_two_term;
    } else {
      throw InputError("experiment spec: unknown kind '" + kind + "'");
    }
    s.M = j.at("M").get<int>();
    s.N = j.at("N").get<int>();
    s.m0 = j.at("m0").get<int>();
    s.n0 = j.at("n0").get<int>();
    s.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    if (j.contains("varphi2_grid")) s.varphi2_grid = j["varphi2_grid"].get<std::vector<double>>();
    if (j.contains("lambda_ratio_grid")) {
      s.lambda_ratio_grid = j["lambda_ratio_grid"].get<std::vector<double>>();
    }
    s.sigma = j.at("sigma").get<double>();
    s.reps = j.at("reps").get<int>();
    const auto& k = j.at("kappa");
    if (k.is_string()) {
      s.kappa = Criterion::preset(k.get<std::string>(), s.M, s.N).kappa;
    } else {
      s.kappa = k.get<double>();
    }
    s.base_seed = j.at("base_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("experiment spec: ") + e.what());
  } catch (const DomainError& e) {
    throw InputError(std::string("experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string experiment_spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  switch (s.kind) {
    case ExperimentKind::estimation: j["kind"] = "estimation"; break;
    case ExperimentKind::select_one_term: j["kind"] = "select-one-term"; break;
    case ExperimentKind::select_two_term: j["kind"] = "select-two-term"; break;
  }
  j["M"] = s.M;
  j["N"] = s.N;
  j["m0"] = s.m0;
  j["n0"] = s.n0;
  j["lambda_grid"] = s.lambda_grid;
  if (!s.varphi2_grid.empty()) j["varphi2_grid"] = s.varphi2_grid;
  if (!s.lambda_ratio_grid.empty()) j["lambda_ratio_grid"] = s.lambda_ratio_grid;
  j["sigma"] = s.sigma;
  j["reps"] = s.reps;
  j["kappa"] = s.kappa;
  j["base_seed"] = s.base_seed;
  return j.dump(2);
}

std::uint64_t rep_seed(std::uint64_t base_seed, std::size_t secondary_index,
                       std::size_t grid_index, std::size_t rep) {
  return derive_seed(derive_seed(derive_seed(base_seed, secondary_index), grid_index), rep);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const IterationControl& ctl,
                                ScanOptions opts) {
  spec.validate();
  ctl.validate();
  const Configuration cfg = spec.true_cfg();
  const std::vector<double>& secondary = spec.kind == ExperimentKind::select_two_term
                                             ? spec.lambda_ratio_grid
                                             : spec.varphi2_grid;
  const std::size_t n_sec = std::max<std::size_t>(secondary.size(), 1);
  const std::size_t n_grid = spec.lambda_grid.size();
  const std::size_t n_rep = static_cast<std::size_t>(spec.reps);
  const std::size_t total = n_sec * n_grid * n_rep;

  std::vector<RepRecord> records(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};
  const Criterion crit = Criterion::custom(spec.kappa);

  auto run_cell = [&](std::size_t idx) {
    const std::size_t s = idx / (n_grid * n_rep);
    const std::size_t g = (idx / n_rep) % n_grid;
    const std::size_t r = idx % n_rep;
    const std::uint64_t seed = rep_seed(spec.base_seed, s, g, r);
    const double lambda = spec.lambda_grid[g];
    RepRecord& rec = records[idx];
    rec.grid_value = lambda;
    rec.rep = static_cast<int>(r);
    if (!secondary.empty()) rec.secondary = secondary[s];

    if (spec.kind == ExperimentKind::estimation) {
      std::vector<double> e1a(cfg.rearranged_rows(), 0.0), e1b(cfg.rearranged_cols(), 0.0);
      e1a[0] = e1b[0] = 1.0;
      const DenseMatrix a = unvec(e1a, cfg.a_rows(), cfg.a_cols());
      const DenseMatrix b = unvec(e1b, cfg.b_rows(), cfg.b_cols());
      const GeneratedInstance inst = gen_deterministic(lambda, a, b, spec.sigma, seed);
      const KopaModel fit = fit_one_term(inst.y, cfg, ctl);
      const KroneckerTerm& t = fit.terms.front();
      const double rel = t.lambda / lambda - 1.0;
      rec.lambda_hat = t.lambda;
      rec.outcome = std::log(rel * rel);
      rec.factor_error = std::log((t.a - a).frobenius_norm2()) + std::log((t.b - b).frobenius_norm2());
      return;
    }

    GeneratedInstance inst = [&] {
      if (spec.kind == ExperimentKind::select_two_term) {
        return gen_two_term(lambda, lambda * std::sqrt(secondary[s]), cfg, spec.sigma, seed);
      }
      if (!secondary.empty()) {
        auto [a, b] = gen_gap_controlled(secondary[s], cfg, seed);
        return gen_deterministic(lambda, a, b, spec.sigma, seed);
      }
      return gen_random_scheme(lambda, cfg, spec.sigma, seed);
    }();
    const SelectionReport rep = select_configuration(inst.y, crit, ctl, ScanOptions{1});
    rec.chosen_m = rep.chosen.m();
    rec.chosen_n = rep.chosen.n();
    rec.lambda_hat = rep.chosen_row().lambda_hat;
    rec.outcome = rep.chosen == cfg ? 1.0 : 0.0;
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        run_cell(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                       : opts.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (!errors[i]) continue;
    const RepRecord& rec = records[i];
    try {
      std::rethrow_exception(errors[i]);
    } catch (...) {
      rethrow_with_context("rep " + std::to_string(rec.rep) + " at grid value " +
                           fmt_real(rec.grid_value) + ": ");
    }
  }

  ExperimentResult result{spec, std::move(records), {}, {}};
  for (std::size_t s = 0; s < n_sec; ++s) {
    for (std::size_t g = 0; g < n_grid; ++g) {
      const auto first = result.records.begin() + static_cast<std::ptrdiff_t>((s * n_grid + g) * n_rep);
      const auto last = first + static_cast<std::ptrdiff_t>(n_rep);
      if (spec.kind == ExperimentKind::estimation) {
        std::vector<double> le, fe;
        for (auto it = first; it != last; ++it) {
          le.push_back(it->outcome);
          fe.push_back(it->factor_error);
        }
        result.estimation.push_back({spec.lambda_grid[g], spec.reps, median(le), median(fe)});
      } else {
        FrequencyRow row;
        if (!secondary.empty()) row.secondary = secondary[s];
        row.grid_value = spec.lambda_grid[g];
        row.reps = spec.reps;
        for (auto it = first; it != last; ++it) row.correct += it->outcome > 0.5 ? 1 : 0;
        row.frequency = static_cast<double>(row.correct) / row.reps;
        result.frequency.push_back(row);
      }
    }
  }
  return result;
}

std::string records_to_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "grid_value,rep,outcome,secondary,chosen_m,chosen_n,lambda_hat,factor_error\n";
  const bool estimation = result.spec.kind == ExperimentKind::estimation;
  for (const auto& r : result.records) {
    os << fmt_real(r.grid_value) << ',' << r.rep << ',' << fmt_real(r.outcome) << ','
       << (r.secondary ? fmt_real(*r.secondary) : "") << ',';
    if (estimation) {
      os << ",," << fmt_real(r.lambda_hat) << ',' << fmt_real(r.factor_error) << '\n';
    } else {
      os << r.chosen_m << ',' << r.chosen_n << ',' << fmt_real(r.lambda_hat) << ",\n";
    }
  }
  return os.str();
}

std::string aggregate_to_csv(const ExperimentResult& result) {
  std::ostringstream os;
  if (result.spec.kind == ExperimentKind::estimation) {
    os << "grid_value,reps,median_lambda_error,median_factor_error\n";
    for (const auto& r : result.estimation) {
      os << fmt_real(r.grid_value) << ',' << r.reps << ',' << fmt_real(r.median_lambda_error)
         << ',' << fmt_real(r.median_factor_error) << '\n';
    }
  } else {
    os << "secondary,grid_value,correct,reps,frequency\n";
    for (const auto& r : result.frequency) {
      os << (r.secondary ? fmt_real(*r.secondary) : "") << ',' << fmt_real(r.grid_value) << ','
         << r.correct << ',' << r.reps << ',' << fmt_real(r.frequency) << '\n';
    }
  }
  return os.str();
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DimensionError("ols_slope: need two equal-length samples of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0) throw DomainError("ols_slope: x is constant");
  return sxy / sxx;
}

std::optional<double> first_crossing(std::span<const FrequencyRow> rows, double level) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].frequency < level) continue;
    if (i == 0) return rows[0].grid_value;
    const FrequencyRow& lo = rows[i - 1];
    const FrequencyRow& hi = rows[i];
    const double t = (level - lo.frequency) / (hi.frequency - lo.frequency);
    return lo.grid_value + t * (hi.grid_value - lo.grid_value);
  }
  return std::nullopt;
}

}  // namespace kopa
