#include "kopa/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <thread>

#include "kopa/error.hpp"

namespace kopa {

namespace {

std::string fmt_real(double x) {
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::pair<int, int> ambient_exponents(const DenseMatrix& y) {
  const auto M = dyadic_exponent(y.rows());
  const auto N = dyadic_exponent(y.cols());
  if (!M || !N) {
    throw DimensionError("selection: Y is " + std::to_string(y.rows()) + "x" +
                         std::to_string(y.cols()) + ", dimensions must be powers of two");
  }
  return {*M, *N};
}

void require_unit(const DenseMatrix& x, const char* what) {
  if (std::abs(x.frobenius_norm() - 1.0) > 1e-8) {
    throw DomainError(std::string(what) + " must have unit Frobenius norm");
  }
}

void require_factor_shapes(const DenseMatrix& a, const DenseMatrix& b, const Configuration& cfg) {
  if (a.rows() != cfg.a_rows() || a.cols() != cfg.a_cols() || b.rows() != cfg.b_rows() ||
      b.cols() != cfg.b_cols()) {
    throw DimensionError("factor shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " do not match the configuration");
  }
}

}  // namespace

Criterion Criterion::mse() { return {0.0, "mse"}; }
Criterion Criterion::aic() { return {2.0, "aic"}; }
Criterion Criterion::bic(int M, int N) { return {(M + N) * std::log(2.0), "bic"}; }

Criterion Criterion::custom(double kappa) {
  Criterion c{kappa, "custom"};
  c.validate();
  return c;
}

Criterion Criterion::preset(std::string_view name, int M, int N) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "mse") return mse();
  if (lower == "aic") return aic();
  if (lower == "bic") return bic(M, N);
  throw DomainError("unknown criterion '" + std::string(name) + "' (expected mse, aic or bic)");
}

void Criterion::validate() const {
  if (!std::isfinite(kappa) || kappa < 0) throw DomainError("criterion: kappa must be >= 0");
}

std::string_view to_string(IcFlag flag) noexcept {
  switch (flag) {
    case IcFlag::ok: return "ok";
    case IcFlag::perfect_fit: return "perfect_fit";
    case IcFlag::not_converged: return "not_converged";
  }
  return "?";
}

IcRecord information_criterion(const DenseMatrix& y, const Configuration& cfg,
                               const Criterion& crit, const IterationControl& ctl) {
  crit.validate();
  if (cfg.is_corner()) {
    throw DomainError("information_criterion: corner configuration (" + std::to_string(cfg.m()) +
                      "," + std::to_string(cfg.n()) + ") fits Y exactly, its IC is -infinity");
  }
  const KopaModel model = fit_one_term(y, cfg, ctl);
  IcRecord rec{cfg, cfg.eta(), model.terms.front().lambda, model.sigma2_hat, 0.0, IcFlag::ok,
               false, false, {}};
  rec.rss_clamped = model.sigma2_clamped;
  rec.near_tie = model.near_tie;
  const double cells = std::ldexp(1.0, cfg.M() + cfg.N());
  // Below a few ulps of ||Y||^2 the difference ||Y||^2 - lambda^2 is round-off.
  if (rec.rss <= 64 * std::numeric_limits<double>::epsilon() * model.y_frob2) {
    rec.ic = -std::numeric_limits<double>::infinity();
    rec.flag = IcFlag::perfect_fit;
  } else {
    rec.ic = cells * std::log(rec.rss) + crit.kappa * static_cast<double>(rec.eta);
  }
  return rec;
}

const IcRecord& SelectionReport::row(int m, int n) const {
  for (const auto& r : table) {
    if (r.cfg.m() == m && r.cfg.n() == n) return r;
  }
  throw DomainError("selection report has no row (" + std::to_string(m) + "," +
                    std::to_string(n) + ")");
}

SelectionReport select_configuration(const DenseMatrix& y, const Criterion& crit,
                                     const IterationControl& ctl, ScanOptions opts) {
  crit.validate();
  ctl.validate();
  const auto [M, N] = ambient_exponents(y);
  const ConfigLattice lattice = candidate_configs(M, N);
  if (y.frobenius_norm2() == 0) throw DomainError("select_configuration: Y is zero");

  const std::size_t count = lattice.entries.size();
  std::vector<std::optional<IcRecord>> slots(count);
  std::vector<std::exception_ptr> hard_errors(count);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      const Configuration& cfg = lattice.entries[i];
      try {
        slots[i] = information_criterion(y, cfg, crit, ctl);
      } catch (const ConvergenceError& e) {
        IcRecord rec{cfg, cfg.eta(), e.best_iterate().sigma, 0.0,
                     std::numeric_limits<double>::quiet_NaN(), IcFlag::not_converged,
                     false, false, {}};
        rec.rss = std::max(0.0, y.frobenius_norm2() - rec.lambda_hat * rec.lambda_hat);
        rec.message = e.what();
        slots[i] = std::move(rec);
      } catch (...) {
        hard_errors[i] = std::current_exception();
      }
    }
  };

  unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                       : opts.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& err : hard_errors) {
    if (err) std::rethrow_exception(err);
  }

  SelectionReport report;
  report.M = M;
  report.N = N;
  report.kappa = crit.kappa;
  report.criterion = crit.name;
  report.table.reserve(count);
  for (auto& slot : slots) report.table.push_back(std::move(*slot));

  const IcRecord* best = nullptr;
  for (const auto& rec : report.table) {
    if (rec.flag == IcFlag::not_converged) {
      report.warnings.push_back("(" + std::to_string(rec.cfg.m()) + "," +
                                std::to_string(rec.cfg.n()) + ") excluded: " + rec.message);
      continue;
    }
    // Strict < over lexicographic order keeps the smallest (m, n) on ties.
    if (best == nullptr || rec.ic < best->ic) best = &rec;
  }
  if (best == nullptr) {
    throw ConvergenceError("select_configuration: no configuration converged", SingularTriplet{});
  }
  report.chosen = best->cfg;
  for (const auto& rec : report.table) {
    if (rec.flag != IcFlag::not_converged && !(rec.cfg == best->cfg) && rec.ic == best->ic) {
      report.tied_with.push_back(rec.cfg);
    }
  }
  return report;
}

std::string report_to_csv(const SelectionReport& report) {
  std::ostringstream os;
  os << "m,n,eta,lambda_hat,rss,ic,flag\n";
  for (const auto& r : report.table) {
    os << r.cfg.m() << ',' << r.cfg.n() << ',' << r.eta << ',' << fmt_real(r.lambda_hat) << ','
       << fmt_real(r.rss) << ',' << (std::isnan(r.ic) ? std::string("nan") : fmt_real(r.ic))
       << ',' << to_string(r.flag) << '\n';
  }
  return os.str();
}

std::string report_to_json(const SelectionReport& report) {
  using nlohmann::json;
  json j;
  j["criterion"] = report.criterion;
  j["kappa"] = report.kappa;
  j["M"] = report.M;
  j["N"] = report.N;
  j["chosen"] = {report.chosen.m(), report.chosen.n()};
  j["tie"] = !report.tied_with.empty();
  auto tied = json::array();
  for (const auto& c : report.tied_with) tied.push_back({c.m(), c.n()});
  j["tied_with"] = std::move(tied);
  auto rows = json::array();
  for (const auto& r : report.table) {
    json row;
    row["m"] = r.cfg.m();
    row["n"] = r.cfg.n();
    row["eta"] = r.eta;
    row["lambda_hat"] = r.lambda_hat;
    row["rss"] = r.rss;
    // JSON has no infinities; -inf and failed rows are written as null.
    row["ic"] = std::isfinite(r.ic) ? json(r.ic) : json(nullptr);
    row["flag"] = std::string(to_string(r.flag));
    rows.push_back(std::move(row));
  }
  j["table"] = std::move(rows);
  j["warnings"] = report.warnings;
  return j.dump(2);
}

GapReport representation_gap(const DenseMatrix& a, const DenseMatrix& b,
                             const Configuration& true_cfg, const IterationControl& ctl) {
  require_factor_shapes(a, b, true_cfg);
  require_unit(a, "representation_gap: A");
  require_unit(b, "representation_gap: B");
  const DenseMatrix c = kron(a, b);
  const ConfigLattice lattice = candidate_configs(true_cfg.M(), true_cfg.N());

  GapReport out;
  out.per_config.reserve(lattice.entries.size());
  bool any_wrong = false;
  for (const auto& cfg : lattice.entries) {
    const double s = spectral_norm(rearrange(c, cfg), ctl);
    out.per_config.emplace_back(cfg, s);
    if (cfg == true_cfg) continue;
    if (!any_wrong || s > out.phi) {
      out.phi = s;
      out.argmax = cfg;
      any_wrong = true;
    }
  }
  if (!any_wrong) throw DomainError("representation_gap: no wrong configuration to compare");
  out.psi2 = 1.0 - out.phi * out.phi;
  return out;
}

TwoTermDiagnostics two_term_diagnostics(const DenseMatrix& a1, const DenseMatrix& b1,
                                        const DenseMatrix& a2, const DenseMatrix& b2,
                                        const Configuration& true_cfg,
                                        const IterationControl& ctl) {
  require_factor_shapes(a2, b2, true_cfg);
  TwoTermDiagnostics out;
  out.phi1 = representation_gap(a1, b1, true_cfg, ctl).phi;
  out.phi2 = representation_gap(a2, b2, true_cfg, ctl).phi;

  const DenseMatrix c1 = kron(a1, b1);
  const DenseMatrix c2 = kron(a2, b2);
  const ConfigLattice lattice = candidate_configs(true_cfg.M(), true_cfg.N());
  for (const auto& cfg : lattice.entries) {
    if (cfg == true_cfg) continue;
    const DenseMatrix r1 = rearrange(c1, cfg);
    const DenseMatrix r2 = rearrange(c2, cfg);
    const bool tall = cfg.m() + cfg.n() >= cfg.m_dagger() + cfg.n_dagger();
    const double cosine =
        tall ? principal_angle_cos(r1, r2) : principal_angle_cos(r1.transpose(), r2.transpose());
    if (!out.xi_argmax || cosine > out.xi) {
      out.xi = cosine;
      out.xi_argmax = cfg;
    }
  }
  return out;
}

}  // namespace kopa
