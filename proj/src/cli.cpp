#include "kopa/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "kopa/error.hpp"
#include "kopa/fit.hpp"
#include "kopa/imaging.hpp"
#include "kopa/selection.hpp"
#include "kopa/simgen.hpp"

namespace kopa {

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::optional<double> kappa;
  std::string criterion = "bic";
  double tol = 1e-10;
  int max_iter = 5000;
  std::optional<unsigned> threads;
  std::string out;
};

IterationControl control(const GlobalOptions& g) {
  IterationControl ctl{g.tol, g.max_iter, g.seed};
  ctl.validate();
  return ctl;
}

ScanOptions scan_options(const GlobalOptions& g) {
  if (g.threads) return {*g.threads};
  if (const char* env = std::getenv("KOPA_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0') throw DomainError("KOPA_THREADS must be a nonnegative integer");
    return {static_cast<unsigned>(v)};
  }
  return {0};
}

Criterion criterion(const GlobalOptions& g, int M, int N) {
  if (g.kappa) return Criterion::custom(*g.kappa);
  return Criterion::preset(g.criterion, M, N);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::pair<int, int> exponents_of(const GrayImage& img) {
  return {*dyadic_exponent(img.height), *dyadic_exponent(img.width)};
}

Configuration parse_config(const std::string& text, int M, int N) {
  int m = 0, n = 0;
  char comma = 0;
  std::istringstream ss(text);
  if (!(ss >> m >> comma >> n) || comma != ',' || !ss.eof()) {
    throw DomainError("--config expects m,n (got '" + text + "')");
  }
  return {m, n, M, N};
}

GrayImage load_input(const std::string& path, bool pad) {
  return load_image(path, PgmFormat::automatic, pad ? DyadicPolicy::pad : DyadicPolicy::require);
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kronecker product approximation: configuration selection, fitting, denoising"};
  app.name("kopa");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for start vectors and noise")->capture_default_str();
  auto* kappa_opt = app.add_option("--kappa", g.kappa, "Penalty weight kappa (overrides --criterion)");
  app.add_option("--criterion", g.criterion, "Preset penalty: mse, aic or bic")
      ->check(CLI::IsMember({"mse", "aic", "bic"}, CLI::ignore_case))
      ->excludes(kappa_opt)
      ->capture_default_str();
  app.add_option("--tol", g.tol, "Relative singular-vector residual tolerance")->capture_default_str();
  app.add_option("--max-iter", g.max_iter, "Power iteration cap")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: all cores; default KOPA_THREADS)");
  app.add_option("--out", g.out, "Main output file");

  std::string input;
  bool pad = false;
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input", input, "PGM image")->required();
    sub->add_flag("--pad", pad, "Zero-pad non-power-of-two images");
  };

  auto* select = app.add_subcommand("select", "IC scan over all configurations");
  add_input(select);
  std::string heatmap;
  select->add_option("--heatmap", heatmap, "Also write the IC table as CSV");

  auto* fit = app.add_subcommand("fit", "Fit K terms at a fixed configuration");
  add_input(fit);
  std::string config_text;
  std::size_t terms = 1;
  std::string recon_path;
  fit->add_option("--config", config_text, "Configuration m,n")->required();
  fit->add_option("--terms", terms, "Number of terms K")->capture_default_str();
  fit->add_option("--recon", recon_path, "Write the reconstruction as PGM");

  auto* den = app.add_subcommand("denoise", "Corrupt (optionally), select and fit K terms");
  add_input(den);
  double sigma = 0;
  std::string noisy_path, model_path;
  den->add_option("--sigma", sigma, "Pixel noise level added before denoising")->capture_default_str();
  den->add_option("--terms", terms, "Number of terms K")->capture_default_str();
  den->add_option("--noisy", noisy_path, "Write the corrupted image as PGM");
  den->add_option("--model", model_path, "Write the fitted model as JSON");

  auto* curve = app.add_subcommand("curve", "Variance explained against parameter count (CSV)");
  add_input(curve);

  auto* sim = app.add_subcommand("sim", "Run a simulation spec");
  std::string spec_path, aggregate_path;
  sim->add_option("--spec", spec_path, "Experiment spec JSON")->required();
  sim->add_option("--aggregate", aggregate_path, "Also write the aggregated CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const IterationControl ctl = control(g);
    const ScanOptions opts = scan_options(g);

    if (*select) {
      const GrayImage img = demean(load_input(input, pad));
      const auto [M, N] = exponents_of(img);
      const SelectionReport rep = select_configuration(img.to_matrix(), criterion(g, M, N), ctl, opts);
      const std::string body = ends_with(g.out, ".csv") ? report_to_csv(rep) : report_to_json(rep);
      if (!g.out.empty()) write_text(g.out, body);
      if (!heatmap.empty()) write_text(heatmap, report_to_csv(rep));
      for (const auto& w : rep.warnings) err << "warning: " << w << '\n';
      if (g.out.empty()) {
        out << body;
      } else {
        out << "chosen " << rep.chosen.m() << ',' << rep.chosen.n() << " (" << rep.criterion
            << ", kappa " << rep.kappa << ")\n";
      }
    } else if (*fit) {
      const GrayImage img = demean(load_input(input, pad));
      const auto [M, N] = exponents_of(img);
      const KopaModel model = fit_k_terms(img.to_matrix(), parse_config(config_text, M, N), terms, ctl);
      const std::string body = model_to_json(model);
      if (!g.out.empty()) {
        write_text(g.out, body);
      }
      if (!recon_path.empty()) {
        save_image(recon_path, GrayImage::from_matrix(reconstruct(model), img.mean_removed));
      }
      if (g.out.empty()) out << body << '\n';
      out << "variance_explained " << std::setprecision(6) << variance_explained(model) << '\n';
    } else if (*den) {
      const GrayImage clean = load_input(input, pad);
      const auto [M, N] = exponents_of(clean);
      const GrayImage noisy = corrupt(clean, sigma, g.seed);
      const DenoiseResult res = denoise(noisy, criterion(g, M, N), terms, ctl, opts);
      if (!g.out.empty()) save_image(g.out, res.recon);
      if (!noisy_path.empty()) save_image(noisy_path, display_rescale(noisy));
      if (!model_path.empty()) write_text(model_path, model_to_json(res.model));
      out << "chosen " << res.report.chosen.m() << ',' << res.report.chosen.n() << '\n'
          << "reconstruction_error " << std::setprecision(6)
          << reconstruction_error(clean, res.recon) << '\n';
    } else if (*curve) {
      const GrayImage img = load_input(input, pad);
      const std::string body = curve_to_csv(compression_curve(img, ctl, opts));
      if (g.out.empty()) {
        out << body;
      } else {
        write_text(g.out, body);
      }
    } else if (*sim) {
      const ExperimentSpec spec = parse_experiment_spec(read_text(spec_path));
      const ExperimentResult res = run_experiment(spec, ctl, opts);
      const std::string body = records_to_csv(res);
      if (g.out.empty()) {
        out << body;
      } else {
        write_text(g.out, body);
      }
      if (!aggregate_path.empty()) write_text(aggregate_path, aggregate_to_csv(res));
    }
  } catch (const ConvergenceError& e) {
    err << "kopa: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const InputError& e) {
    err << "kopa: " << e.what() << '\n';
    return kExitInput;
  } catch (const DimensionError& e) {
    err << "kopa: " << e.what() << '\n';
    return kExitInput;
  } catch (const DomainError& e) {
    err << "kopa: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "kopa: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace kopa
