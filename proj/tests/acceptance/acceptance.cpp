// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 100).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "seabed/bench.hpp"
#include "seabed/catalog.hpp"
#include "seabed/classifiers.hpp"
#include "seabed/dataset.hpp"
#include "seabed/helmholtz.hpp"
#include "seabed/modal.hpp"
#include "seabed/neural.hpp"
#include "seabed/nmla.hpp"
#include "seabed/seed.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace seabed;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string cli;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string pct(double v) { return fmt(100 * v, 3) + "%"; }

// ---------------------------------------------------------------------------
// 1. Pekeris wavenumbers against the dispersion-relation roots.

Outcome pekeris(const Context&) {
  const DepthModel m = build_layered_model({{111, 1500, 1500, 1000, 0}, {150, 1800, 1800, 1500, 0}}, 400, 20, 1800);
  const ModeSet s = solve_modes(m, 400);
  const auto roots = oracle::pekeris_roots(1500, 1000, 1800, 1500, 111, 400);
  if (s.modes.size() != roots.size()) {
    return {false, std::to_string(s.modes.size()) + " modes, dispersion relation has " + std::to_string(roots.size())};
  }
  double worst = 0;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    worst = std::max(worst, std::abs(s.modes[i].k.real() / roots[i] - 1.0));
  }
  return {worst < 1e-4, std::to_string(roots.size()) + " trapped modes, max relative error " + fmt(worst, 3) +
                            " (tol 1e-4)"};
}

// 2. Modes of the nominal clay environment are 1/rho-orthonormal.

Outcome orthonormality(const Context&) {
  const auto env = lowfreq_environment(EnvironmentSet::training(), SedimentClass::kClay);
  const ModeSet s = solve_modes(build_depth_model(env), env.frequency);
  double worst = 0;
  for (std::size_t a = 0; a < s.modes.size(); ++a) {
    for (std::size_t b = a; b < s.modes.size(); ++b) {
      const double g = oracle::weighted_inner(s.z, s.rho, s.modes[a].psi, s.modes[b].psi);
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  return {!s.modes.empty() && worst < 1e-6,
          std::to_string(s.modes.size()) + " modes, max |<m,n> - delta| " + fmt(worst, 3) + " (tol 1e-6)"};
}

// 3. MFP on the noise-free nominal fields.

Outcome mfp_self(const Context&) {
  const ReplicaBank bank = ReplicaBank::from_fields(lowfreq_fields(EnvironmentSet::training(), {}));
  // Measured fields from the dataset path, scaled to show the power is
  // normalization free.
  const LabeledDataset d = generate_lowfreq_dataset(EnvironmentSet::training(), 1, std::nullopt, 5);
  int correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto field = d.complex_row(i);
    for (auto& v : field) v *= cplx(3.0, -2.0);
    correct += mfp_classify(field, bank) == static_cast<SedimentClass>(d.labels[i]);
  }
  return {correct == 4 && d.size() == 4, std::to_string(correct) + "/" + std::to_string(d.size()) + " correct"};
}

// 4. Logistic regression against MFP on the perturbed low-frequency sets.

Outcome lr_vs_mfp(const Context& ctx) {
  std::ostringstream detail;
  bool pass = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c;
    c.pipeline = Pipeline::kLowFreq;
    c.train_set = EnvironmentSet::training();
    for (int t = 1; t <= 10; ++t) c.test_sets.push_back(EnvironmentSet::test(t));
    c.train_samples_per_class = 200;
    c.test_samples_per_class = 50;
    c.train_snr_db = 18.0;
    c.test_snr_db = {15.0, 18.0, 21.0};
    c.noise_realizations = 4;
    c.master_seed = seed;
    c.classifiers = {{"mfp", {}}, {"lr", {{"lambda", {1e-5, 1e-4, 1e-3, 1e-2}}}}};
    c.search_budget = 4;
    c.cv_folds = 5;
    RunOptions o;
    o.cache_dir = ctx.work / "cache";
    const Report r = run_experiment(c, o);
    std::map<double, std::pair<double, double>> acc;  // snr -> (mfp, lr)
    for (const SweepRow& row : r.sweep) {
      auto& slot = acc[*row.snr_db];
      (row.variant == "mfp" ? slot.first : slot.second) = row.accuracy;
    }
    detail << "seed " << seed << ":";
    for (const auto& [snr, a] : acc) {
      const bool ok = snr == 18.0 ? a.second > a.first : a.second >= a.first - 0.02;
      pass = pass && ok;
      detail << " " << snr << "dB lr " << fmt(a.second, 3) << " mfp " << fmt(a.first, 3) << (ok ? "" : "(x)");
    }
    detail << "; ";
  }
  return {pass, detail.str() + "need lr >= mfp - 0.02, and lr > mfp at 18 dB"};
}

// 5. Flat interface between two fluid halfspaces.

Outcome flat_interface(const Context&) {
  std::ostringstream detail;
  bool pass = true;
  for (SedimentClass cls : kAllClasses) {
    HighFreqTemplate t = backscatter_environment(EnvironmentSet::training(), cls).make_template(0.5, 0);
    t.c_bottom = t.c_top;
    t.rho_bottom = t.rho_top;
    t.roughness.rms_height = 0;
    if (t.frequency != 15000.0 || t.incident_angle != kPi / 12) return {false, "template geometry changed"};
    const FieldSolution s = solve_template(t);
    const double alpha = attenuation_to_nepers(t.attenuation_db_per_m_per_khz, AttenuationUnit::kDbPerMeterPerKhz,
                                               t.frequency, t.c_top);
    const double R = std::abs(oracle::fresnel(2 * kPi * t.frequency, t.incident_angle, t.c_water, t.rho_water, t.c_top,
                                              t.rho_top, alpha));
    std::vector<Point2> pts;
    for (double x = 0.05; x < t.width; x += 0.1) {
      for (double z : {0.2, 0.5, 0.8, 1.1}) pts.push_back({x, z});
    }
    double worst = 0;
    for (const cplx& v : sample_field(s, pts).values) worst = std::max(worst, std::abs(std::abs(v) / R - 1.0));
    pass = pass && worst < 0.02;
    detail << to_string(cls) << " |R|=" << fmt(R, 3) << " err " << pct(worst) << "; ";
  }
  return {pass, detail.str() + "tol 2%"};
}

// 6. PML reflection in homogeneous water.

Outcome pml(const Context&) {
  HighFreqTemplate t;
  t.c_top = t.c_bottom = t.c_water;
  t.rho_top = t.rho_bottom = t.rho_water;
  t.attenuation_db_per_m_per_khz = 0;
  const LayeredDomain d = LayeredDomain::from_template(t);
  const IncidentSpec inc = IncidentSpec::from_template(t);
  // A sheet source near the center launches plane waves toward both PMLs; a
  // reflection beats against the outgoing wave, and the standing-wave ratio
  // of |u| along z gives its amplitude relative to the outgoing one.
  const double zc = 0.2, w = 0.05;
  const FieldSolution s = solve_scattered(assemble_with_source(d, [&](double x, double z) {
    return std::exp(-cplx(0, 1) * inc.kx() * x) * std::exp(-(z - zc) * (z - zc) / (w * w));
  }));
  double worst = 0;
  for (auto [lo, hi] : {std::pair{zc + 0.2, 1.3}, std::pair{-0.95, zc - 0.2}}) {
    double mx = 0, mn = 1e300;
    for (double z = lo; z <= hi; z += 0.002) {
      const double a = std::abs(s.value(0.5 * t.width, z));
      mx = std::max(mx, a);
      mn = std::min(mn, a);
    }
    worst = std::max(worst, (mx - mn) / (mx + mn));
  }
  return {worst < 0.01, "reflection estimate " + pct(worst) + " (tol 1%)"};
}

// 7. NMLA on analytic plane waves.

Outcome nmla(const Context&) {
  const double k = 2 * kPi * 15000.0 / 1500.0;
  const double r = 2.5 * 2 * kPi / k;
  const Point2 center{0.7, 1.0};
  const int n = CircleData::min_samples(k, r);
  std::ostringstream detail;
  bool pass = true;
  double worst_amp = 0, worst_dir = 0;
  for (double deg : {0.0, 30.0, 97.5, 195.0, 284.0}) {
    const double dir = deg * kPi / 180;
    const AngularSpectrum s = angular_spectrum(sample_plane_waves({{cplx(0.8, 0.6), dir}}, k, center, r, n));
    std::size_t peak = 0;
    for (std::size_t m = 1; m < s.amplitudes.size(); ++m) {
      if (std::abs(s.amplitudes[m]) > std::abs(s.amplitudes[peak])) peak = m;
    }
    double dist = std::fmod(std::abs(s.angles[peak] - dir), 2 * kPi);
    dist = std::min(dist, 2 * kPi - dist);
    const double bins = dist / (2 * kPi / static_cast<double>(s.angles.size()));
    const double amp = std::abs(std::abs(s.amplitudes[peak]) - 1.0);
    worst_dir = std::max(worst_dir, bins);
    worst_amp = std::max(worst_amp, amp);
    pass = pass && bins <= 1.0 && amp <= 0.05;
  }
  const AngularSpectrum two =
      angular_spectrum(sample_plane_waves({{1.0, 30 * kPi / 180}, {2.0, 150 * kPi / 180}}, k, center, r, n));
  const double ratio = directional_amplitude(two, 150 * kPi / 180) / directional_amplitude(two, 30 * kPi / 180);
  const double ratio_err = std::abs(ratio / 2.0 - 1.0);
  pass = pass && ratio_err <= 0.05;
  detail << "single wave: direction off by <= " << fmt(worst_dir, 3) << " bins, amplitude err " << pct(worst_amp)
         << "; two waves: ratio " << fmt(ratio, 5) << " (err " << pct(ratio_err) << ", tol 5%)";
  return {pass, detail.str()};
}

// 8. Noise calibration over 10,000 draws.

Outcome noise(const Context&) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::vector<cplx> sc(20);
  for (auto& v : sc) v = {g(rng), g(rng)};
  std::vector<double> sr(128);
  for (auto& v : sr) v = g(rng);
  auto power = [](const auto& v) {
    double p = 0;
    for (const auto& x : v) p += std::norm(x);
    return p;
  };
  const double pc = power(sc), pr = power(sr);
  std::ostringstream detail;
  bool pass = true;
  double worst = 0;
  for (double snr : {-10.0, 0.0, 15.0, 18.0, 30.0}) {
    double nc = 0, nr = 0;
    for (std::uint64_t i = 0; i < 10000; ++i) {
      const auto yc = add_noise(sc, {snr, FeatureKind::kComplex20, derive_seed({8, 1, i})});
      const auto yr = add_noise(sr, {snr, FeatureKind::kReal, derive_seed({8, 2, i})});
      for (std::size_t j = 0; j < sc.size(); ++j) nc += std::norm(yc[j] - sc[j]);
      for (std::size_t j = 0; j < sr.size(); ++j) nr += std::norm(yr[j] - sr[j]);
    }
    const double ec = 10 * std::log10(pc / (nc / 10000)), er = 10 * std::log10(pr / (nr / 10000));
    worst = std::max({worst, std::abs(ec - snr), std::abs(er - snr)});
  }
  pass = worst <= 0.2;
  detail << "complex and real, SNR -10..30 dB: max |empirical - target| " << fmt(worst, 3) << " dB (tol 0.2)";
  return {pass, detail.str()};
}

// 9. CNN-3 gradient check on a 3-sample batch.

Outcome cnn_gradient(const Context&) {
  const int length = 16;
  Network net = Network::cnn3(length, 9);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(length, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const std::vector<int> y = {1, 3, 0};
  Eigen::VectorXd grad;
  net.loss(x, y, &grad);
  Eigen::VectorXd p = net.parameters();
  const double h = 1e-5;
  Eigen::VectorXd fd(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    net.set_parameters(p);
    const double up = net.loss(x, y, nullptr);
    p[i] = saved - h;
    net.set_parameters(p);
    const double down = net.loss(x, y, nullptr);
    p[i] = saved;
    fd[i] = (up - down) / (2 * h);
  }
  const double rel = (grad - fd).norm() / fd.norm();
  return {rel < 1e-4, "all " + std::to_string(p.size()) + " parameters, relative error " + fmt(rel, 3) + " (tol 1e-4)"};
}

// 10 and 11 share one backscatter protocol.

ExperimentConfig backscatter_protocol(std::uint64_t seed) {
  ExperimentConfig c;
  c.pipeline = Pipeline::kBackscatter;
  c.train_set = EnvironmentSet::training();
  c.test_sets = {EnvironmentSet::test(1), EnvironmentSet::test(2), EnvironmentSet::test(3), EnvironmentSet::test(4)};
  c.train_samples_per_class = 25;
  c.test_samples_per_class = 10;
  c.train_snr_db = std::nullopt;
  c.test_snr_db = {20.0};
  c.noise_realizations = 4;
  c.master_seed = seed;
  for (const char* v : {"nc", "knn", "lr", "svm-linear", "svm-rbf", "mlp", "cnn3"}) c.classifiers.push_back({v, {}});
  c.search_budget = 1;
  return c;
}

Report backscatter_report(const Context& ctx, std::uint64_t seed) {
  RunOptions o;
  o.cache_dir = ctx.work / "cache";
  o.log = [](std::string_view s) { std::cerr << "  " << s << '\n'; };
  return run_experiment(backscatter_protocol(seed), o);
}

Outcome backscatter_validation(const Context& ctx) {
  const Report r = backscatter_report(ctx, 1);
  std::ostringstream detail;
  bool pass = true;
  double best_shallow = 0, cnn = 0;
  for (const auto& c : r.classifiers) {
    const double a = c.validation.accuracy();
    pass = pass && a >= 0.40;
    detail << c.variant << " " << fmt(a, 3) << ", ";
    if (c.variant == "cnn3") cnn = a;
    else best_shallow = std::max(best_shallow, a);
  }
  const bool directional = cnn >= best_shallow - 0.05;
  detail << "on " << r.validation_samples << " noise-free validation samples; need all >= 0.40 and cnn3 >= "
         << fmt(best_shallow - 0.05, 3);
  return {pass && directional, detail.str()};
}

Outcome thickness_sensitivity(const Context& ctx) {
  std::ostringstream detail;
  bool pass = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Report r = backscatter_report(ctx, seed);
    const ClassifierResult* best = nullptr;
    double best_mean = -1;
    for (const auto& c : r.classifiers) {
      double sum = 0;
      for (const auto& cell : c.cells) sum += cell.accuracy;
      const double mean = sum / static_cast<double>(c.cells.size());
      if (mean > best_mean) {
        best_mean = mean;
        best = &c;
      }
    }
    std::map<std::string, double> by_set;
    for (const auto& cell : best->cells) by_set[cell.test_set] = cell.accuracy;
    double others = 1.0;
    for (const auto& [set, a] : by_set) {
      if (set != "test3") others = std::min(others, a);
    }
    const bool ok = by_set.at("test3") <= others;
    pass = pass && ok;
    detail << "seed " << seed << " best " << best->variant << ":";
    for (const auto& [set, a] : by_set) detail << " " << set << " " << fmt(a, 3);
    detail << (ok ? "" : " (x)") << "; ";
  }
  return {pass, detail.str() + "need test3 to be the minimum"};
}

// 12. `bench run` twice plus once with three workers: identical outputs.

ExperimentConfig determinism_config() {
  ExperimentConfig c;
  c.pipeline = Pipeline::kLowFreq;
  c.test_sets = {EnvironmentSet::test(2), EnvironmentSet::test(7)};
  c.train_samples_per_class = 30;
  c.test_samples_per_class = 10;
  c.train_snr_db = 12.0;
  c.test_snr_db = {6.0, std::nullopt};
  c.noise_realizations = 2;
  c.master_seed = 12;
  c.classifiers = {{"mfp", {}}, {"nc", {}}, {"knn", {{"k", {1, 3, 5}}}}, {"lr", {}}, {"svm-linear", {}},
                   {"svm-rbf", {}}, {"mlp", {}}, {"cnn3", {}}};
  c.search_budget = 2;
  c.cv_folds = 3;
  c.train.max_epochs = 20;
  return c;
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name == "timing.json") continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    out[name] = ss.str();
  }
  return out;
}

Outcome determinism(const Context& ctx) {
  const fs::path root = ctx.work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "bench.ini";
  {
    std::ofstream os(config);
    write_config(os, determinism_config());
  }
  std::vector<std::map<std::string, std::string>> runs;
  const std::vector<int> workers = {1, 1, 3};
  for (std::size_t i = 0; i < workers.size(); ++i) {
    const fs::path out = root / ("run" + std::to_string(i));
    const fs::path cache = root / ("cache" + std::to_string(i));
    if (!ctx.cli.empty()) {
      const std::string cmd = "\"" + ctx.cli + "\" bench run --config \"" + config.string() + "\" --workers " +
                              std::to_string(workers[i]) + " --out \"" + out.string() + "\" --cache \"" +
                              cache.string() + "\" > \"" + (root / "log.txt").string() + "\" 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "bench run exited with an error, see " + (root / "log.txt").string()};
    } else {
      ExperimentConfig c = determinism_config();
      c.workers = workers[i];
      RunOptions o;
      o.cache_dir = cache;
      emit_report(run_experiment(c, o), out);
    }
    runs.push_back(outputs(out));
  }
  bool same = runs[0] == runs[1] && runs[0] == runs[2] && runs[0].count("report.json") == 1;
  std::string differing;
  for (const auto& [name, bytes] : runs[0]) {
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (!runs[i].count(name) || runs[i].at(name) != bytes) differing += " " + name;
    }
  }
  return {same, std::to_string(runs[0].size()) + " files compared across 3 runs (workers 1, 1, 3)" +
                    (ctx.cli.empty() ? " via the library" : " via the CLI") +
                    (differing.empty() ? "" : "; differ:" + differing)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0: no runtime bound
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  Context ctx;
  std::string work = (fs::temp_directory_path() / "seabed_acceptance").string();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--work", work, "Scratch and cache directory");
  app.add_option("--cli", ctx.cli, "seabed executable for the determinism check");
  CLI11_PARSE(app, argc, argv);
  ctx.work = work;
  fs::create_directories(ctx.work);

  const std::vector<Criterion> criteria = {
      {1, "modal solver matches the Pekeris dispersion relation", 10, pekeris},
      {2, "modes are orthonormal", 0, orthonormality},
      {3, "MFP classifies the nominal fields", 60, mfp_self},
      {4, "LR vs MFP on the perturbed low-frequency sets", 900, lr_vs_mfp},
      {5, "flat interface matches the fluid-fluid reflection coefficient", 0, flat_interface},
      {6, "PML reflection", 0, pml},
      {7, "NMLA plane-wave recovery", 10, nmla},
      {8, "noise calibration", 0, noise},
      {9, "CNN-3 gradient check", 0, cnn_gradient},
      {10, "desk-scale backscatter classification", 7200, backscatter_validation},
      {11, "layer thickness drives the worst test set", 0, thickness_sensitivity},
      {12, "bench reports are deterministic", 0, determinism},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt(secs, 3) + " s";
    if (c.budget_seconds > 0) {
      timing += " (limit " + fmt(c.budget_seconds, 4) + " s)";
      if (secs > c.budget_seconds) o.pass = false;
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  " << c.name << ": "
              << o.detail << " [" << timing << "]" << std::endl;
  }
  return std::min(failed, 100);
}
