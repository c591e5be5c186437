// Command line front end. Exit codes: 0 success, 2 configuration or input
// error, 3 generation error, 4 training error, 1 anything else.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "seabed/bench.hpp"
#include "seabed/catalog.hpp"
#include "seabed/classifiers.hpp"
#include "seabed/config.hpp"
#include "seabed/dataset.hpp"
#include "seabed/error.hpp"
#include "seabed/helmholtz.hpp"
#include "seabed/modal.hpp"
#include "seabed/nmla.hpp"

namespace fs = std::filesystem;
using namespace seabed;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitTraining = 4;

void note(const std::string& s) { std::cerr << "seabed: " << s << '\n'; }

fs::path data_file(const fs::path& p) { return fs::is_directory(p) ? p / "dataset.sbd" : p; }

Snr parse_snr(const std::string& s) {
  if (s.empty() || s == "none" || s == "clean") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("not an SNR: '" + s + "'");
  }
}

std::vector<Snr> parse_snr_list(const std::string& s) {
  std::vector<Snr> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    out.push_back(parse_snr(tok));
  }
  if (out.empty()) throw ConfigError("empty SNR list");
  return out;
}

void write_to(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path);
  fn(os);
  if (!os) throw FormatError("write failed: " + path);
}

void save_generated(const LabeledDataset& d, const fs::path& dir, bool csv) {
  fs::create_directories(dir);
  save_dataset(dir / "dataset.sbd", d);
  if (csv) {
    std::ofstream os(dir / "dataset.csv");
    write_dataset_csv(os, d);
  }
  note("wrote " + std::to_string(d.size()) + " samples to " + (dir / "dataset.sbd").string());
}

void print_confusion(const ConfusionMatrix& m) {
  static const char* names[] = {"clay", "silt", "sand", "gravel"};
  std::cout << "true\\pred";
  for (const char* n : names) std::cout << std::setw(8) << n;
  std::cout << '\n';
  for (int r = 0; r < 4; ++r) {
    std::cout << std::setw(9) << names[r];
    for (int c = 0; c < 4; ++c) std::cout << std::setw(8) << m.counts[r][c];
    std::cout << '\n';
  }
}

void print_summary(const Report& r) {
  for (const auto& c : r.classifiers) {
    std::cout << c.variant << ": validation " << std::fixed << std::setprecision(3) << c.validation.accuracy();
    for (const auto& row : r.sweep) {
      if (row.variant != c.variant) continue;
      std::cout << "  snr " << format_snr(row.snr_db) << ": " << row.accuracy << (row.trend_violation ? "*" : "");
    }
    std::cout << '\n';
  }
}

struct BenchArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::string cache;
  bool no_svg = false;
};

int run_bench(const BenchArgs& a, const std::optional<std::vector<Snr>>& sweep) {
  ExperimentConfig config = load_config(a.config);
  if (a.seed) config.master_seed = *a.seed;
  if (a.workers) config.workers = *a.workers;
  if (!a.out.empty()) config.output_dir = a.out;
  config.validate();
  RunOptions opt;
  opt.cache_dir = a.cache.empty() ? default_cache_dir() : std::optional<fs::path>(a.cache);
  Report partial;
  opt.partial = &partial;
  opt.log = [](std::string_view s) { note(std::string(s)); };
  ReportFormats formats;
  formats.svg = !a.no_svg;
  try {
    const Report r = sweep ? snr_sweep(config, *sweep, opt) : run_experiment(config, opt);
    emit_report(r, config.output_dir, formats);
    print_summary(r);
    note("report written to " + config.output_dir);
  } catch (const Error&) {
    emit_report(partial, config.output_dir, {true, false, false});
    note("incomplete report written to " + config.output_dir);
    throw;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic sonar datasets and seabed classification benchmarks"};
  app.require_subcommand(1);
  std::function<int()> action;

  // catalog dump
  auto* catalog = app.add_subcommand("catalog", "Environment catalog")->require_subcommand(1);
  std::string catalog_out;
  bool corrected = false;
  auto* dump = catalog->add_subcommand("dump", "Write every catalog entry as CSV");
  dump->add_option("--out", catalog_out, "Output file (default stdout)");
  dump->add_flag("--corrected-gravel-density", corrected, "Use the corrected gravel density");
  dump->callback([&] {
    action = [&] {
      write_to(catalog_out, [&](std::ostream& os) { dump_catalog_csv(os, {corrected}); });
      return 0;
    };
  });

  // modes solve
  auto* modes = app.add_subcommand("modes", "Normal-mode solver")->require_subcommand(1);
  std::string modes_set = "training", modes_class, modes_out;
  double ppw = 20.0, extension = 150.0;
  auto* msolve = modes->add_subcommand("solve", "Trapped modes and array field of one environment");
  msolve->add_option("--set", modes_set, "Environment set (training, test1, ...)");
  msolve->add_option("--class", modes_class, "Sediment class")->required();
  msolve->add_option("--points-per-wavelength", ppw, "Depth grid density");
  msolve->add_option("--extension", extension, "Halfspace extension below the sediment (m)");
  msolve->add_option("--out", modes_out, "Write the mode set (binary)");
  msolve->callback([&] {
    action = [&] {
      const LowFreqEnvironment env =
          lowfreq_environment(parse_environment_set(modes_set), parse_sediment_class(modes_class));
      const ModeSet m = solve_modes(build_depth_model(env, extension, ppw), env.frequency);
      std::cout << std::setprecision(12) << "mode,k_re,k_im\n";
      for (std::size_t i = 0; i < m.modes.size(); ++i) {
        std::cout << i + 1 << ',' << m.modes[i].k.real() << ',' << m.modes[i].k.imag() << '\n';
      }
      const ComplexField f = pressure_field(m, env);
      std::cout << "\nphone,depth,re,im\n";
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        std::cout << i << ',' << env.first_phone_depth + env.phone_spacing * static_cast<double>(i) << ','
                  << f.values[i].real() << ',' << f.values[i].imag() << '\n';
      }
      if (!modes_out.empty()) save_modes(modes_out, m);
      if (m.empty()) throw GenerationError("no trapped modes");
      return 0;
    };
  });

  // scatter solve
  auto* scatter = app.add_subcommand("scatter", "Rough-interface scattering solver")->require_subcommand(1);
  std::string template_path, field_out, signal_out;
  int n_points = 128;
  double z0 = 1.0, radius_wl = 2.5;
  auto* ssolve = scatter->add_subcommand("solve", "Solve one scattering template and read out the backscatter");
  ssolve->add_option("--template", template_path, "Template file")->required()->check(CLI::ExistingFile);
  ssolve->add_option("--field-out", field_out, "Write the scattered field (binary)");
  ssolve->add_option("--signal-out", signal_out, "Write the backscatter signal CSV (default stdout)");
  ssolve->add_option("--points", n_points, "Observation points along the surface");
  ssolve->add_option("--z0", z0, "Observation height above the mean interface (m)");
  ssolve->add_option("--radius-wavelengths", radius_wl, "Observation circle radius in wavelengths");
  ssolve->callback([&] {
    action = [&] {
      const TemplateFile t = load_template(template_path);
      DiscretizationOptions d;
      d.nodes_per_wavelength = t.solver.nodes_per_wavelength;
      d.pml_wavelengths = t.solver.pml_wavelengths;
      const FieldSolution s = solve_template(t.scene, t.solver.surface_points, d);
      std::ostringstream msg;
      msg << "unknowns " << s.stats().unknowns << ", relative residual " << std::scientific << s.stats().residual;
      note(msg.str());
      if (!field_out.empty()) save_field(field_out, s);
      const double radius = radius_wl * 2 * 3.14159265358979323846 / t.scene.water_wavenumber();
      const BackscatterSignal sig = backscatter_signal(s, t.scene, n_points, z0, radius, t.solver.surface_points);
      write_to(signal_out, [&](std::ostream& os) { write_signal_csv(os, sig); });
      return 0;
    };
  });

  // gen lowfreq | backscatter
  auto* gen = app.add_subcommand("gen", "Generate labeled datasets")->require_subcommand(1);
  std::string gen_set = "training", gen_snr, gen_out;
  int gen_count = 10, gen_workers = 1;
  std::uint64_t gen_seed = 1;
  bool gen_csv = false, gen_corrected = false;
  auto add_gen_options = [&](CLI::App* sub) {
    sub->add_option("--set", gen_set, "Environment set (training, test1, ...)");
    sub->add_option("--count", gen_count, "Samples per class");
    sub->add_option("--snr", gen_snr, "SNR in dB (omit for noise-free)");
    sub->add_option("--seed", gen_seed, "Master seed");
    sub->add_option("--out", gen_out, "Output directory")->required();
    sub->add_flag("--csv", gen_csv, "Also write dataset.csv");
  };
  auto* gen_lf = gen->add_subcommand("lowfreq", "Array pressure fields from the normal-mode model");
  add_gen_options(gen_lf);
  gen_lf->callback([&] {
    action = [&] {
      save_generated(generate_lowfreq_dataset(parse_environment_set(gen_set), gen_count, parse_snr(gen_snr), gen_seed),
                     gen_out, gen_csv);
      return 0;
    };
  });
  auto* gen_bs = gen->add_subcommand("backscatter", "Backscatter signals from the scattering model");
  add_gen_options(gen_bs);
  gen_bs->add_option("--workers", gen_workers, "Parallel solves");
  gen_bs->add_flag("--corrected-gravel-density", gen_corrected, "Use the corrected gravel density");
  gen_bs->callback([&] {
    action = [&] {
      BackscatterSettings s;
      s.corrected_gravel_density = gen_corrected;
      save_generated(generate_backscatter_dataset(parse_environment_set(gen_set), gen_count, parse_snr(gen_snr),
                                                  gen_seed, s, gen_workers),
                     gen_out, gen_csv);
      return 0;
    };
  });

  // train
  std::string variant, train_data, val_data, model_out;
  std::vector<std::string> hyper_args;
  double val_fraction = 0.2;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> max_epochs;
  auto* train = app.add_subcommand("train", "Train one classifier");
  train->add_option("--variant", variant, "mfp, nc, knn, lr, svm-linear, svm-rbf, mlp or cnn3")->required();
  train->add_option("--data", train_data, "Dataset directory or file")->required();
  train->add_option("--val-data", val_data, "Validation dataset (default: split off --data)");
  train->add_option("--val-fraction", val_fraction, "Fraction held out when --val-data is absent (0 disables)");
  train->add_option("--hyper", hyper_args, "Hyperparameter override name=value (repeatable)");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--epochs", max_epochs, "Maximum epochs for mlp and cnn3");
  train->add_option("--out", model_out, "Model file")->required();
  train->callback([&] {
    action = [&] {
      const Variant v = parse_variant(variant);
      TrainOptions o;
      if (train_seed) o.seed = *train_seed;
      if (max_epochs) o.max_epochs = *max_epochs;
      if (v == Variant::kMfp) {
        ClassifierModel::from_replicas(ReplicaBank::from_fields(lowfreq_fields(EnvironmentSet::training(), {})))
            .save(model_out);
        note("wrote replica-bank model to " + model_out);
        return 0;
      }
      Hyper h;
      for (const auto& kv : hyper_args) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--hyper expects name=value, got '" + kv + "'");
        try {
          h[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
          throw ConfigError("--hyper value is not a number: '" + kv + "'");
        }
      }
      LabeledDataset data = load_dataset(data_file(train_data));
      LabeledDataset val;
      if (!val_data.empty()) {
        val = load_dataset(data_file(val_data), data.kind);
      } else if (val_fraction > 0) {
        auto parts = split(data, val_fraction, o.seed);
        data = std::move(parts.first);
        val = std::move(parts.second);
      }
      const FitResult r = fit(v, data, val, h, o);
      r.model.save(model_out);
      std::cout << "trained " << variant << " on " << data.size() << " samples";
      if (!r.loss_history.empty()) std::cout << ", final loss " << r.loss_history.back();
      if (val.size() > 0) {
        const ConfusionMatrix m = confusion(val.labels, r.model.predict(val));
        std::cout << ", validation accuracy " << m.accuracy();
      }
      std::cout << '\n';
      return 0;
    };
  });

  // predict
  std::string model_path, predict_data, predict_out;
  auto* predict = app.add_subcommand("predict", "Classify a dataset with a trained model");
  predict->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", predict_data, "Dataset directory or file")->required();
  predict->add_option("--out", predict_out, "Write per-sample predictions as CSV");
  predict->callback([&] {
    action = [&] {
      const ClassifierModel m = ClassifierModel::load(model_path);
      const LabeledDataset d = load_dataset(data_file(predict_data), m.kind());
      const auto pred = m.predict(d);
      if (!predict_out.empty()) {
        write_to(predict_out, [&](std::ostream& os) {
          os << "index,label,predicted\n";
          for (std::size_t i = 0; i < pred.size(); ++i) {
            os << i << ',' << to_string(static_cast<SedimentClass>(d.labels[i])) << ',' << to_string(pred[i]) << '\n';
          }
        });
      }
      const ConfusionMatrix c = confusion(d.labels, pred);
      std::cout << "accuracy " << c.accuracy() << " (" << c.correct() << "/" << c.total() << ")\n";
      print_confusion(c);
      return 0;
    };
  });

  // bench run | sweep
  auto* bench = app.add_subcommand("bench", "Run the experimental protocol")->require_subcommand(1);
  BenchArgs bargs;
  std::string snr_list;
  auto add_bench_options = [&](CLI::App* sub) {
    sub->add_option("--config", bargs.config, "Experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", bargs.seed, "Override the master seed");
    sub->add_option("--workers", bargs.workers, "Override the worker count");
    sub->add_option("--out", bargs.out, "Override the output directory");
    sub->add_option("--cache", bargs.cache, "Cache directory (default $SEABED_CACHE_DIR)");
    sub->add_flag("--no-svg", bargs.no_svg, "Skip the SVG plots");
  };
  auto* brun = bench->add_subcommand("run", "Train and evaluate every configured classifier");
  add_bench_options(brun);
  brun->callback([&] { action = [&] { return run_bench(bargs, std::nullopt); }; });
  auto* bsweep = bench->add_subcommand("sweep", "Evaluate over a list of test SNRs");
  add_bench_options(bsweep);
  bsweep->add_option("--snr", snr_list, "Comma-separated SNRs in dB, 'clean' for noise-free")
      ->default_val("0,3,6,9,12,15,18,21");
  bsweep->callback([&] { action = [&] { return run_bench(bargs, parse_snr_list(snr_list)); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return action ? action() : kExitConfig;
  } catch (const ConfigError& e) {
    note(std::string("configuration error: ") + e.what());
    return kExitConfig;
  } catch (const ParameterError& e) {
    note(std::string("invalid input: ") + e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    note(std::string("invalid file: ") + e.what());
    return kExitConfig;
  } catch (const CatalogError& e) {
    note(std::string("catalog error: ") + e.what());
    return kExitConfig;
  } catch (const GenerationError& e) {
    note(std::string("generation error: ") + e.what());
    return kExitGeneration;
  } catch (const SolverError& e) {
    note(std::string("solver error: ") + e.what());
    return kExitGeneration;
  } catch (const SamplingError& e) {
    note(std::string("sampling error: ") + e.what());
    return kExitGeneration;
  } catch (const TrainingError& e) {
    note(std::string("training error: ") + e.what());
    return kExitTraining;
  } catch (const std::exception& e) {
    note(std::string("error: ") + e.what());
    return kExitOther;
  }
}
