#include "seabed/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "seabed/dataset.hpp"
#include "seabed/error.hpp"
#include "seabed/seed.hpp"

namespace seabed {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainTag = 0x747261696eULL;
constexpr std::uint64_t kTestTag = 0x74657374ULL;
constexpr std::uint64_t kSplitTag = 0x73706c6974ULL;
constexpr std::uint64_t kModelTag = 0x6d6f64656cULL;
constexpr std::uint64_t kSearchTag = 0x736561726368ULL;
constexpr std::string_view kCacheVersion = "seabed-cache-v1";
constexpr std::array<std::string_view, 4> kClassNames = {"clay", "silt", "sand", "gravel"};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string snr_key(const Snr& s) { return s ? num(*s) : "none"; }

// Keeps the exception type and prefixes the stage.
template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  auto msg = [&](const std::exception& e) { return stage + ": " + e.what(); };
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(msg(e));
  } catch (const CatalogError& e) {
    throw CatalogError(msg(e));
  } catch (const GenerationError& e) {
    throw GenerationError(msg(e));
  } catch (const SolverError& e) {
    throw SolverError(msg(e));
  } catch (const SamplingError& e) {
    throw SamplingError(msg(e));
  } catch (const DivergenceError& e) {
    throw DivergenceError(msg(e), e.history());
  } catch (const TrainingError& e) {
    throw TrainingError(msg(e));
  } catch (const FormatError& e) {
    throw FormatError(msg(e));
  } catch (const ParameterError& e) {
    throw ParameterError(msg(e));
  } catch (const Error& e) {
    throw Error(msg(e));
  }
}

std::string settings_key(const ExperimentConfig& c) {
  std::ostringstream os;
  if (c.pipeline == Pipeline::kLowFreq) {
    const LowFreqSettings& s = c.lowfreq;
    os << "lowfreq|" << num(s.halfspace_extension) << '|' << num(s.points_per_wavelength);
    for (const auto& p : s.ssp) os << '|' << num(p.depth) << ':' << num(p.speed);
    os << '|' << num(s.halfspace.sound_speed) << ':' << num(s.halfspace.attenuation) << ':'
       << num(s.halfspace.density);
  } else {
    const BackscatterSettings& s = c.backscatter;
    os << "backscatter|" << s.n_points << '|' << num(s.z0) << '|' << num(s.radius_wavelengths) << '|'
       << num(s.nodes_per_wavelength) << '|' << num(s.pml_wavelengths) << '|' << s.surface_points << '|'
       << s.corrected_gravel_density << '|' << s.max_redraws;
  }
  return os.str();
}

std::string dataset_key(const ExperimentConfig& c, EnvironmentSet set, int count, const Snr& snr,
                        std::uint64_t seed) {
  return std::string(kCacheVersion) + "|data|" + settings_key(c) + "|set=" + std::to_string(set.id) +
         "|n=" + std::to_string(count) + "|snr=" + snr_key(snr) + "|seed=" + std::to_string(seed);
}

LabeledDataset generate(const ExperimentConfig& c, EnvironmentSet set, int count, const Snr& snr,
                        std::uint64_t seed) {
  if (c.pipeline == Pipeline::kLowFreq) return generate_lowfreq_dataset(set, count, snr, seed, c.lowfreq);
  return generate_backscatter_dataset(set, count, snr, seed, c.backscatter, c.workers);
}

void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& write) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + hex(fnv1a(path.string()) ^ static_cast<std::uint64_t>(
                                                     std::chrono::steady_clock::now().time_since_epoch().count()));
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write " + tmp.string());
    write(os);
    if (!os) throw FormatError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

LabeledDataset cached_dataset(const RunOptions& opt, const ExperimentConfig& c, EnvironmentSet set, int count,
                              const Snr& snr, std::uint64_t seed) {
  if (!opt.cache_dir) return generate(c, set, count, snr, seed);
  const fs::path file = *opt.cache_dir / ("data-" + hex(fnv1a(dataset_key(c, set, count, snr, seed))) + ".sbd");
  if (fs::exists(file)) {
    try {
      return load_dataset(file);
    } catch (const FormatError&) {
      // corrupt cache entry: regenerate below
    }
  }
  LabeledDataset d = generate(c, set, count, snr, seed);
  atomic_write(file, [&](std::ostream& os) { write_dataset(os, d); });
  return d;
}

json snr_json(const Snr& s) { return s ? json(*s) : json(nullptr); }

Snr snr_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json confusion_json(const ConfusionMatrix& m) {
  json rows = json::array();
  for (const auto& r : m.counts) rows.push_back(json(r));
  return rows;
}

ConfusionMatrix confusion_from(const json& j) {
  ConfusionMatrix m;
  if (!j.is_array() || j.size() != 4) throw FormatError("confusion matrix must have 4 rows");
  for (std::size_t r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw FormatError("confusion matrix must have 4 columns");
    for (std::size_t c = 0; c < 4; ++c) {
      const auto v = j[r][c].get<std::int64_t>();
      if (v < 0) throw FormatError("negative confusion count");
      m.counts[r][c] = v;
    }
  }
  return m;
}

bool snr_less(const Snr& a, const Snr& b) {
  if (!a) return false;
  if (!b) return true;
  return *a < *b;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string snr_label(const Snr& s) {
  if (!s) return "clean";
  std::ostringstream os;
  os << *s;
  return os.str();
}

std::string accuracy_svg(const std::vector<SweepRow>& rows) {
  std::vector<Snr> snrs;
  std::vector<std::string> variants;
  for (const auto& r : rows) {
    if (std::find(snrs.begin(), snrs.end(), r.snr_db) == snrs.end()) snrs.push_back(r.snr_db);
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  }
  std::sort(snrs.begin(), snrs.end(), snr_less);
  const double W = 640, H = 400, left = 60, right = 150, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto xpos = [&](std::size_t i) { return left + (snrs.size() > 1 ? pw * i / (snrs.size() - 1) : pw / 2); };
  auto ypos = [&](double a) { return top + ph * (1.0 - a); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    os << "<line x1=\"" << left << "\" y1=\"" << ypos(a) << "\" x2=\"" << left + pw << "\" y2=\"" << ypos(a)
       << "\" stroke=\"#dddddd\"" << (a == 0.25 ? " stroke-dasharray=\"4 3\"" : "") << "/>\n"
       << "<text x=\"" << left - 8 << "\" y=\"" << ypos(a) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << a
       << "</text>\n";
  }
  for (std::size_t i = 0; i < snrs.size(); ++i) {
    os << "<text x=\"" << xpos(i) << "\" y=\"" << top + ph + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
       << xml_escape(snr_label(snrs[i])) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">"
     << "SNR (dB)</text>\n"
     << "<text x=\"15\" y=\"" << top + ph / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << top + ph / 2 << ")\">accuracy</text>\n";
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const char* colour = palette[v % 8];
    std::ostringstream pts;
    pts << std::fixed << std::setprecision(2);
    for (std::size_t i = 0; i < snrs.size(); ++i) {
      for (const auto& r : rows) {
        if (r.variant == variants[v] && r.snr_db == snrs[i]) pts << xpos(i) << ',' << ypos(r.accuracy) << ' ';
      }
    }
    std::string p = pts.str();
    if (!p.empty()) p.pop_back();
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"" << p << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(v);
    os << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 35 << "\" y2=\"" << ly
       << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - right + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << xml_escape(variants[v])
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string confusion_svg(const std::string& title, const ConfusionMatrix& m) {
  const auto rates = m.rates();
  const double cell = 70, left = 80, top = 50;
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  const double W = left + 4 * cell + 20, H = top + 4 * cell + 40;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">" << xml_escape(title)
     << "</text>\n";
  for (int c = 0; c < 4; ++c) {
    os << "<text x=\"" << left + cell * (c + 0.5) << "\" y=\"" << top - 8
       << "\" font-size=\"11\" text-anchor=\"middle\">" << kClassNames[c] << "</text>\n"
       << "<text x=\"" << left - 8 << "\" y=\"" << top + cell * (c + 0.5) + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << kClassNames[c] << "</text>\n";
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - rates[r][c])));
      os << "<rect x=\"" << left + cell * c << "\" y=\"" << top + cell * r << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\" stroke=\"#888888\"/>\n"
         << "<text x=\"" << left + cell * (c + 0.5) << "\" y=\"" << top + cell * (r + 0.5) + 4
         << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"" << (rates[r][c] > 0.6 ? "white" : "black") << "\">"
         << m.counts[r][c] << "</text>\n";
    }
  }
  os << "<text x=\"" << left + 2 * cell << "\" y=\"" << H - 10
     << "\" font-size=\"11\" text-anchor=\"middle\">predicted (rows: true class)</text>\n"
     << "</svg>\n";
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
  if (!os) throw FormatError("write failed: " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& r : counts) {
    for (auto v : r) n += v;
  }
  return n;
}

std::int64_t ConfusionMatrix::correct() const {
  std::int64_t n = 0;
  for (int i = 0; i < 4; ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n > 0 ? static_cast<double>(correct()) / static_cast<double>(n) : 0.0;
}

std::array<std::int64_t, 4> ConfusionMatrix::row_sums() const {
  std::array<std::int64_t, 4> s{};
  for (int r = 0; r < 4; ++r) {
    for (auto v : counts[r]) s[r] += v;
  }
  return s;
}

std::array<std::array<double, 4>, 4> ConfusionMatrix::rates() const {
  std::array<std::array<double, 4>, 4> out{};
  const auto sums = row_sums();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out[r][c] = sums[r] > 0 ? static_cast<double>(counts[r][c]) / static_cast<double>(sums[r]) : 0.0;
    }
  }
  return out;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) counts[r][c] += other.counts[r][c];
  }
  return *this;
}

ConfusionMatrix confusion(const std::vector<std::uint8_t>& truth, const std::vector<SedimentClass>& predicted) {
  if (truth.size() != predicted.size()) throw ParameterError("confusion: label and prediction counts differ");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (truth[i] > 3 || p > 3) throw ParameterError("confusion: class code out of range");
    ++m.counts[truth[i]][p];
  }
  return m;
}

std::optional<fs::path> default_cache_dir() {
  const char* env = std::getenv("SEABED_CACHE_DIR");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return fs::path(env);
}

std::vector<SweepRow> sweep_table(const std::vector<ClassifierResult>& classifiers) {
  std::vector<SweepRow> rows;
  for (const auto& cr : classifiers) {
    std::vector<Snr> snrs;
    for (const auto& cell : cr.cells) {
      if (std::find(snrs.begin(), snrs.end(), cell.snr_db) == snrs.end()) snrs.push_back(cell.snr_db);
    }
    std::sort(snrs.begin(), snrs.end(), snr_less);
    const SweepRow* prev = nullptr;
    for (const Snr& s : snrs) {
      SweepRow row;
      row.variant = cr.variant;
      row.snr_db = s;
      int n = 0;
      for (const auto& cell : cr.cells) {
        if (cell.snr_db != s) continue;
        row.accuracy += cell.accuracy;
        row.evaluated += cell.confusion.total();
        ++n;
      }
      row.accuracy /= n;
      if (prev != nullptr && s) {
        const double p = prev->accuracy;
        const double n = static_cast<double>(std::max<std::int64_t>(prev->evaluated, 1));
        const double se = std::sqrt(std::max(p * (1 - p), 1.0 / n) / n);
        row.trend_violation = row.accuracy < p - 2 * se;
      }
      rows.push_back(row);
      prev = &rows.back();
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

Report run_experiment(const ExperimentConfig& config, const RunOptions& opt) {
  config.validate();
  auto log = [&](const std::string& s) {
    if (opt.log) opt.log(s);
  };

  ExperimentConfig echo = config;
  echo.workers = ExperimentConfig{}.workers;
  echo.output_dir = ExperimentConfig{}.output_dir;
  std::ostringstream config_text;
  write_config(config_text, echo);

  Report report;
  report.config = config_text.str();
  report.pipeline = config.pipeline;
  report.master_seed = config.master_seed;
  report.train_set = config.train_set.name();
  for (const auto& s : config.test_sets) report.test_sets.push_back(s.name());

  const std::uint64_t master = config.master_seed;
  try {
    const std::uint64_t train_seed = derive_seed({master, kTrainTag});
    log("generating training data (" + config.train_set.name() + ")");
    const LabeledDataset all = staged("training data", [&] {
      return cached_dataset(opt, config, config.train_set, config.train_samples_per_class, config.train_snr_db,
                            train_seed);
    });
    const auto parts = staged("training data", [&] {
      return split(all, config.validation_fraction, derive_seed({master, kSplitTag}));
    });
    const LabeledDataset& train = parts.first;
    const LabeledDataset& val = parts.second;
    report.train_samples = train.size();
    report.validation_samples = val.size();

    // Classifiers train concurrently; a search runs its folds in parallel
    // only when there are fewer classifiers than workers.
    const std::size_t nclf = config.classifiers.size();
    const int outer = static_cast<int>(std::min<std::size_t>(nclf, static_cast<std::size_t>(config.workers)));
    const int inner = nclf >= static_cast<std::size_t>(config.workers) ? 1 : config.workers;
    std::vector<ClassifierResult> results(nclf);
    std::vector<std::optional<ClassifierModel>> models(nclf);
    const std::string data_key = dataset_key(config, config.train_set, config.train_samples_per_class,
                                             config.train_snr_db, train_seed);
    detail::parallel_for(nclf, outer, [&](std::size_t i) {
      const ClassifierSpec& spec = config.classifiers[i];
      staged("classifier " + spec.variant, [&] {
        const Variant v = parse_variant(spec.variant);
        ClassifierResult& r = results[i];
        r.variant = spec.variant;
        const auto start = std::chrono::steady_clock::now();
        if (v == Variant::kMfp) {
          models[i] = ClassifierModel::from_replicas(
              ReplicaBank::from_fields(lowfreq_fields(config.train_set, config.lowfreq)));
        } else {
          TrainOptions o = config.train;
          o.seed = derive_seed({master, kModelTag, fnv1a(spec.variant)});
          std::ostringstream key;
          key << kCacheVersion << "|model|" << data_key << "|split=" << num(config.validation_fraction) << '|'
              << spec.variant << "|budget=" << config.search_budget << "|folds=" << config.cv_folds;
          for (const auto& [k, vals] : spec.grid) {
            key << '|' << k;
            for (double x : vals) key << ':' << num(x);
          }
          key << "|opt=" << to_string(o.optimizer) << ',' << o.minibatch << ',' << num(o.learning_rate) << ','
              << num(o.drop_factor) << ',' << o.drop_period << ',' << num(o.gradient_clip) << ','
              << num(o.weight_decay) << ',' << o.max_epochs << ',' << o.patience << ',' << o.seed;
          const std::string stem = "model-" + hex(fnv1a(key.str()));
          if (opt.cache_dir && fs::exists(*opt.cache_dir / (stem + ".json"))) {
            try {
              std::ifstream meta(*opt.cache_dir / (stem + ".json"));
              const json j = json::parse(meta);
              models[i] = ClassifierModel::load(*opt.cache_dir / (stem + ".sbm"));
              r.hyper = j.at("hyper").get<Hyper>();
              if (!j.at("search_score").is_null()) r.search_score = j.at("search_score").get<double>();
              r.loss_history = j.at("loss_history").get<std::vector<double>>();
              r.validation_history = j.at("validation_history").get<std::vector<double>>();
              r.from_cache = true;
            } catch (const std::exception&) {
              models[i].reset();
            }
          }
          if (!models[i]) {
            log("training " + spec.variant);
            if (!spec.grid.empty()) {
              const SearchResult s = hyper_search(v, train, spec.grid, config.search_budget, config.cv_folds, o,
                                                  derive_seed({master, kSearchTag, fnv1a(spec.variant)}), inner);
              r.hyper = s.best;
              r.search_score = s.best_score;
            }
            FitResult f = fit(v, train, val, r.hyper, o);
            r.loss_history = std::move(f.loss_history);
            r.validation_history = std::move(f.validation_history);
            models[i] = std::move(f.model);
            if (opt.cache_dir) {
              atomic_write(*opt.cache_dir / (stem + ".sbm"), [&](std::ostream& os) { models[i]->write(os); });
              json meta = {{"hyper", r.hyper},
                           {"search_score", r.search_score ? json(*r.search_score) : json(nullptr)},
                           {"loss_history", r.loss_history},
                           {"validation_history", r.validation_history}};
              atomic_write(*opt.cache_dir / (stem + ".json"), [&](std::ostream& os) { os << meta.dump(); });
            }
          }
        }
        r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        r.validation = confusion(val.labels, models[i]->predict(val));
      });
    });
    report.classifiers = results;

    // Test data, noise-free; noise is drawn per realization below.
    std::set<std::pair<int, std::uint64_t>> train_tags;
    for (const auto& p : all.provenance) train_tags.emplace(p.set.id, p.seed);
    std::vector<LabeledDataset> clean;
    for (const auto& set : config.test_sets) {
      log("generating test data (" + set.name() + ")");
      clean.push_back(staged("test data " + set.name(), [&] {
        return cached_dataset(opt, config, set, config.test_samples_per_class, std::nullopt,
                              derive_seed({master, kTestTag, static_cast<std::uint64_t>(set.id)}));
      }));
      for (const auto& p : clean.back().provenance) {
        if (train_tags.count({p.set.id, p.seed})) {
          throw GenerationError("test data " + set.name() + ": sample seed overlaps the training data");
        }
      }
    }

    // Evaluation cells: (test set, SNR) x classifier.
    const std::size_t nsnr = config.test_snr_db.size();
    const std::size_t ncells = config.test_sets.size() * nsnr;
    std::vector<std::vector<LabeledDataset>> noisy(ncells);
    detail::parallel_for(ncells, config.workers, [&](std::size_t c) {
      const Snr& snr = config.test_snr_db[c % nsnr];
      const int draws = snr ? config.noise_realizations : 1;
      for (int r = 0; r < draws; ++r) {
        noisy[c].push_back(staged("test data " + config.test_sets[c / nsnr].name(), [&] {
          return with_noise(clean[c / nsnr], snr, static_cast<std::uint64_t>(r));
        }));
      }
    });
    log("evaluating");
    std::vector<EvaluationCell> cells(nclf * ncells);
    detail::parallel_for(cells.size(), config.workers, [&](std::size_t job) {
      const std::size_t ci = job / std::max<std::size_t>(ncells, 1), c = job % std::max<std::size_t>(ncells, 1);
      staged("evaluation " + config.classifiers[ci].variant, [&] {
        EvaluationCell& cell = cells[job];
        cell.test_set = config.test_sets[c / nsnr].name();
        cell.snr_db = config.test_snr_db[c % nsnr];
        for (const auto& d : noisy[c]) {
          const ConfusionMatrix m = confusion(d.labels, models[ci]->predict(d));
          cell.realization_accuracy.push_back(m.accuracy());
          cell.confusion += m;
        }
        cell.accuracy = cell.confusion.accuracy();
      });
    });
    for (std::size_t ci = 0; ci < nclf; ++ci) {
      report.classifiers[ci].cells.assign(cells.begin() + static_cast<std::ptrdiff_t>(ci * ncells),
                                          cells.begin() + static_cast<std::ptrdiff_t>((ci + 1) * ncells));
    }
    report.sweep = sweep_table(report.classifiers);
  } catch (const std::exception& e) {
    if (opt.partial) {
      *opt.partial = report;
      opt.partial->complete = false;
      opt.partial->error = e.what();
    }
    throw;
  }
  return report;
}

Report snr_sweep(const ExperimentConfig& config, const std::vector<Snr>& snr_list, const RunOptions& options) {
  if (snr_list.empty()) throw ConfigError("SNR list is empty");
  ExperimentConfig c = config;
  c.test_snr_db = snr_list;
  return run_experiment(c, options);
}

// ---------------------------------------------------------------------------

std::string report_json(const Report& r) {
  json classifiers = json::array();
  for (const auto& c : r.classifiers) {
    json cells = json::array();
    for (const auto& cell : c.cells) {
      cells.push_back({{"test_set", cell.test_set},
                       {"snr_db", snr_json(cell.snr_db)},
                       {"realization_accuracy", cell.realization_accuracy},
                       {"confusion", confusion_json(cell.confusion)},
                       {"accuracy", cell.accuracy}});
    }
    classifiers.push_back({{"variant", c.variant},
                           {"hyper", c.hyper},
                           {"search_score", c.search_score ? json(*c.search_score) : json(nullptr)},
                           {"loss_history", c.loss_history},
                           {"validation_history", c.validation_history},
                           {"validation", {{"confusion", confusion_json(c.validation)},
                                           {"accuracy", c.validation.accuracy()}}},
                           {"cells", cells}});
  }
  json sweep = json::array();
  for (const auto& s : r.sweep) {
    sweep.push_back({{"variant", s.variant},
                     {"snr_db", snr_json(s.snr_db)},
                     {"accuracy", s.accuracy},
                     {"evaluated", s.evaluated},
                     {"trend_violation", s.trend_violation}});
  }
  const json j = {{"format", "seabed-report"},
                  {"version", 1},
                  {"complete", r.complete},
                  {"error", r.error},
                  {"pipeline", std::string(to_string(r.pipeline))},
                  {"master_seed", r.master_seed},
                  {"train_set", r.train_set},
                  {"test_sets", r.test_sets},
                  {"train_samples", r.train_samples},
                  {"validation_samples", r.validation_samples},
                  {"config", r.config},
                  {"classifiers", classifiers},
                  {"sweep", sweep}};
  return j.dump(2) + "\n";
}

Report parse_report(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "seabed-report") throw FormatError("not a report");
    if (j.at("version") != 1) throw FormatError("unsupported report version");
    Report r;
    r.complete = j.at("complete").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.train_set = j.at("train_set").get<std::string>();
    r.test_sets = j.at("test_sets").get<std::vector<std::string>>();
    r.train_samples = j.at("train_samples").get<std::size_t>();
    r.validation_samples = j.at("validation_samples").get<std::size_t>();
    r.config = j.at("config").get<std::string>();
    for (const auto& c : j.at("classifiers")) {
      ClassifierResult cr;
      cr.variant = c.at("variant").get<std::string>();
      cr.hyper = c.at("hyper").get<Hyper>();
      if (!c.at("search_score").is_null()) cr.search_score = c.at("search_score").get<double>();
      cr.loss_history = c.at("loss_history").get<std::vector<double>>();
      cr.validation_history = c.at("validation_history").get<std::vector<double>>();
      cr.validation = confusion_from(c.at("validation").at("confusion"));
      for (const auto& cell : c.at("cells")) {
        EvaluationCell e;
        e.test_set = cell.at("test_set").get<std::string>();
        e.snr_db = snr_from(cell.at("snr_db"));
        e.realization_accuracy = cell.at("realization_accuracy").get<std::vector<double>>();
        e.confusion = confusion_from(cell.at("confusion"));
        e.accuracy = e.confusion.accuracy();
        cr.cells.push_back(std::move(e));
      }
      r.classifiers.push_back(std::move(cr));
    }
    r.sweep = sweep_table(r.classifiers);
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  } catch (const CatalogError& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

Report load_report(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_report(ss.str());
}

std::vector<fs::path> emit_report(const Report& report, const fs::path& dir, ReportFormats formats) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  if (formats.json) {
    write_text(dir / "report.json", report_json(report));
    written.push_back(dir / "report.json");
    json timing = json::array();
    for (const auto& c : report.classifiers) {
      timing.push_back({{"variant", c.variant}, {"train_seconds", c.train_seconds}, {"from_cache", c.from_cache}});
    }
    const json t = {{"note", "wall-clock training time, hardware dependent"}, {"classifiers", timing}};
    write_text(dir / "timing.json", t.dump(2) + "\n");
    written.push_back(dir / "timing.json");
  }
  if (formats.csv) {
    for (const auto& c : report.classifiers) {
      std::ostringstream os;
      os << "test_set,snr_db,true_class,clay,silt,sand,gravel\n";
      auto block = [&](const std::string& set, const Snr& snr, const ConfusionMatrix& m) {
        for (int r = 0; r < 4; ++r) {
          os << set << ',' << (snr ? num(*snr) : "") << ',' << kClassNames[r];
          for (int k = 0; k < 4; ++k) os << ',' << m.counts[r][k];
          os << '\n';
        }
      };
      block("validation", std::nullopt, c.validation);
      for (const auto& cell : c.cells) block(cell.test_set, cell.snr_db, cell.confusion);
      const fs::path p = dir / ("confusion_" + c.variant + ".csv");
      write_text(p, os.str());
      written.push_back(p);
    }
    std::ostringstream os;
    os << "variant,snr_db,accuracy,evaluated,trend_violation\n";
    for (const auto& s : report.sweep) {
      os << s.variant << ',' << (s.snr_db ? num(*s.snr_db) : "") << ',' << num(s.accuracy) << ',' << s.evaluated
         << ',' << (s.trend_violation ? 1 : 0) << '\n';
    }
    write_text(dir / "sweep.csv", os.str());
    written.push_back(dir / "sweep.csv");
  }
  if (formats.svg) {
    write_text(dir / "accuracy_vs_snr.svg", accuracy_svg(report.sweep));
    written.push_back(dir / "accuracy_vs_snr.svg");
    for (const auto& c : report.classifiers) {
      ConfusionMatrix pooled;
      for (const auto& cell : c.cells) pooled += cell.confusion;
      if (c.cells.empty()) pooled = c.validation;
      const fs::path p = dir / ("confusion_" + c.variant + ".svg");
      write_text(p, confusion_svg(c.variant + (c.cells.empty() ? " (validation)" : " (all test cells)"), pooled));
      written.push_back(p);
    }
  }
  return written;
}

std::vector<ConfusionRecord> read_confusion_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "test_set,snr_db,true_class,clay,silt,sand,gravel") throw FormatError("unexpected confusion header");
  std::vector<ConfusionRecord> out;
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw FormatError("confusion row must have 7 fields");
    if (f[2] != kClassNames[row]) throw FormatError("confusion rows out of order");
    if (row == 0) {
      ConfusionRecord rec;
      rec.test_set = f[0];
      if (!f[1].empty()) rec.snr_db = std::stod(f[1]);
      out.push_back(rec);
    }
    for (int k = 0; k < 4; ++k) out.back().matrix.counts[row][k] = std::stoll(f[3 + k]);
    row = (row + 1) % 4;
  }
  if (row != 0) throw FormatError("truncated confusion block");
  return out;
}

}  // namespace seabed
