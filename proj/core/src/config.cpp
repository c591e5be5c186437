#include "seabed/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "seabed/error.hpp"

namespace seabed {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const IniEntry& e, std::string_view text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("expected a number, got '" + t + "'", e.line, e.key);
  }
  if (!std::isfinite(v)) throw ConfigError("value must be finite", e.line, e.key);
  return v;
}

double parse_double(const IniEntry& e) { return parse_double(e, e.value); }

long long parse_int(const IniEntry& e) {
  const std::string t = trim(e.value);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("expected an integer, got '" + t + "'", e.line, e.key);
  }
  return v;
}

bool parse_bool(const IniEntry& e) {
  std::string t = trim(e.value);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("expected a boolean, got '" + t + "'", e.line, e.key);
}

Snr parse_snr(const IniEntry& e, std::string_view text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "none" || t == "inf") return std::nullopt;
  return parse_double(e, t);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += fmt(items[i]);
  }
  return out;
}

// Runs `handler` for each entry and rejects unknown keys.
template <typename Handler>
void visit(const IniSection& section, const std::set<std::string>& allowed, Handler&& handler) {
  std::set<std::string> seen;
  for (const IniEntry& e : section.entries) {
    if (!allowed.count(e.key)) {
      throw ConfigError("unknown key in [" + section.name + "]", e.line, e.key);
    }
    if (!seen.insert(e.key).second) throw ConfigError("duplicate key", e.line, e.key);
    try {
      handler(e);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      throw ConfigError(err.what(), e.line, e.key);
    }
  }
}

void parse_experiment(const IniSection& s, ExperimentConfig& c) {
  static const std::set<std::string> keys = {
      "pipeline", "train_set", "test_sets", "train_samples_per_class",
      "test_samples_per_class", "samples_per_class", "train_snr_db", "test_snr_db", "snr_db",
      "noise_realizations", "master_seed", "classifiers", "output_dir", "workers",
      "validation_fraction", "search_budget", "cv_folds"};
  visit(s, keys, [&](const IniEntry& e) {
    if (e.key == "pipeline") {
      c.pipeline = parse_pipeline(trim(e.value));
    } else if (e.key == "train_set") {
      c.train_set = parse_environment_set(trim(e.value));
    } else if (e.key == "test_sets") {
      c.test_sets.clear();
      for (const auto& item : split_list(e.value)) c.test_sets.push_back(parse_environment_set(item));
    } else if (e.key == "train_samples_per_class") {
      c.train_samples_per_class = static_cast<int>(parse_int(e));
    } else if (e.key == "test_samples_per_class") {
      c.test_samples_per_class = static_cast<int>(parse_int(e));
    } else if (e.key == "samples_per_class") {
      c.train_samples_per_class = c.test_samples_per_class = static_cast<int>(parse_int(e));
    } else if (e.key == "train_snr_db") {
      c.train_snr_db = parse_snr(e, e.value);
    } else if (e.key == "test_snr_db" || e.key == "snr_db") {
      c.test_snr_db.clear();
      for (const auto& item : split_list(e.value)) c.test_snr_db.push_back(parse_snr(e, item));
      if (e.key == "snr_db" && !c.test_snr_db.empty()) c.train_snr_db = c.test_snr_db.front();
    } else if (e.key == "noise_realizations") {
      c.noise_realizations = static_cast<int>(parse_int(e));
    } else if (e.key == "master_seed") {
      const long long v = parse_int(e);
      if (v < 0) throw ConfigError("seed must be non-negative", e.line, e.key);
      c.master_seed = static_cast<std::uint64_t>(v);
    } else if (e.key == "classifiers") {
      c.classifiers.clear();
      for (const auto& item : split_list(e.value)) c.classifiers.push_back({item, {}});
    } else if (e.key == "output_dir") {
      c.output_dir = trim(e.value);
    } else if (e.key == "workers") {
      c.workers = static_cast<int>(parse_int(e));
    } else if (e.key == "validation_fraction") {
      c.validation_fraction = parse_double(e);
    } else if (e.key == "search_budget") {
      c.search_budget = static_cast<int>(parse_int(e));
    } else if (e.key == "cv_folds") {
      c.cv_folds = static_cast<int>(parse_int(e));
    }
  });
}

void parse_train(const IniSection& s, TrainOptions& t) {
  static const std::set<std::string> keys = {"optimizer",    "minibatch",     "learning_rate",
                                             "drop_factor",  "drop_period",   "gradient_clip",
                                             "weight_decay", "max_epochs",    "patience"};
  visit(s, keys, [&](const IniEntry& e) {
    if (e.key == "optimizer") t.optimizer = parse_optimizer(trim(e.value));
    else if (e.key == "minibatch") t.minibatch = static_cast<int>(parse_int(e));
    else if (e.key == "learning_rate") t.learning_rate = parse_double(e);
    else if (e.key == "drop_factor") t.drop_factor = parse_double(e);
    else if (e.key == "drop_period") t.drop_period = static_cast<int>(parse_int(e));
    else if (e.key == "gradient_clip") t.gradient_clip = parse_double(e);
    else if (e.key == "weight_decay") t.weight_decay = parse_double(e);
    else if (e.key == "max_epochs") t.max_epochs = static_cast<int>(parse_int(e));
    else if (e.key == "patience") t.patience = static_cast<int>(parse_int(e));
  });
}

std::vector<SspPoint> parse_ssp(const IniEntry& e) {
  std::vector<SspPoint> out;
  for (const auto& item : split_list(e.value)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("ssp entries must be depth:speed", e.line, e.key);
    }
    out.push_back({parse_double(e, item.substr(0, colon)), parse_double(e, item.substr(colon + 1))});
  }
  return out;
}

void parse_lowfreq(const IniSection& s, LowFreqSettings& l) {
  static const std::set<std::string> keys = {"halfspace_extension", "points_per_wavelength", "ssp",
                                             "halfspace_speed", "halfspace_density",
                                             "halfspace_attenuation"};
  visit(s, keys, [&](const IniEntry& e) {
    if (e.key == "halfspace_extension") l.halfspace_extension = parse_double(e);
    else if (e.key == "points_per_wavelength") l.points_per_wavelength = parse_double(e);
    else if (e.key == "ssp") l.ssp = parse_ssp(e);
    else if (e.key == "halfspace_speed") l.halfspace.sound_speed = parse_double(e);
    else if (e.key == "halfspace_density") l.halfspace.density = parse_double(e);
    else if (e.key == "halfspace_attenuation") l.halfspace.attenuation = parse_double(e);
  });
}

void parse_backscatter(const IniSection& s, BackscatterSettings& b) {
  static const std::set<std::string> keys = {
      "n_points",      "z0",          "radius_wavelengths",       "nodes_per_wavelength",
      "pml_wavelengths", "surface_points", "corrected_gravel_density", "max_redraws"};
  visit(s, keys, [&](const IniEntry& e) {
    if (e.key == "n_points") b.n_points = static_cast<int>(parse_int(e));
    else if (e.key == "z0") b.z0 = parse_double(e);
    else if (e.key == "radius_wavelengths") b.radius_wavelengths = parse_double(e);
    else if (e.key == "nodes_per_wavelength") b.nodes_per_wavelength = parse_double(e);
    else if (e.key == "pml_wavelengths") b.pml_wavelengths = parse_double(e);
    else if (e.key == "surface_points") b.surface_points = static_cast<int>(parse_int(e));
    else if (e.key == "corrected_gravel_density") b.corrected_gravel_density = parse_bool(e);
    else if (e.key == "max_redraws") b.max_redraws = static_cast<int>(parse_int(e));
  });
}

void parse_classifier_section(const IniSection& s, ExperimentConfig& c) {
  const std::string variant = s.name.substr(std::string("classifier.").size());
  auto it = std::find_if(c.classifiers.begin(), c.classifiers.end(),
                         [&](const ClassifierSpec& spec) { return spec.variant == variant; });
  if (it == c.classifiers.end()) {
    throw ConfigError("section for classifier '" + variant + "' not listed in classifiers", s.line);
  }
  std::set<std::string> seen;
  for (const IniEntry& e : s.entries) {
    if (!seen.insert(e.key).second) throw ConfigError("duplicate key", e.line, e.key);
    std::vector<double> values;
    for (const auto& item : split_list(e.value)) values.push_back(parse_double(e, item));
    if (values.empty()) throw ConfigError("empty hyperparameter range", e.line, e.key);
    it->grid[e.key] = std::move(values);
  }
}

}  // namespace

const IniEntry* IniSection::find(std::string_view key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

const IniSection* IniDocument::find(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

IniDocument parse_ini(std::istream& is) {
  IniDocument doc;
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError("empty section name", line_no);
      if (doc.find(name)) throw ConfigError("duplicate section [" + name + "]", line_no);
      doc.sections.push_back({std::move(name), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    if (doc.sections.empty()) throw ConfigError("entry outside of any [section]", line_no);
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", line_no);
    doc.sections.back().entries.push_back({std::move(key), trim(std::string_view(line).substr(eq + 1)), line_no});
  }
  return doc;
}

std::string format_snr(const Snr& snr) { return snr ? format_double(*snr) : "none"; }

std::string_view to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return Optimizer::kAdam;
  if (name == "sgd") return Optimizer::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

double TrainOptions::learning_rate_at(int epoch) const {
  return learning_rate * std::pow(drop_factor, epoch / drop_period);
}

void TrainOptions::validate() const {
  if (minibatch <= 0 || !(learning_rate > 0) || drop_period <= 0 || !(gradient_clip > 0) ||
      !(weight_decay >= 0) || max_epochs <= 0 || patience <= 0) {
    throw ParameterError("train options must be positive");
  }
  if (!(drop_factor > 0 && drop_factor < 1)) throw ParameterError("drop factor must lie in (0, 1)");
}

void ExperimentConfig::validate() const {
  if (train_samples_per_class <= 0 || test_samples_per_class <= 0) {
    throw ConfigError("sample counts must be positive");
  }
  if (noise_realizations <= 0) throw ConfigError("noise realizations must be positive");
  if (workers <= 0) throw ConfigError("workers must be positive");
  if (search_budget <= 0) throw ConfigError("search budget must be positive");
  if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  const int max_id = num_test_sets(pipeline);
  if (train_set.id < 0 || train_set.id > max_id) {
    throw ConfigError("train set " + train_set.name() + " not in the " +
                      std::string(to_string(pipeline)) + " catalog");
  }
  for (const auto& s : test_sets) {
    if (s.id < 0 || s.id > max_id) {
      throw ConfigError("test set " + s.name() + " not in the " + std::string(to_string(pipeline)) +
                        " catalog");
    }
  }
  auto finite = [](const Snr& s) { return !s || std::isfinite(*s); };
  if (!finite(train_snr_db) || !std::all_of(test_snr_db.begin(), test_snr_db.end(), finite)) {
    throw ConfigError("SNR values must be finite");
  }
  static const std::set<std::string> variants = {"mfp", "nc",  "knn", "lr",
                                                 "svm-linear", "svm-rbf", "mlp", "cnn3"};
  for (const auto& spec : classifiers) {
    if (!variants.count(spec.variant)) throw ConfigError("unknown classifier '" + spec.variant + "'");
    if (spec.variant == "mfp" && pipeline != Pipeline::kLowFreq) {
      throw ConfigError("mfp needs the lowfreq pipeline");
    }
  }
  train.validate();
  if (!(lowfreq.halfspace_extension > 0) || !(lowfreq.points_per_wavelength >= 10)) {
    throw ConfigError("lowfreq discretization out of range");
  }
  if (backscatter.n_points <= 0 || !(backscatter.z0 > 0) || !(backscatter.radius_wavelengths > 0) ||
      !(backscatter.nodes_per_wavelength >= 4) || !(backscatter.pml_wavelengths > 0) ||
      backscatter.surface_points < 64 || backscatter.max_redraws < 0) {
    throw ConfigError("backscatter settings out of range");
  }
}

ExperimentConfig parse_config(std::istream& is) {
  const IniDocument doc = parse_ini(is);
  ExperimentConfig c;
  const IniSection* exp = doc.find("experiment");
  if (!exp) throw ConfigError("missing [experiment] section");
  parse_experiment(*exp, c);
  for (const IniSection& s : doc.sections) {
    if (s.name == "experiment") continue;
    if (s.name == "train") parse_train(s, c.train);
    else if (s.name == "lowfreq") parse_lowfreq(s, c.lowfreq);
    else if (s.name == "backscatter") parse_backscatter(s, c.backscatter);
    else if (s.name.starts_with("classifier.")) parse_classifier_section(s, c);
    else throw ConfigError("unknown section [" + s.name + "]", s.line);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& os, const ExperimentConfig& c) {
  auto set_name = [](const EnvironmentSet& s) { return s.name(); };
  os << "[experiment]\n";
  os << "pipeline = " << to_string(c.pipeline) << '\n';
  os << "train_set = " << c.train_set.name() << '\n';
  os << "test_sets = " << join(c.test_sets, set_name) << '\n';
  os << "train_samples_per_class = " << c.train_samples_per_class << '\n';
  os << "test_samples_per_class = " << c.test_samples_per_class << '\n';
  os << "train_snr_db = " << format_snr(c.train_snr_db) << '\n';
  os << "test_snr_db = " << join(c.test_snr_db, format_snr) << '\n';
  os << "noise_realizations = " << c.noise_realizations << '\n';
  os << "master_seed = " << c.master_seed << '\n';
  os << "classifiers = " << join(c.classifiers, [](const ClassifierSpec& s) { return s.variant; })
     << '\n';
  os << "output_dir = " << c.output_dir << '\n';
  os << "workers = " << c.workers << '\n';
  os << "validation_fraction = " << format_double(c.validation_fraction) << '\n';
  os << "search_budget = " << c.search_budget << '\n';
  os << "cv_folds = " << c.cv_folds << '\n';

  const TrainOptions& t = c.train;
  os << "\n[train]\n";
  os << "optimizer = " << to_string(t.optimizer) << '\n';
  os << "minibatch = " << t.minibatch << '\n';
  os << "learning_rate = " << format_double(t.learning_rate) << '\n';
  os << "drop_factor = " << format_double(t.drop_factor) << '\n';
  os << "drop_period = " << t.drop_period << '\n';
  os << "gradient_clip = " << format_double(t.gradient_clip) << '\n';
  os << "weight_decay = " << format_double(t.weight_decay) << '\n';
  os << "max_epochs = " << t.max_epochs << '\n';
  os << "patience = " << t.patience << '\n';

  const LowFreqSettings& l = c.lowfreq;
  os << "\n[lowfreq]\n";
  os << "halfspace_extension = " << format_double(l.halfspace_extension) << '\n';
  os << "points_per_wavelength = " << format_double(l.points_per_wavelength) << '\n';
  os << "ssp = "
     << join(l.ssp, [](const SspPoint& p) { return format_double(p.depth) + ":" + format_double(p.speed); })
     << '\n';
  os << "halfspace_speed = " << format_double(l.halfspace.sound_speed) << '\n';
  os << "halfspace_density = " << format_double(l.halfspace.density) << '\n';
  os << "halfspace_attenuation = " << format_double(l.halfspace.attenuation) << '\n';

  const BackscatterSettings& b = c.backscatter;
  os << "\n[backscatter]\n";
  os << "n_points = " << b.n_points << '\n';
  os << "z0 = " << format_double(b.z0) << '\n';
  os << "radius_wavelengths = " << format_double(b.radius_wavelengths) << '\n';
  os << "nodes_per_wavelength = " << format_double(b.nodes_per_wavelength) << '\n';
  os << "pml_wavelengths = " << format_double(b.pml_wavelengths) << '\n';
  os << "surface_points = " << b.surface_points << '\n';
  os << "corrected_gravel_density = " << (b.corrected_gravel_density ? "true" : "false") << '\n';
  os << "max_redraws = " << b.max_redraws << '\n';

  for (const auto& spec : c.classifiers) {
    if (spec.grid.empty()) continue;
    os << "\n[classifier." << spec.variant << "]\n";
    for (const auto& [key, values] : spec.grid) {
      os << key << " = " << join(values, format_double) << '\n';
    }
  }
}

TemplateFile parse_template(std::istream& is) {
  const IniDocument doc = parse_ini(is);
  TemplateFile out;
  const IniSection* t = doc.find("template");
  if (!t) throw ConfigError("missing [template] section");

  // Catalog lookup first so that explicit keys override it.
  const IniEntry* cls = t->find("class");
  if (cls) {
    const IniEntry* set_entry = t->find("set");
    const EnvironmentSet set = set_entry ? parse_environment_set(set_entry->value)
                                         : EnvironmentSet::training();
    const IniEntry* tau = t->find("thickness");
    try {
      const BackscatterEnvironment env =
          backscatter_environment(set, parse_sediment_class(cls->value));
      out.scene = env.make_template(tau ? parse_double(*tau) : env.thickness_choices.front(), 0);
    } catch (const CatalogError& e) {
      throw ConfigError(e.what(), cls->line, cls->key);
    }
  }

  HighFreqTemplate& s = out.scene;
  static const std::set<std::string> keys = {
      "class",       "set",      "width",      "height",      "water_height", "frequency",
      "incident_angle", "c_water", "rho_water", "c_top",      "rho_top",      "thickness",
      "c_bottom",    "rho_bottom", "attenuation", "rms_height", "corr_length",  "seed"};
  visit(*t, keys, [&](const IniEntry& e) {
    if (e.key == "class" || e.key == "set") return;
    if (e.key == "seed") {
      const long long v = parse_int(e);
      if (v < 0) throw ConfigError("seed must be non-negative", e.line, e.key);
      s.roughness.seed = static_cast<std::uint64_t>(v);
      return;
    }
    const double v = parse_double(e);
    if (e.key == "width") s.width = v;
    else if (e.key == "height") s.height = v;
    else if (e.key == "water_height") s.water_height = v;
    else if (e.key == "frequency") s.frequency = v;
    else if (e.key == "incident_angle") s.incident_angle = v;
    else if (e.key == "c_water") s.c_water = v;
    else if (e.key == "rho_water") s.rho_water = v;
    else if (e.key == "c_top") s.c_top = v;
    else if (e.key == "rho_top") s.rho_top = v;
    else if (e.key == "thickness") s.thickness = v;
    else if (e.key == "c_bottom") s.c_bottom = v;
    else if (e.key == "rho_bottom") s.rho_bottom = v;
    else if (e.key == "attenuation") s.attenuation_db_per_m_per_khz = v;
    else if (e.key == "rms_height") s.roughness.rms_height = v;
    else if (e.key == "corr_length") s.roughness.corr_length = v;
  });

  if (const IniSection* solver = doc.find("solver")) {
    static const std::set<std::string> solver_keys = {"nodes_per_wavelength", "pml_wavelengths",
                                                      "surface_points"};
    visit(*solver, solver_keys, [&](const IniEntry& e) {
      if (e.key == "nodes_per_wavelength") out.solver.nodes_per_wavelength = parse_double(e);
      else if (e.key == "pml_wavelengths") out.solver.pml_wavelengths = parse_double(e);
      else if (e.key == "surface_points") out.solver.surface_points = static_cast<int>(parse_int(e));
    });
  }
  for (const IniSection& sec : doc.sections) {
    if (sec.name != "template" && sec.name != "solver") {
      throw ConfigError("unknown section [" + sec.name + "]", sec.line);
    }
  }
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

TemplateFile load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open template file " + path.string());
  return parse_template(in);
}

}  // namespace seabed
