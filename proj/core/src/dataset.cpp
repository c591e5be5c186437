#include "seabed/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "binio.hpp"
#include "parallel.hpp"
#include "seabed/error.hpp"
#include "seabed/helmholtz.hpp"
#include "seabed/modal.hpp"
#include "seabed/nmla.hpp"
#include "seabed/seed.hpp"

namespace seabed {
namespace {

constexpr std::uint64_t kFormatVersion = 1;
constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;  // "noise"

double noise_variance(double signal_power, std::size_t n, double snr_db) {
  return signal_power / std::pow(10.0, snr_db / 10.0) / static_cast<double>(n);
}

void check_noise_spec(const NoiseSpec& spec, FeatureKind kind) {
  if (spec.kind != kind) throw ParameterError("noise kind does not match the signal kind");
  if (spec.snr_db && !std::isfinite(*spec.snr_db)) throw ParameterError("SNR must be finite");
}

std::uint64_t snr_bits(const Snr& snr) {
  return snr ? std::bit_cast<std::uint64_t>(*snr) : ~0ULL;
}

std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string_view to_string(FeatureKind k) {
  return k == FeatureKind::kComplex20 ? "complex20" : "real";
}

std::vector<std::complex<double>> add_noise(const std::vector<std::complex<double>>& signal,
                                            const NoiseSpec& spec) {
  check_noise_spec(spec, FeatureKind::kComplex20);
  if (!spec.snr_db) return signal;
  double power = 0.0;
  for (const auto& v : signal) power += std::norm(v);
  if (!(power > 0)) throw ParameterError("SNR is undefined for a zero signal");
  const double sigma = std::sqrt(0.5 * noise_variance(power, signal.size(), *spec.snr_db));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<std::complex<double>> out(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    out[i] = signal[i] + std::complex<double>(re, im);
  }
  return out;
}

std::vector<double> add_noise(const std::vector<double>& signal, const NoiseSpec& spec) {
  check_noise_spec(spec, FeatureKind::kReal);
  if (!spec.snr_db) return signal;
  double power = 0.0;
  for (double v : signal) power += v * v;
  if (!(power > 0)) throw ParameterError("SNR is undefined for a zero signal");
  const double sigma = std::sqrt(noise_variance(power, signal.size(), *spec.snr_db));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> out(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) out[i] = signal[i] + normal(rng);
  return out;
}

SedimentClass label_by_soundspeed(double c_top) {
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i) {
    if (std::abs(c_top - kClassSoundSpeeds[i]) < std::abs(c_top - kClassSoundSpeeds[best])) best = i;
  }
  return class_from_code(best);
}

// ---------------------------------------------------------------------------

std::vector<std::complex<double>> LabeledDataset::complex_row(std::size_t i) const {
  if (kind != FeatureKind::kComplex20) throw ParameterError("complex_row on a real dataset");
  std::vector<std::complex<double>> out(static_cast<std::size_t>(features.cols() / 2));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * k)),
              features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * k + 1))};
  }
  return out;
}

Eigen::MatrixXd LabeledDataset::learner_features() const {
  if (kind == FeatureKind::kReal) return features;
  const Eigen::Index n = features.rows(), m = features.cols() / 2;
  Eigen::MatrixXd out(n, 2 * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = features.row(i).norm();
    const double s = norm > 0 ? 1.0 / norm : 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      out(i, k) = s * features(i, 2 * k);
      out(i, m + k) = s * features(i, 2 * k + 1);
    }
  }
  return out;
}

std::vector<int> LabeledDataset::class_counts() const {
  std::vector<int> counts(kNumClasses, 0);
  for (auto l : labels) ++counts.at(l);
  return counts;
}

void LabeledDataset::validate() const {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (features.rows() != n || provenance.size() != labels.size()) {
    throw ParameterError("dataset: feature, label and provenance counts differ");
  }
  if (kind == FeatureKind::kComplex20 && features.cols() != 40 && n > 0) {
    throw ParameterError("dataset: complex20 rows must hold 20 complex entries");
  }
  for (auto l : labels) {
    if (l >= kNumClasses) throw ParameterError("dataset: label code out of range");
  }
  if (!features.allFinite()) throw ParameterError("dataset: non-finite feature");
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.kind = kind;
  out.pipeline = pipeline;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(labels.at(indices[r]));
    out.provenance.push_back(provenance.at(indices[r]));
  }
  return out;
}

void LabeledDataset::append(const LabeledDataset& other) {
  if (other.size() == 0) return;
  if (size() == 0) {
    *this = other;
    return;
  }
  if (other.kind != kind || other.features.cols() != features.cols()) {
    throw ParameterError("dataset: cannot append rows of a different kind or width");
  }
  Eigen::MatrixXd f(features.rows() + other.features.rows(), features.cols());
  f << features, other.features;
  features = std::move(f);
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
}

// ---------------------------------------------------------------------------

LowFreqFields lowfreq_fields(EnvironmentSet set, const LowFreqSettings& settings) {
  LowFreqFields out;
  for (SedimentClass c : kAllClasses) {
    LowFreqEnvironment env = lowfreq_environment(set, c);
    env.ssp = settings.ssp;
    env.halfspace = settings.halfspace;
    try {
      env.validate();
      const DepthModel model =
          build_depth_model(env, settings.halfspace_extension, settings.points_per_wavelength);
      const ModeSet modes = solve_modes(model, env.frequency);
      ComplexField field = pressure_field(modes, env);
      if (field.no_modes) throw GenerationError("no trapped modes");
      out.fields.emplace_back(c, std::move(field.values));
    } catch (const Error& e) {
      throw GenerationError("low-frequency field for " + set.name() + "/" +
                            std::string(to_string(c)) + ": " + e.what());
    }
    out.environments.push_back(std::move(env));
  }
  return out;
}

LabeledDataset generate_lowfreq_dataset(EnvironmentSet set, int count_per_class, Snr snr_db,
                                        std::uint64_t master_seed, const LowFreqSettings& settings) {
  if (count_per_class < 1) throw ParameterError("count per class must be positive");
  const LowFreqFields clean = lowfreq_fields(set, settings);
  LabeledDataset d;
  d.kind = FeatureKind::kComplex20;
  d.pipeline = Pipeline::kLowFreq;
  const int n = kNumClasses * count_per_class;
  d.features.resize(n, 40);
  d.labels.resize(n);
  d.provenance.resize(n);
  for (int ci = 0; ci < kNumClasses; ++ci) {
    const auto& [c, field] = clean.fields[ci];
    for (int i = 0; i < count_per_class; ++i) {
      const int row = ci * count_per_class + i;
      for (std::size_t k = 0; k < field.size(); ++k) {
        d.features(row, static_cast<Eigen::Index>(2 * k)) = field[k].real();
        d.features(row, static_cast<Eigen::Index>(2 * k + 1)) = field[k].imag();
      }
      SampleProvenance& p = d.provenance[row];
      p.set = set;
      p.seed = derive_seed({master_seed, static_cast<std::uint64_t>(Pipeline::kLowFreq),
                            static_cast<std::uint64_t>(set.id), static_cast<std::uint64_t>(code(c)),
                            static_cast<std::uint64_t>(i)});
      p.c_top = clean.environments[ci].sediment.sound_speed;
      p.thickness = clean.environments[ci].sediment_thickness;
      d.labels[row] = static_cast<std::uint8_t>(code(label_by_soundspeed(p.c_top)));
    }
  }
  return with_noise(d, snr_db, 0);
}

BackscatterSample backscatter_sample(EnvironmentSet set, SedimentClass c, std::uint64_t seed,
                                     const BackscatterSettings& s) {
  const BackscatterEnvironment env =
      backscatter_environment(set, c, CatalogOptions{s.corrected_gravel_density});
  DiscretizationOptions opts;
  opts.nodes_per_wavelength = s.nodes_per_wavelength;
  opts.pml_wavelengths = s.pml_wavelengths;
  std::string last_error;
  for (int attempt = 0; attempt <= s.max_redraws; ++attempt) {
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(attempt)}));
    std::uniform_int_distribution<std::size_t> pick(0, env.thickness_choices.size() - 1);
    const double tau = env.thickness_choices[pick(rng)];
    const std::uint64_t surface_seed = rng();
    try {
      const HighFreqTemplate t = env.make_template(tau, surface_seed);
      const LayeredDomain domain = LayeredDomain::from_template(t, s.surface_points, opts);
      const FieldSolution sol = solve_scattered(assemble(domain));
      const double radius = s.radius_wavelengths * t.c_water / t.frequency;
      BackscatterSignal sig = backscatter_signal(sol, domain, s.n_points, s.z0, radius);
      return {std::move(sig.y), t.c_top, tau, surface_seed, attempt};
    } catch (const SolverError& e) {
      last_error = e.what();
    } catch (const GenerationError& e) {
      last_error = e.what();
    } catch (const SamplingError& e) {
      last_error = e.what();
    }
  }
  throw GenerationError("backscatter sample " + set.name() + "/" + std::string(to_string(c)) +
                        " failed after " + std::to_string(s.max_redraws + 1) +
                        " draws: " + last_error);
}

LabeledDataset generate_backscatter_dataset(EnvironmentSet set, int count_per_class, Snr snr_db,
                                            std::uint64_t master_seed,
                                            const BackscatterSettings& settings, int workers) {
  if (count_per_class < 1) throw ParameterError("count per class must be positive");
  if (settings.n_points < 1) throw ParameterError("n_points must be positive");
  const int n = kNumClasses * count_per_class;
  LabeledDataset d;
  d.kind = FeatureKind::kReal;
  d.pipeline = Pipeline::kBackscatter;
  d.features.resize(n, settings.n_points);
  d.labels.resize(n);
  d.provenance.resize(n);
  detail::parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t row) {
    const int ci = static_cast<int>(row) / count_per_class;
    const int i = static_cast<int>(row) % count_per_class;
    const SedimentClass c = kAllClasses[ci];
    const std::uint64_t seed =
        derive_seed({master_seed, static_cast<std::uint64_t>(Pipeline::kBackscatter),
                     static_cast<std::uint64_t>(set.id), static_cast<std::uint64_t>(code(c)),
                     static_cast<std::uint64_t>(i)});
    const BackscatterSample s = backscatter_sample(set, c, seed, settings);
    const auto r = static_cast<Eigen::Index>(row);
    for (int k = 0; k < settings.n_points; ++k) d.features(r, k) = s.signal[k];
    SampleProvenance& p = d.provenance[row];
    p.set = set;
    p.seed = seed;
    p.c_top = s.c_top;
    p.thickness = s.thickness;
    d.labels[row] = static_cast<std::uint8_t>(code(label_by_soundspeed(s.c_top)));
  });
  return with_noise(d, snr_db, 0);
}

LabeledDataset with_noise(const LabeledDataset& clean, Snr snr_db, std::uint64_t realization) {
  LabeledDataset out = clean;
  for (auto& p : out.provenance) p.snr_db = snr_db;
  if (!snr_db) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    NoiseSpec spec{snr_db, out.kind,
                   derive_seed({clean.provenance[i].seed, kNoiseTag, realization, snr_bits(snr_db)})};
    if (out.kind == FeatureKind::kComplex20) {
      const auto noisy = add_noise(out.complex_row(i), spec);
      for (std::size_t k = 0; k < noisy.size(); ++k) {
        out.features(r, static_cast<Eigen::Index>(2 * k)) = noisy[k].real();
        out.features(r, static_cast<Eigen::Index>(2 * k + 1)) = noisy[k].imag();
      }
    } else {
      std::vector<double> row(static_cast<std::size_t>(out.features.cols()));
      for (Eigen::Index k = 0; k < out.features.cols(); ++k) row[k] = out.features(r, k);
      const auto noisy = add_noise(row, spec);
      for (Eigen::Index k = 0; k < out.features.cols(); ++k) out.features(r, k) = noisy[k];
    }
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& d, double fraction,
                                                std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw ParameterError("split fraction must lie in (0, 1)");
  std::vector<std::size_t> train, holdout;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw ParameterError("split: class " + std::string(to_string(class_from_code(c))) +
                           " has fewer than 2 samples");
    }
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(c)}));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_hold = static_cast<std::size_t>(std::clamp<long>(
        std::lround(fraction * static_cast<double>(idx.size())), 1, static_cast<long>(idx.size()) - 1));
    std::sort(idx.begin(), idx.begin() + static_cast<long>(n_hold));
    std::sort(idx.begin() + static_cast<long>(n_hold), idx.end());
    holdout.insert(holdout.end(), idx.begin(), idx.begin() + static_cast<long>(n_hold));
    train.insert(train.end(), idx.begin() + static_cast<long>(n_hold), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(holdout.begin(), holdout.end());
  return {d.subset(train), d.subset(holdout)};
}

// ---------------------------------------------------------------------------

void write_dataset(std::ostream& os, const LabeledDataset& d) {
  d.validate();
  std::ostringstream body;
  binio::put_bytes(body, "SBDATA01");
  binio::put_u64(body, kFormatVersion);
  binio::put_u8(body, static_cast<std::uint8_t>(d.kind));
  binio::put_u8(body, static_cast<std::uint8_t>(d.pipeline));
  binio::put_u64(body, static_cast<std::uint64_t>(d.features.cols()));
  binio::put_u64(body, d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const SampleProvenance& p = d.provenance[i];
    binio::put_u8(body, d.labels[i]);
    binio::put_u64(body, static_cast<std::uint64_t>(p.set.id));
    binio::put_u64(body, p.seed);
    binio::put_f64(body, p.snr_db ? *p.snr_db : std::numeric_limits<double>::quiet_NaN());
    binio::put_f64(body, p.c_top);
    binio::put_f64(body, p.thickness);
    for (Eigen::Index k = 0; k < d.features.cols(); ++k) {
      binio::put_f64(body, d.features(static_cast<Eigen::Index>(i), k));
    }
  }
  const std::string bytes = body.str();
  binio::put_bytes(os, bytes);
  binio::put_u64(os, crc32_of(bytes));
  if (!os) throw FormatError("failed writing dataset");
}

LabeledDataset read_dataset(std::istream& is, std::optional<FeatureKind> expected) {
  const std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (all.size() < 8 + 8) throw FormatError("truncated input while reading dataset header");
  const std::string bytes = all.substr(0, all.size() - 8);
  std::istringstream tail(all.substr(all.size() - 8));
  const std::uint64_t stored_crc = binio::get_u64(tail, "checksum");

  std::istringstream in(bytes);
  binio::expect_magic(in, "SBDATA01");
  if (stored_crc != crc32_of(bytes)) throw FormatError("dataset checksum mismatch");
  const std::uint64_t version = binio::get_u64(in, "version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  LabeledDataset d;
  const std::uint8_t kind = binio::get_u8(in, "kind");
  if (kind > 1) throw FormatError("unknown dataset kind");
  d.kind = static_cast<FeatureKind>(kind);
  if (expected && *expected != d.kind) {
    throw FormatError("dataset kind is " + std::string(to_string(d.kind)) + ", expected " +
                      std::string(to_string(*expected)));
  }
  const std::uint8_t pipeline = binio::get_u8(in, "pipeline");
  if (pipeline > 1) throw FormatError("unknown pipeline");
  d.pipeline = static_cast<Pipeline>(pipeline);
  const std::uint64_t dims = binio::get_u64(in, "dims");
  const std::uint64_t count = binio::get_u64(in, "count");
  if (dims > (1u << 20) || count > (1u << 28) || dims * count > (1ull << 31)) {
    throw FormatError("implausible dataset size");
  }
  d.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dims));
  d.labels.resize(count);
  d.provenance.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    SampleProvenance& p = d.provenance[i];
    d.labels[i] = binio::get_u8(in, "label");
    p.set.id = static_cast<int>(binio::get_u64(in, "record"));
    p.seed = binio::get_u64(in, "record");
    const double snr = binio::get_f64(in, "record");
    if (!std::isnan(snr)) p.snr_db = snr;
    p.c_top = binio::get_f64(in, "record");
    p.thickness = binio::get_f64(in, "record");
    for (std::uint64_t k = 0; k < dims; ++k) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = binio::get_f64(in, "features");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after dataset records");
  try {
    d.validate();
  } catch (const ParameterError& e) {
    throw FormatError(e.what());
  }
  return d;
}

void save_dataset(const std::filesystem::path& path, const LabeledDataset& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_dataset(os, d);
}

LabeledDataset load_dataset(const std::filesystem::path& path, std::optional<FeatureKind> expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_dataset(is, expected);
}

void write_dataset_csv(std::ostream& os, const LabeledDataset& d) {
  os << "label,set,seed,snr,c_top,thickness";
  for (Eigen::Index k = 0; k < d.features.cols(); ++k) os << ",f" << k;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const SampleProvenance& p = d.provenance[i];
    os << to_string(class_from_code(d.labels[i])) << ',' << p.set.name() << ',' << p.seed << ','
       << format_snr(p.snr_db) << ',' << p.c_top << ',' << p.thickness;
    for (Eigen::Index k = 0; k < d.features.cols(); ++k) os << ',' << d.features(static_cast<Eigen::Index>(i), k);
    os << '\n';
  }
}

}  // namespace seabed
