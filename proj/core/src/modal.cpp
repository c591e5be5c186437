#include "seabed/modal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "binio.hpp"
#include "seabed/error.hpp"

namespace seabed {
namespace {

using cplx = std::complex<double>;

// Symmetric tridiagonal matrix: diagonal d[0..n-1], off-diagonal e[0..n-2].
struct Tridiagonal {
  std::vector<double> d;
  std::vector<double> e;

  std::size_t size() const { return d.size(); }

  // Number of eigenvalues strictly below x (Sturm sequence).
  std::size_t count_below(double x) const {
    const double tiny = std::numeric_limits<double>::min() * 1e6;
    std::size_t count = 0;
    double q = d[0] - x;
    if (q < 0) ++count;
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (std::abs(q) < tiny) q = -tiny;
      q = d[i] - x - e[i - 1] * e[i - 1] / q;
      if (q < 0) ++count;
    }
    return count;
  }

  std::pair<double, double> gershgorin() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double r = 0.0;
      if (i > 0) r += std::abs(e[i - 1]);
      if (i + 1 < d.size()) r += std::abs(e[i]);
      lo = std::min(lo, d[i] - r);
      hi = std::max(hi, d[i] + r);
    }
    return {lo, hi};
  }

  // Eigenvalue number `index` in ascending order, by bisection.
  double eigenvalue(std::size_t index, double lo, double hi) const {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (count_below(mid) > index) hi = mid;
      else lo = mid;
    }
    return 0.5 * (lo + hi);
  }

  // Solves (T - shift I) x = b by Gaussian elimination with partial
  // pivoting, overwriting b. Exact zero pivots are nudged so the solve
  // stays finite at an eigenvalue.
  void solve_shifted(double shift, std::vector<double>& b) const {
    const std::size_t n = d.size();
    std::vector<double> dd(n), du(e), dl(e), du2(n, 0.0);
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      dd[i] = d[i] - shift;
      scale = std::max(scale, std::abs(d[i]) + std::abs(shift));
    }
    const double floor = std::numeric_limits<double>::epsilon() * scale;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (std::abs(dd[i]) >= std::abs(dl[i])) {
        if (std::abs(dd[i]) < floor) dd[i] = floor;
        const double fact = dl[i] / dd[i];
        dd[i + 1] -= fact * du[i];
        b[i + 1] -= fact * b[i];
      } else {
        const double fact = dd[i] / dl[i];
        dd[i] = dl[i];
        const double old_diag = dd[i + 1];
        dd[i + 1] = du[i] - fact * old_diag;
        du[i] = old_diag;
        if (i + 2 < n) {
          du2[i] = du[i + 1];
          du[i + 1] = -fact * du[i + 1];
        }
        std::swap(b[i], b[i + 1]);
        b[i + 1] -= fact * b[i];
      }
    }
    if (std::abs(dd[n - 1]) < floor) dd[n - 1] = floor;
    b[n - 1] /= dd[n - 1];
    if (n >= 2) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2];
    for (std::size_t k = n - 2; k-- > 0;) {
      b[k] = (b[k] - du[k] * b[k + 1] - du2[k] * b[k + 2]) / dd[k];
    }
  }
};

struct Discretization {
  Tridiagonal matrix;            // M^{-1/2} (W - K) M^{-1/2} on nodes 1..N
  std::vector<double> mass;      // lumped 1/rho mass on nodes 1..N
};

Discretization discretize(const DepthModel& m, double omega) {
  const std::size_t n_cells = m.n_cells();
  std::vector<double> mass(n_cells + 1, 0.0), diag(n_cells + 1, 0.0), off(n_cells, 0.0);
  for (std::size_t j = 0; j < n_cells; ++j) {
    const double h = m.z[j + 1] - m.z[j];
    const double half_mass = 0.5 * h / m.rho[j];
    const double stiff = 1.0 / (m.rho[j] * h);
    const double potential = (omega * omega) / (m.c[j] * m.c[j]) * half_mass;
    mass[j] += half_mass;
    mass[j + 1] += half_mass;
    diag[j] += potential - stiff;
    diag[j + 1] += potential - stiff;
    off[j] = stiff;
  }
  // Node 0 carries the pressure-release condition and is removed.
  Discretization out;
  const std::size_t n = n_cells;
  out.mass.assign(mass.begin() + 1, mass.end());
  out.matrix.d.resize(n);
  out.matrix.e.resize(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) out.matrix.d[i] = diag[i + 1] / out.mass[i];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out.matrix.e[i] = off[i + 1] / std::sqrt(out.mass[i] * out.mass[i + 1]);
  }
  return out;
}

DepthModel discretize_layers(const std::vector<Layer>& layers, const std::vector<int>& cells,
                             double halfspace_speed, double design_frequency) {
  DepthModel m;
  m.layers = layers;
  m.cells_per_layer = cells;
  m.halfspace_speed = halfspace_speed;
  m.design_frequency = design_frequency;
  m.z.push_back(0.0);
  double top = 0.0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    const int n = cells[l];
    for (int j = 0; j < n; ++j) {
      const double t0 = static_cast<double>(j) / n;
      const double t1 = static_cast<double>(j + 1) / n;
      const double tm = 0.5 * (t0 + t1);
      m.z.push_back(j + 1 == n ? top + L.thickness : top + t1 * L.thickness);
      m.c.push_back(L.c_top + tm * (L.c_bottom - L.c_top));
      m.rho.push_back(L.density);
      m.alpha.push_back(L.attenuation);
    }
    top += L.thickness;
    if (l + 1 < layers.size()) m.interfaces.push_back(top);
  }
  return m;
}

DepthModel refined(const DepthModel& m, int factor) {
  std::vector<int> cells = m.cells_per_layer;
  for (int& n : cells) n *= factor;
  return discretize_layers(m.layers, cells, m.halfspace_speed, m.design_frequency);
}

// Indices (ascending order) of eigenvalues above `floor`.
std::size_t count_above(const Tridiagonal& t, double floor) { return t.size() - t.count_below(floor); }

std::vector<double> top_eigenvalues(const Tridiagonal& t, std::size_t count) {
  const auto [lo, hi] = t.gershgorin();
  const double pad = 1e-12 * std::max(std::abs(lo), std::abs(hi)) + 1e-300;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    out.push_back(t.eigenvalue(t.size() - 1 - j, lo - pad, hi + pad));
  }
  return out;
}

std::vector<double> inverse_iteration(const Tridiagonal& t, double lambda,
                                      const std::vector<std::vector<double>>& previous) {
  const std::size_t n = t.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = 1.0 + 0.1 * std::sin(0.37 * static_cast<double>(i) + 0.11);
  }
  for (int it = 0; it < 4; ++it) {
    t.solve_shifted(lambda, v);
    for (const auto& p : previous) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += p[i] * v[i];
      for (std::size_t i = 0; i < n; ++i) v[i] -= dot * p[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0) || !std::isfinite(norm)) throw SolverError("inverse iteration broke down");
    for (double& x : v) x /= norm;
  }
  return v;
}

}  // namespace

double DepthModel::min_speed() const { return *std::min_element(c.begin(), c.end()); }

std::size_t DepthModel::cell_at(double depth) const {
  if (depth <= z.front()) return 0;
  if (depth >= z.back()) return c.size() - 1;
  const auto it = std::lower_bound(z.begin(), z.end(), depth);
  const std::size_t node = static_cast<std::size_t>(it - z.begin());
  return node == 0 ? 0 : node - 1;
}

DepthModel build_layered_model(const std::vector<Layer>& layers, double frequency,
                               double points_per_wavelength, double halfspace_speed) {
  if (layers.empty()) throw ParameterError("depth model needs at least one layer");
  if (!(frequency > 0)) throw ParameterError("frequency must be positive");
  if (!(points_per_wavelength >= 10)) throw ParameterError("points per wavelength must be >= 10");
  if (!(halfspace_speed > 0)) throw ParameterError("halfspace speed must be positive");
  std::vector<int> cells;
  for (const Layer& L : layers) {
    if (!(L.thickness > 0)) throw ParameterError("layer thickness must be positive");
    if (!(L.c_top > 0 && L.c_bottom > 0)) throw ParameterError("sound speeds must be positive");
    if (!(L.density > 0)) throw ParameterError("densities must be positive");
    if (!(L.attenuation >= 0)) throw ParameterError("attenuation must be non-negative");
    const double wavelength = std::min(L.c_top, L.c_bottom) / frequency;
    const double h = wavelength / points_per_wavelength;
    cells.push_back(std::max(1, static_cast<int>(std::ceil(L.thickness / h - 1e-9))));
  }
  return discretize_layers(layers, cells, halfspace_speed, frequency);
}

DepthModel build_depth_model(const LowFreqEnvironment& env, double halfspace_extension,
                             double points_per_wavelength) {
  env.validate();
  const double f = env.frequency;
  const double hs_wavelength = env.halfspace.sound_speed / f;
  if (!(halfspace_extension >= hs_wavelength)) {
    throw ParameterError("halfspace extension must be at least one halfspace wavelength (" +
                         std::to_string(hs_wavelength) + " m)");
  }
  std::vector<Layer> layers;
  for (std::size_t i = 1; i < env.ssp.size(); ++i) {
    const auto& a = env.ssp[i - 1];
    const auto& b = env.ssp[i];
    layers.push_back({b.depth - a.depth, a.speed, b.speed, env.water_density, 0.0});
  }
  const auto& s = env.sediment;
  layers.push_back({env.sediment_thickness, s.sound_speed, s.sound_speed, s.density,
                    attenuation_to_nepers(s.attenuation, AttenuationUnit::kDbPerWavelength, f,
                                          s.sound_speed)});
  const auto& h = env.halfspace;
  layers.push_back({halfspace_extension, h.sound_speed, h.sound_speed, h.density,
                    attenuation_to_nepers(h.attenuation, AttenuationUnit::kDbPerWavelength, f,
                                          h.sound_speed)});
  return build_layered_model(layers, f, points_per_wavelength, h.sound_speed);
}

double ModeSet::eigenfunction(std::size_t m, double depth) const {
  if (m >= modes.size()) throw ParameterError("mode index out of range");
  if (!(depth >= z.front() && depth <= z.back())) throw ParameterError("depth outside the grid");
  const auto it = std::upper_bound(z.begin(), z.end(), depth);
  std::size_t j = static_cast<std::size_t>(it - z.begin());
  j = std::clamp<std::size_t>(j, 1, z.size() - 1) - 1;
  const double t = (depth - z[j]) / (z[j + 1] - z[j]);
  const auto& psi = modes[m].psi;
  return psi[j] + t * (psi[j + 1] - psi[j]);
}

double ModeSet::density_at(double depth) const {
  if (!(depth >= z.front() && depth <= z.back())) throw ParameterError("depth outside the grid");
  const auto it = std::lower_bound(z.begin(), z.end(), depth);
  std::size_t node = static_cast<std::size_t>(it - z.begin());
  const std::size_t cell = node == 0 ? 0 : std::min(node - 1, rho.size() - 1);
  return rho[cell];
}

ModeSet solve_modes(const DepthModel& model, double frequency) {
  if (!(frequency > 0)) throw ParameterError("frequency must be positive");
  if (model.n_cells() < 2) throw ParameterError("depth model too coarse");
  const double omega = 2.0 * std::numbers::pi * frequency;
  const double floor = std::isfinite(model.halfspace_speed)
                           ? (omega / model.halfspace_speed) * (omega / model.halfspace_speed)
                           : 0.0;

  const Discretization coarse = discretize(model, omega);
  const Discretization fine = discretize(refined(model, 2), omega);

  const std::size_t n_fine = count_above(fine.matrix, floor);
  const std::vector<double> lam_f = top_eigenvalues(fine.matrix, n_fine);
  const std::vector<double> lam_c = top_eigenvalues(coarse.matrix, std::min(n_fine, coarse.matrix.size()));

  ModeSet out;
  out.frequency = frequency;
  out.z = model.z;
  out.rho = model.rho;
  std::vector<std::vector<double>> vectors;
  for (std::size_t m = 0; m < lam_c.size(); ++m) {
    const double k2 = (4.0 * lam_f[m] - lam_c[m]) / 3.0;
    if (!(k2 > floor)) break;

    std::vector<double> v = inverse_iteration(coarse.matrix, lam_c[m], vectors);
    vectors.push_back(v);

    Mode mode;
    mode.psi.assign(model.z.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) mode.psi[i + 1] = v[i] / std::sqrt(coarse.mass[i]);
    // Sign convention: positive just below the surface.
    if (mode.psi[1] < 0) {
      for (double& p : mode.psi) p = -p;
    }

    const double kr = std::sqrt(k2);
    double loss = 0.0;
    for (std::size_t j = 0; j < model.n_cells(); ++j) {
      if (model.alpha[j] == 0.0) continue;
      const double h = model.z[j + 1] - model.z[j];
      loss += model.alpha[j] / model.c[j] / model.rho[j] * 0.5 * h *
              (mode.psi[j] * mode.psi[j] + mode.psi[j + 1] * mode.psi[j + 1]);
    }
    mode.k = cplx(kr, loss == 0.0 ? 0.0 : omega / kr * loss);
    out.modes.push_back(std::move(mode));
  }
  return out;
}

ComplexField modal_field(const ModeSet& modes, double source_depth, double range,
                         const std::vector<double>& receiver_depths) {
  if (!(range > 0)) throw ParameterError("source range must be positive");
  ComplexField f;
  f.values.assign(receiver_depths.size(), cplx(0.0, 0.0));
  if (modes.empty()) {
    f.no_modes = true;
    return f;
  }
  const double rho_s = modes.density_at(source_depth);
  const cplx prefactor = cplx(0.0, 1.0) * std::polar(1.0, std::numbers::pi / 4.0) /
                         (rho_s * std::sqrt(8.0 * std::numbers::pi * range));
  std::vector<cplx> weights(modes.modes.size());
  for (std::size_t m = 0; m < modes.modes.size(); ++m) {
    const cplx k = modes.modes[m].k;
    weights[m] = modes.eigenfunction(m, source_depth) * std::exp(cplx(0.0, 1.0) * k * range) /
                 std::sqrt(k);
  }
  for (std::size_t r = 0; r < receiver_depths.size(); ++r) {
    cplx sum(0.0, 0.0);
    for (std::size_t m = 0; m < modes.modes.size(); ++m) {
      sum += weights[m] * modes.eigenfunction(m, receiver_depths[r]);
    }
    f.values[r] = prefactor * sum;
  }
  return f;
}

ComplexField pressure_field(const ModeSet& modes, const LowFreqEnvironment& env) {
  return modal_field(modes, env.source_depth, env.source_range, env.phone_depths());
}

void write_modes(std::ostream& os, const ModeSet& s) {
  binio::put_bytes(os, "SBMODES1");
  binio::put_u64(os, s.modes.size());
  binio::put_u64(os, s.z.size());
  binio::put_f64(os, s.frequency);
  for (const Mode& m : s.modes) {
    binio::put_f64(os, m.k.real());
    binio::put_f64(os, m.k.imag());
  }
  binio::put_f64s(os, s.z);
  binio::put_f64s(os, s.rho);
  for (const Mode& m : s.modes) binio::put_f64s(os, m.psi);
  if (!os) throw FormatError("failed writing mode set");
}

ModeSet read_modes(std::istream& is) {
  binio::expect_magic(is, "SBMODES1");
  const std::uint64_t n_modes = binio::get_u64(is, "mode count");
  const std::uint64_t n_nodes = binio::get_u64(is, "node count");
  if (n_nodes < 2 || n_nodes > (1u << 26) || n_modes > n_nodes) {
    throw FormatError("implausible mode set dimensions");
  }
  ModeSet s;
  s.frequency = binio::get_f64(is, "frequency");
  s.modes.resize(n_modes);
  for (Mode& m : s.modes) {
    const double re = binio::get_f64(is, "wavenumber");
    const double im = binio::get_f64(is, "wavenumber");
    m.k = cplx(re, im);
  }
  s.z = binio::get_f64s(is, n_nodes, "grid");
  s.rho = binio::get_f64s(is, n_nodes - 1, "densities");
  for (Mode& m : s.modes) m.psi = binio::get_f64s(is, n_nodes, "eigenfunction");
  return s;
}

void save_modes(const std::filesystem::path& path, const ModeSet& modes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_modes(os, modes);
}

ModeSet load_modes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_modes(is);
}

}  // namespace seabed
