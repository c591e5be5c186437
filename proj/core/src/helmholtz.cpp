#include "seabed/helmholtz.hpp"

#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <array>
#include <tuple>
#include <utility>
#include <cmath>
#include <fstream>
#include <numbers>

#include "binio.hpp"
#include "seabed/error.hpp"

namespace seabed {
namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

constexpr int kMaxOrder = 6;
using Basis = std::array<double, kMaxOrder + 1>;

// Lagrange basis of order p on [-1, 1] with equispaced nodes, and its
// derivative.
void lagrange(int p, double t, Basis& v, Basis& d) {
  Basis nodes{};
  for (int m = 0; m <= p; ++m) nodes[m] = -1.0 + 2.0 * m / p;
  for (int m = 0; m <= p; ++m) {
    double prod = 1.0, deriv = 0.0;
    for (int k = 0; k <= p; ++k) {
      if (k == m) continue;
      const double denom = nodes[m] - nodes[k];
      deriv = deriv * (t - nodes[k]) / denom + prod / denom;
      prod *= (t - nodes[k]) / denom;
    }
    v[m] = prod;
    d[m] = deriv;
  }
}

struct GaussRule {
  std::vector<double> x, w;
};

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
GaussRule gauss_legendre(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.x[n - 1 - i] = x;
    r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// PML layer description for one side.
struct Pml {
  double start = 0.0;   // interface with the physical region
  double thickness = 0.0;
  double sigma_max = 0.0;
  int direction = 0;    // +1: PML above `start`, -1: below
};

struct Layout {
  FieldGrid grid;
  Pml top;
  Pml bottom;
  double omega = 0.0;
};

Layout make_layout(const LayeredDomain& d) {
  const HighFreqTemplate& t = d.scene;
  const DiscretizationOptions& o = d.options;
  if (!(o.nodes_per_wavelength >= 4)) throw ParameterError("nodes per wavelength must be >= 4");
  if (!(o.pml_wavelengths > 0)) throw ParameterError("PML thickness must be positive");
  if (!(o.pml_reflection > 0 && o.pml_reflection < 1)) throw ParameterError("PML reflection must lie in (0, 1)");
  if (o.order < 1 || o.order > kMaxOrder) throw ParameterError("element order must lie in [1, 6]");
  const int p = o.order;

  const double f = t.frequency;
  const double c_min = std::min({t.c_water, t.c_top, t.c_bottom});
  const double h = c_min / f / o.nodes_per_wavelength;  // node spacing target
  const double elem = p * h;

  Layout L;
  L.omega = 2.0 * kPi * f;
  FieldGrid& g = L.grid;
  g.order = p;
  g.width = t.width;
  const int ex = std::max(2, static_cast<int>(std::ceil(t.width / elem - 1e-9)));
  g.nx = p * ex;
  g.hx = t.width / g.nx;

  // Element rows are aligned with z = 0.
  const int n_sed = static_cast<int>(std::ceil(0.5 * t.height / elem - 1e-9));
  const int n_water = static_cast<int>(std::ceil(t.water_height / elem - 1e-9));
  const double pml_top = o.pml_wavelengths * t.c_water / f;
  const double pml_bottom = o.pml_wavelengths * t.c_bottom / f;
  const int n_pml_top = std::max(2, static_cast<int>(std::ceil(pml_top / elem - 1e-9)));
  const int n_pml_bottom = std::max(2, static_cast<int>(std::ceil(pml_bottom / elem - 1e-9)));
  g.hz = h;
  g.phys_z_min = -n_sed * elem;
  g.phys_z_max = n_water * elem;
  g.z_min = g.phys_z_min - n_pml_bottom * elem;
  g.nz = p * (n_sed + n_water + n_pml_top + n_pml_bottom) + 1;

  const IncidentSpec inc = IncidentSpec::from_template(t);
  g.bloch = std::exp(-kI * inc.kx() * t.width);

  const double log_r = std::log(1.0 / o.pml_reflection);
  L.top = {g.phys_z_max, n_pml_top * elem, 0.0, +1};
  L.top.sigma_max = 3.0 * t.c_water * log_r / (2.0 * L.top.thickness);
  L.bottom = {g.phys_z_min, n_pml_bottom * elem, 0.0, -1};
  L.bottom.sigma_max = 3.0 * t.c_bottom * log_r / (2.0 * L.bottom.thickness);
  return L;
}

// Stretch factor s(z) = 1 - i sigma/w and the complex coordinate z~ used to
// continue the incident wave analytically into the PML.
struct Stretch {
  cplx s{1.0, 0.0};
  cplx z_tilde;
};

Stretch stretch_at(const Layout& L, double z) {
  Stretch out{{1.0, 0.0}, cplx(z, 0.0)};
  for (const Pml* p : {&L.top, &L.bottom}) {
    const double depth = p->direction * (z - p->start);
    if (depth <= 0.0) continue;
    const double r = depth / p->thickness;
    const double sigma = p->sigma_max * r * r;
    out.s = cplx(1.0, -sigma / L.omega);
    // beta = integral of sigma / w over the penetration depth.
    const double beta = p->sigma_max / L.omega * p->thickness * r * r * r / 3.0;
    out.z_tilde = cplx(z, -p->direction * beta);
  }
  return out;
}

struct Material {
  double inv_rho;
  cplx k2_over_rho;
};

Material material(const LayeredDomain& d, Medium m) {
  const cplx k = d.wavenumber(m);
  const double rho = d.density(m);
  return {1.0 / rho, k * k / rho};
}

std::pair<double, double> band(const SurfaceProfile& s) {
  if (s.f.empty()) return {0.0, 0.0};
  const auto [lo, hi] = std::minmax_element(s.f.begin(), s.f.end());
  return {*lo, *hi};
}

void check_geometry(const LayeredDomain& d, const FieldGrid& g) {
  const HighFreqTemplate& t = d.scene;
  const auto [fmin, fmax] = band(d.surface);
  if (fmax >= g.phys_z_max || fmin <= -t.thickness) {
    throw SolverError("geometry: the rough interface leaves the water / top-layer band");
  }
  if (-t.thickness <= g.phys_z_min) {
    throw SolverError("geometry: the second interface lies in the bottom PML");
  }
  if (d.bottom_surface) {
    for (double v : d.bottom_surface->f) {
      if (-t.thickness + v <= g.phys_z_min || -t.thickness + v >= fmin) {
        throw SolverError("geometry: the rough second interface leaves the top layer band");
      }
    }
  }
  if (std::abs(d.surface.width - t.width) > 1e-12 * t.width && !d.surface.f.empty()) {
    throw SolverError("geometry: surface width differs from the template width");
  }
}

using SourceFn = std::function<void(double x, double z, const Stretch& st, Medium m, cplx& value,
                                    cplx& grad_x, cplx& grad_z, cplx& volume)>;

DiscreteSystem assemble_impl(const LayeredDomain& d, const SourceFn& source) {
  d.scene.validate();
  const Layout L = make_layout(d);
  const FieldGrid& g = L.grid;
  check_geometry(d, g);

  const int nx = g.nx, nz = g.nz;
  const int n_rows = nz - 2;  // Dirichlet on the outermost rows
  const std::size_t n_unknowns = static_cast<std::size_t>(nx) * n_rows;
  auto dof = [&](int i, int j) -> long {
    if (j <= 0 || j >= nz - 1) return -1;
    return static_cast<long>(j - 1) * nx + (i % nx);
  };

  const cplx gamma = g.bloch;
  const cplx gamma_inv = 1.0 / gamma;
  const int p = g.order;
  const int n1 = p + 1;
  const int nloc = n1 * n1;
  const int n_ex = nx / p, n_ez = (nz - 1) / p;
  const double Hx = p * g.hx, Hz = p * g.hz;
  const GaussRule rule = gauss_legendre(n1);

  // Interface bands in z; elements overlapping one get split quadrature.
  const auto [s_min, s_max] = band(d.surface);
  double b_min = 0.0, b_max = 0.0;
  if (d.bottom_surface) std::tie(b_min, b_max) = band(*d.bottom_surface);
  b_min -= d.scene.thickness;
  b_max -= d.scene.thickness;
  auto overlaps = [](double lo, double hi, double z0, double z1) {
    const double eps = 1e-12 * (z1 - z0);
    return hi > z0 + eps && lo < z1 - eps;
  };
  constexpr int kCutColumns = 4;

  const Material water = material(d, Medium::kWater);
  const Material top = material(d, Medium::kTop);
  const Material bottom = material(d, Medium::kBottom);

  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(static_cast<std::size_t>(n_ex) * n_ez * nloc * nloc);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n_unknowns));

  std::vector<cplx> Ke(static_cast<std::size_t>(nloc) * nloc);
  std::vector<cplx> be(nloc);
  std::vector<double> N(nloc), dNx(nloc), dNz(nloc);
  Basis lx, dlx, lz, dlz;

  // Adds one quadrature point (physical coordinates, physical weight).
  auto accumulate = [&](double x, double z, double w, double x0, double z0) {
    lagrange(p, 2.0 * (x - x0) / Hx - 1.0, lx, dlx);
    lagrange(p, 2.0 * (z - z0) / Hz - 1.0, lz, dlz);
    for (int n = 0; n < n1; ++n) {
      for (int m = 0; m < n1; ++m) {
        const int a = n1 * n + m;
        N[a] = lx[m] * lz[n];
        dNx[a] = dlx[m] * lz[n] * 2.0 / Hx;
        dNz[a] = lx[m] * dlz[n] * 2.0 / Hz;
      }
    }
    const Stretch st = stretch_at(L, z);
    const Medium med = d.medium_at(x, z);
    const Material& mat = med == Medium::kWater ? water : (med == Medium::kTop ? top : bottom);
    const cplx cx = w * st.s * mat.inv_rho;
    const cplx cz = w * mat.inv_rho / st.s;
    const cplx cm = w * st.s * mat.k2_over_rho;
    for (int a = 0; a < nloc; ++a) {
      const cplx ax = cx * dNx[a], az = cz * dNz[a], am = cm * N[a];
      cplx* row = &Ke[static_cast<std::size_t>(a) * nloc];
      for (int b = 0; b < nloc; ++b) row[b] += ax * dNx[b] + az * dNz[b] - am * N[b];
    }
    cplx val, gx, gz, vol;
    source(x, z, st, med, val, gx, gz, vol);
    if (val != 0.0 || gx != 0.0 || gz != 0.0 || vol != 0.0) {
      for (int a = 0; a < nloc; ++a) be[a] += w * (gx * dNx[a] + gz * dNz[a] + (val + vol) * N[a]);
    }
  };

  for (int ez = 0; ez < n_ez; ++ez) {
    const double z0 = g.z_at(p * ez);
    const double z1 = z0 + Hz;
    const bool cut = overlaps(s_min, s_max, z0, z1) || overlaps(b_min, b_max, z0, z1);
    for (int ex = 0; ex < n_ex; ++ex) {
      const double x0 = g.x_at(p * ex);
      std::fill(Ke.begin(), Ke.end(), cplx(0.0, 0.0));
      std::fill(be.begin(), be.end(), cplx(0.0, 0.0));
      if (!cut) {
        for (int b = 0; b < n1; ++b) {
          const double z = z0 + 0.5 * (rule.x[b] + 1.0) * Hz;
          for (int a = 0; a < n1; ++a) {
            const double x = x0 + 0.5 * (rule.x[a] + 1.0) * Hx;
            accumulate(x, z, 0.25 * Hx * Hz * rule.w[a] * rule.w[b], x0, z0);
          }
        }
      } else {
        // Columns of Gauss points in x; in each column z is split where the
        // interfaces cross so every piece is a single medium.
        const double hc = Hx / kCutColumns;
        for (int c = 0; c < kCutColumns; ++c) {
          for (int a = 0; a < n1; ++a) {
            const double x = x0 + c * hc + 0.5 * (rule.x[a] + 1.0) * hc;
            const double wx = 0.5 * hc * rule.w[a];
            std::array<double, 4> cuts{z0, 0.0, 0.0, z1};
            int n_cuts = 1;
            const double second = -d.scene.thickness +
                                  (d.bottom_surface ? d.bottom_surface->height_at(x) : 0.0);
            for (double zc : {second, d.surface.height_at(x)}) {
              if (zc > z0 && zc < z1) cuts[n_cuts++] = zc;
            }
            cuts[n_cuts] = z1;
            for (int k = 0; k < n_cuts; ++k) {
              const double lo = cuts[k], hi = cuts[k + 1];
              if (!(hi > lo)) continue;
              for (int b = 0; b < n1; ++b) {
                const double z = lo + 0.5 * (rule.x[b] + 1.0) * (hi - lo);
                accumulate(x, z, wx * 0.5 * (hi - lo) * rule.w[b], x0, z0);
              }
            }
          }
        }
      }
      for (int a = 0; a < nloc; ++a) {
        const int ia = p * ex + a % n1, ja = p * ez + a / n1;
        const long row = dof(ia, ja);
        if (row < 0) continue;
        const cplx row_phase = ia == nx ? gamma_inv : cplx(1.0, 0.0);
        for (int b = 0; b < nloc; ++b) {
          const int ib = p * ex + b % n1, jb = p * ez + b / n1;
          const long col = dof(ib, jb);
          if (col < 0) continue;
          const cplx col_phase = ib == nx ? gamma : cplx(1.0, 0.0);
          triplets.emplace_back(row, col, row_phase * col_phase * Ke[static_cast<std::size_t>(a) * nloc + b]);
        }
        rhs[row] += row_phase * be[a];
      }
    }
  }

  DiscreteSystem sys;
  sys.grid = g;
  sys.scene = d.scene;
  sys.matrix.resize(static_cast<Eigen::Index>(n_unknowns), static_cast<Eigen::Index>(n_unknowns));
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  sys.rhs = std::move(rhs);
  return sys;
}

// Element containing (x, z) and the local coordinates in [-1, 1].
void locate(const FieldGrid& g, double x, double z, int& ex, int& ez, double& tx, double& tz) {
  const int p = g.order;
  const double Hx = p * g.hx, Hz = p * g.hz;
  const int n_ex = g.nx / p, n_ez = (g.nz - 1) / p;
  ex = std::min(n_ex - 1, std::max(0, static_cast<int>(std::floor(x / Hx))));
  ez = std::min(n_ez - 1, std::max(0, static_cast<int>(std::floor((z - g.z_min) / Hz))));
  tx = 2.0 * (x - ex * Hx) / Hx - 1.0;
  tz = 2.0 * (z - g.z_min - ez * Hz) / Hz - 1.0;
}

}  // namespace

IncidentSpec IncidentSpec::from_template(const HighFreqTemplate& t) {
  return {t.incident_angle, t.water_wavenumber()};
}

double IncidentSpec::kx() const { return wavenumber * std::sin(angle); }
double IncidentSpec::kz() const { return -wavenumber * std::cos(angle); }

cplx IncidentSpec::value(double x, double z) const {
  return std::exp(-kI * (kx() * x + kz() * z));
}

std::vector<cplx> incident_field(const IncidentSpec& spec, const std::vector<Point2>& points) {
  std::vector<cplx> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(spec.value(p.x, p.z));
  return out;
}

LayeredDomain LayeredDomain::from_template(const HighFreqTemplate& t, int surface_points,
                                           DiscretizationOptions options) {
  t.validate();
  LayeredDomain d;
  d.scene = t;
  d.options = options;
  if (t.roughness.rms_height > 0) {
    d.surface = generate_surface(t.width, surface_points, t.roughness.rms_height,
                                 t.roughness.corr_length, t.roughness.seed);
  } else {
    d.surface = SurfaceProfile::flat(t.width, surface_points);
  }
  const double alpha = attenuation_to_nepers(t.attenuation_db_per_m_per_khz,
                                             AttenuationUnit::kDbPerMeterPerKhz, t.frequency,
                                             t.c_top);
  d.top_attenuation = alpha;
  d.bottom_attenuation = alpha;
  return d;
}

Medium LayeredDomain::medium_at(double x, double z) const {
  if (z > surface.height_at(x)) return Medium::kWater;
  const double second = -scene.thickness + (bottom_surface ? bottom_surface->height_at(x) : 0.0);
  return z > second ? Medium::kTop : Medium::kBottom;
}

double LayeredDomain::sound_speed(Medium m) const {
  switch (m) {
    case Medium::kWater: return scene.c_water;
    case Medium::kTop: return scene.c_top;
    case Medium::kBottom: return scene.c_bottom;
  }
  return scene.c_water;
}

double LayeredDomain::density(Medium m) const {
  switch (m) {
    case Medium::kWater: return scene.rho_water;
    case Medium::kTop: return scene.rho_top;
    case Medium::kBottom: return scene.rho_bottom;
  }
  return scene.rho_water;
}

cplx LayeredDomain::wavenumber(Medium m) const {
  const double omega = 2.0 * kPi * scene.frequency;
  const double alpha = m == Medium::kTop ? top_attenuation
                       : m == Medium::kBottom ? bottom_attenuation
                                              : 0.0;
  return cplx(omega / sound_speed(m), -alpha);
}

DiscreteSystem assemble(const LayeredDomain& d) {
  const IncidentSpec inc = IncidentSpec::from_template(d.scene);
  const Material water = material(d, Medium::kWater);
  const Material top = material(d, Medium::kTop);
  const Material bottom = material(d, Medium::kBottom);
  // b(phi) = -(a_m - a_w)(p_in, phi), nonzero only in the sediment.
  auto source = [&](double x, double, const Stretch& st, Medium m, cplx& val, cplx& gx, cplx& gz,
                    cplx& vol) {
    val = gx = gz = vol = 0.0;
    if (m == Medium::kWater) return;
    const Material& mat = m == Medium::kTop ? top : bottom;
    const double d_inv_rho = mat.inv_rho - water.inv_rho;
    const cplx d_k2 = mat.k2_over_rho - water.k2_over_rho;
    const cplx p = std::exp(-kI * (inc.kx() * x + inc.kz() * st.z_tilde));
    const cplx px = -kI * inc.kx() * p;
    const cplx pz = -kI * inc.kz() * st.s * p;
    gx = -st.s * d_inv_rho * px;
    gz = -d_inv_rho / st.s * pz;
    val = st.s * d_k2 * p;
  };
  return assemble_impl(d, source);
}

DiscreteSystem assemble_with_source(const LayeredDomain& d,
                                    const std::function<cplx(double, double)>& f) {
  auto source = [&](double x, double z, const Stretch&, Medium, cplx& val, cplx& gx, cplx& gz,
                    cplx& vol) {
    val = gx = gz = 0.0;
    vol = f(x, z);
  };
  return assemble_impl(d, source);
}

FieldSolution::FieldSolution(FieldGrid grid, HighFreqTemplate scene, std::vector<cplx> nodal,
                             SolveStats stats)
    : grid_(grid), scene_(std::move(scene)), nodal_(std::move(nodal)), stats_(std::move(stats)) {
  if (nodal_.size() != static_cast<std::size_t>(grid_.nx) * grid_.nz) {
    throw ParameterError("nodal vector does not match the grid");
  }
}

FieldSolution FieldSolution::from_function(const FieldGrid& grid,
                                           const std::function<cplx(double, double)>& f) {
  std::vector<cplx> v(static_cast<std::size_t>(grid.nx) * grid.nz);
  for (int j = 0; j < grid.nz; ++j) {
    for (int i = 0; i < grid.nx; ++i) v[static_cast<std::size_t>(j) * grid.nx + i] = f(grid.x_at(i), grid.z_at(j));
  }
  return FieldSolution(grid, HighFreqTemplate{}, std::move(v), SolveStats{});
}

cplx FieldSolution::value(double x, double z) const { return value(x, z, nullptr, nullptr); }

cplx FieldSolution::value(double x, double z, cplx* dx, cplx* dz) const {
  const FieldGrid& g = grid_;
  if (!std::isfinite(x) || !std::isfinite(z)) throw SamplingError("non-finite sample point");
  if (!g.in_physical_region(z)) {
    throw SamplingError("sample point z = " + std::to_string(z) + " lies in a PML or outside the grid");
  }
  // Wrap x into [0, width) and remember the Bloch phase.
  const double wraps = std::floor(x / g.width);
  double xr = x - wraps * g.width;
  if (xr >= g.width) xr -= g.width;
  const cplx phase = std::pow(g.bloch, wraps);

  int ex, ez;
  double tx, tz;
  locate(g, xr, z, ex, ez, tx, tz);
  const int p = g.order;
  Basis lx, dlx, lz, dlz;
  lagrange(p, tx, lx, dlx);
  lagrange(p, tz, lz, dlz);
  cplx v = 0.0, gx = 0.0, gz = 0.0;
  for (int n = 0; n <= p; ++n) {
    const int j = p * ez + n;
    for (int m = 0; m <= p; ++m) {
      const int i = p * ex + m;
      cplx nodal = i == g.nx ? g.bloch * node(0, j) : node(i, j);
      v += lx[m] * lz[n] * nodal;
      gx += dlx[m] * lz[n] * nodal;
      gz += lx[m] * dlz[n] * nodal;
    }
  }
  if (dx) *dx = phase * gx * (2.0 / (p * g.hx));
  if (dz) *dz = phase * gz * (2.0 / (p * g.hz));
  return phase * v;
}

FieldSolution solve_scattered(const DiscreteSystem& sys) {
  const Eigen::Index n = sys.rhs.size();
  SolveStats stats;
  stats.unknowns = static_cast<std::size_t>(n);
  stats.nonzeros = static_cast<std::size_t>(sys.matrix.nonZeros());
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
  const double bnorm = sys.rhs.norm();
  if (bnorm > 0.0) {
    Eigen::UmfPackLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(sys.matrix);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
    x = lu.solve(sys.rhs);
    double res = (sys.rhs - sys.matrix * x).norm() / bnorm;
    stats.residual_history.push_back(res);
    for (int step = 0; step < 3 && !(res < 1e-12); ++step) {
      const Eigen::VectorXcd r = sys.rhs - sys.matrix * x;
      x += lu.solve(r);
      res = (sys.rhs - sys.matrix * x).norm() / bnorm;
      stats.residual_history.push_back(res);
    }
    stats.residual = res;
    if (!(res < 1e-8) || !x.allFinite()) {
      std::string history;
      for (double h : stats.residual_history) history += " " + std::to_string(h);
      throw SolverError("linear solve did not reach the residual target; history:" + history);
    }
  } else {
    stats.residual_history.push_back(0.0);
  }
  const FieldGrid& g = sys.grid;
  std::vector<cplx> nodal(static_cast<std::size_t>(g.nx) * g.nz, cplx(0.0, 0.0));
  for (int j = 1; j < g.nz - 1; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      nodal[static_cast<std::size_t>(j) * g.nx + i] = x[static_cast<Eigen::Index>(j - 1) * g.nx + i];
    }
  }
  return FieldSolution(g, sys.scene, std::move(nodal), std::move(stats));
}

FieldSolution solve_template(const HighFreqTemplate& t, int surface_points,
                             DiscretizationOptions options) {
  return solve_scattered(assemble(LayeredDomain::from_template(t, surface_points, options)));
}

FieldSamples sample_field(const FieldSolution& s, const std::vector<Point2>& points,
                          std::optional<Point2> center) {
  FieldSamples out;
  out.values.reserve(points.size());
  if (center) out.radial.reserve(points.size());
  for (const Point2& p : points) {
    cplx gx, gz;
    out.values.push_back(s.value(p.x, p.z, &gx, &gz));
    if (center) {
      const double rx = p.x - center->x, rz = p.z - center->z;
      const double r = std::hypot(rx, rz);
      if (!(r > 0)) throw SamplingError("radial derivative requested at the center");
      out.radial.push_back((gx * rx + gz * rz) / r);
    }
  }
  return out;
}

namespace {

void write_template(std::ostream& os, const HighFreqTemplate& t) {
  for (double v : {t.width, t.height, t.water_height, t.frequency, t.incident_angle, t.c_water,
                   t.rho_water, t.c_top, t.rho_top, t.thickness, t.c_bottom, t.rho_bottom,
                   t.attenuation_db_per_m_per_khz, t.roughness.rms_height, t.roughness.corr_length}) {
    binio::put_f64(os, v);
  }
  binio::put_u64(os, t.roughness.seed);
}

HighFreqTemplate read_template(std::istream& is) {
  HighFreqTemplate t;
  for (double* v : {&t.width, &t.height, &t.water_height, &t.frequency, &t.incident_angle,
                    &t.c_water, &t.rho_water, &t.c_top, &t.rho_top, &t.thickness, &t.c_bottom,
                    &t.rho_bottom, &t.attenuation_db_per_m_per_khz, &t.roughness.rms_height,
                    &t.roughness.corr_length}) {
    *v = binio::get_f64(is, "template");
  }
  t.roughness.seed = binio::get_u64(is, "template");
  return t;
}

}  // namespace

void write_field(std::ostream& os, const FieldSolution& s) {
  const FieldGrid& g = s.grid();
  binio::put_bytes(os, "SBFIELD1");
  binio::put_u64(os, static_cast<std::uint64_t>(g.nx));
  binio::put_u64(os, static_cast<std::uint64_t>(g.nz));
  binio::put_u64(os, static_cast<std::uint64_t>(g.order));
  for (double v : {g.width, g.hx, g.hz, g.z_min, g.phys_z_min, g.phys_z_max, g.bloch.real(),
                   g.bloch.imag()}) {
    binio::put_f64(os, v);
  }
  binio::put_u64(os, s.stats().unknowns);
  binio::put_u64(os, s.stats().nonzeros);
  binio::put_f64(os, s.stats().residual);
  write_template(os, s.scene());
  for (const cplx& v : s.nodal()) {
    binio::put_f64(os, v.real());
    binio::put_f64(os, v.imag());
  }
  if (!os) throw FormatError("failed writing field solution");
}

FieldSolution read_field(std::istream& is) {
  binio::expect_magic(is, "SBFIELD1");
  FieldGrid g;
  const std::uint64_t nx = binio::get_u64(is, "grid");
  const std::uint64_t nz = binio::get_u64(is, "grid");
  const std::uint64_t order = binio::get_u64(is, "grid");
  if (nx < 2 || nz < 3 || nx * nz > (1u << 28)) throw FormatError("implausible field grid");
  if (order < 1 || order > kMaxOrder || nx % order != 0 || (nz - 1) % order != 0) {
    throw FormatError("implausible element order");
  }
  g.nx = static_cast<int>(nx);
  g.nz = static_cast<int>(nz);
  g.order = static_cast<int>(order);
  g.width = binio::get_f64(is, "grid");
  g.hx = binio::get_f64(is, "grid");
  g.hz = binio::get_f64(is, "grid");
  g.z_min = binio::get_f64(is, "grid");
  g.phys_z_min = binio::get_f64(is, "grid");
  g.phys_z_max = binio::get_f64(is, "grid");
  const double br = binio::get_f64(is, "grid");
  const double bi = binio::get_f64(is, "grid");
  g.bloch = cplx(br, bi);
  SolveStats stats;
  stats.unknowns = binio::get_u64(is, "stats");
  stats.nonzeros = binio::get_u64(is, "stats");
  stats.residual = binio::get_f64(is, "stats");
  HighFreqTemplate t = read_template(is);
  std::vector<cplx> nodal(nx * nz);
  for (cplx& v : nodal) {
    const double re = binio::get_f64(is, "field");
    const double im = binio::get_f64(is, "field");
    v = cplx(re, im);
  }
  return FieldSolution(g, t, std::move(nodal), std::move(stats));
}

void save_field(const std::filesystem::path& path, const FieldSolution& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_field(os, s);
}

FieldSolution load_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_field(is);
}

}  // namespace seabed
