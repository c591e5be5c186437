#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "seabed/catalog.hpp"
#include "seabed/surface.hpp"

namespace seabed {

using cplx = std::complex<double>;

struct Point2 {
  double x = 0.0;
  double z = 0.0;
};

// Plane wave exp(-i k_theta . (x, z)) with k_theta = k (sin t, -cos t): a
// downward-going wave for t in (0, pi/2). Time dependence exp(+i w t).
struct IncidentSpec {
  double angle = 0.0;       // rad from the downward vertical
  double wavenumber = 0.0;  // w / c_w

  static IncidentSpec from_template(const HighFreqTemplate& t);
  double kx() const;
  double kz() const;  // k_theta's z component (negative)
  cplx value(double x, double z) const;
};

std::vector<cplx> incident_field(const IncidentSpec& spec, const std::vector<Point2>& points);

struct DiscretizationOptions {
  double nodes_per_wavelength = 8.0;  // in the slowest medium
  int order = 5;                      // Lagrange element order, 1..6
  double pml_wavelengths = 1.5;       // of the medium adjacent to each PML
  double pml_reflection = 1e-10;      // design reflection of the quadratic profile
};

// Medium codes used by LayeredDomain::medium_at.
enum class Medium { kWater, kTop, kBottom };

// The scattering scene on one lateral period [0, width). z = 0 is the mean
// water-sediment interface; water extends to `water_height`, sediment down
// to -height/2. PMLs sit above and below; the lateral boundaries are
// quasi-periodic with the incident wave's phase advance.
struct LayeredDomain {
  HighFreqTemplate scene;
  SurfaceProfile surface;                       // water / top-layer interface
  std::optional<SurfaceProfile> bottom_surface; // roughness on the -tau interface
  double top_attenuation = 0.0;                 // np/m
  double bottom_attenuation = 0.0;              // np/m
  DiscretizationOptions options;

  // Draws the surface from the template's roughness spec (flat when the rms
  // height is zero) and converts the template attenuation rule.
  static LayeredDomain from_template(const HighFreqTemplate& t, int surface_points = 1024,
                                     DiscretizationOptions options = {});

  Medium medium_at(double x, double z) const;
  double sound_speed(Medium m) const;
  double density(Medium m) const;
  // Complex wavenumber w/c - i alpha.
  cplx wavenumber(Medium m) const;
};

// Node lattice of a solution. x_i = i * hx for i in [0, nx); the node at
// x = width is node 0 times `bloch`. z_j = z_min + j * hz for j in [0, nz).
// Elements span `order` node intervals in each direction.
struct FieldGrid {
  int order = 2;
  double width = 0.0;
  int nx = 0;
  double hx = 0.0;
  int nz = 0;
  double hz = 0.0;
  double z_min = 0.0;
  double phys_z_min = 0.0;  // below: bottom PML
  double phys_z_max = 0.0;  // above: top PML
  cplx bloch{1.0, 0.0};     // p(x + width) = bloch * p(x)

  double x_at(int i) const { return i * hx; }
  double z_at(int j) const { return z_min + j * hz; }
  double z_max() const { return z_at(nz - 1); }
  bool in_physical_region(double z) const { return z >= phys_z_min && z <= phys_z_max; }
};

struct SolveStats {
  std::size_t unknowns = 0;
  std::size_t nonzeros = 0;
  double residual = 0.0;  // relative algebraic residual of the accepted solution
  std::vector<double> residual_history;
};

struct DiscreteSystem {
  FieldGrid grid;
  HighFreqTemplate scene;
  Eigen::SparseMatrix<cplx> matrix;
  Eigen::VectorXcd rhs;
};

// Tensor Lagrange finite elements on a structured grid aligned with z = 0,
// materials sampled per quadrature point (sub-cell quadrature in elements
// cut by an interface), contrast source against homogeneous water.
// Throws SolverError when the interface leaves the physical region.
DiscreteSystem assemble(const LayeredDomain& domain);

// Same operator with a caller-supplied volume source f (the right-hand side
// becomes the integral of f times the test function). The source must be
// quasi-periodic with the grid's Bloch factor.
DiscreteSystem assemble_with_source(const LayeredDomain& domain,
                                    const std::function<cplx(double, double)>& source);

struct FieldSamples {
  std::vector<cplx> values;
  std::vector<cplx> radial;  // filled when a center was given
};

class FieldSolution {
 public:
  FieldSolution() = default;
  FieldSolution(FieldGrid grid, HighFreqTemplate scene, std::vector<cplx> nodal, SolveStats stats);

  // Nodal interpolant of an arbitrary function (used by tests and tools).
  static FieldSolution from_function(const FieldGrid& grid, const std::function<cplx(double, double)>& f);

  const FieldGrid& grid() const { return grid_; }
  const HighFreqTemplate& scene() const { return scene_; }
  const SolveStats& stats() const { return stats_; }
  const std::vector<cplx>& nodal() const { return nodal_; }
  cplx node(int i, int j) const { return nodal_[static_cast<std::size_t>(j) * grid_.nx + i]; }

  // Element interpolation; x wraps with the Bloch factor. Throws SamplingError
  // for points in the PMLs or outside the grid.
  cplx value(double x, double z) const;
  cplx value(double x, double z, cplx* dx, cplx* dz) const;

 private:
  FieldGrid grid_;
  HighFreqTemplate scene_;
  std::vector<cplx> nodal_;
  SolveStats stats_;
};

// Sparse LU with iterative refinement; the residual must reach 1e-8.
FieldSolution solve_scattered(const DiscreteSystem& system);

// assemble + solve_scattered.
FieldSolution solve_template(const HighFreqTemplate& t, int surface_points = 1024,
                             DiscretizationOptions options = {});

// Values and optionally d/dr about `center`.
FieldSamples sample_field(const FieldSolution& solution, const std::vector<Point2>& points,
                          std::optional<Point2> center = std::nullopt);

// Binary format: "SBFIELD1", grid spec (including the element order), solve stats, scene frequency and
// water speed, then interleaved re/im of every node, little-endian.
void write_field(std::ostream& os, const FieldSolution& s);
FieldSolution read_field(std::istream& is);
void save_field(const std::filesystem::path& path, const FieldSolution& s);
FieldSolution load_field(const std::filesystem::path& path);

}  // namespace seabed
