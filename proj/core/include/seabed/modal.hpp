#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <vector>

#include "seabed/catalog.hpp"

namespace seabed {

// One horizontally stratified fluid layer. The sound speed varies linearly
// from `c_top` to `c_bottom`; attenuation is in nepers per metre.
struct Layer {
  double thickness = 0.0;
  double c_top = 0.0;
  double c_bottom = 0.0;
  double density = 0.0;
  double attenuation = 0.0;
};

// Finite-element discretization of a layered column. Nodes z[0] = 0 .. z[N];
// cell j spans [z[j], z[j+1]] and carries piecewise constant material values.
// Layer interfaces always coincide with nodes.
struct DepthModel {
  std::vector<Layer> layers;
  std::vector<int> cells_per_layer;
  std::vector<double> z;
  std::vector<double> c;
  std::vector<double> rho;
  std::vector<double> alpha;
  std::vector<double> interfaces;  // depths of the internal layer boundaries
  // Sound speed bounding the trapped-mode window from above. Infinity for a
  // rigid duct with no halfspace.
  double halfspace_speed = std::numeric_limits<double>::infinity();
  double design_frequency = 0.0;

  std::size_t n_cells() const { return c.size(); }
  double depth() const { return z.back(); }
  double min_speed() const;
  // Cell index containing `depth`; a node on an interface belongs to the cell above.
  std::size_t cell_at(double depth) const;
};

// Discretizes an arbitrary stack of layers. The last layer is the
// (truncated) halfspace when `halfspace_speed` is finite. Throws ParameterError.
DepthModel build_layered_model(const std::vector<Layer>& layers, double frequency,
                               double points_per_wavelength, double halfspace_speed);

// Water (split at the SSP samples), sediment and `halfspace_extension` metres
// of halfspace. Throws ParameterError when the extension is shorter than one
// halfspace wavelength or ppw < 10.
DepthModel build_depth_model(const LowFreqEnvironment& env, double halfspace_extension = 150.0,
                             double points_per_wavelength = 20.0);

struct Mode {
  std::complex<double> k;  // horizontal wavenumber, 1/m
  std::vector<double> psi; // eigenfunction on ModeSet::z
};

struct ModeSet {
  double frequency = 0.0;
  std::vector<double> z;    // grid nodes
  std::vector<double> rho;  // per cell
  std::vector<Mode> modes;  // Re k strictly decreasing

  bool empty() const { return modes.empty(); }
  // Linear interpolation between nodes. Throws ParameterError outside the grid.
  double eigenfunction(std::size_t m, double depth) const;
  double density_at(double depth) const;
};

// Trapped modes of rho d/dz((1/rho) dpsi/dz) + (w/c)^2 psi = k^2 psi with a
// pressure-release surface and a rigid bottom. Eigenvalues are Richardson
// extrapolated from the model grid and its 2x refinement. An empty ModeSet
// is returned when nothing is trapped.
ModeSet solve_modes(const DepthModel& model, double frequency);

struct ComplexField {
  std::vector<std::complex<double>> values;
  bool no_modes = false;  // set when the mode set was empty
};

// Far-field modal sum with source depth `source_depth`, range `range`.
ComplexField modal_field(const ModeSet& modes, double source_depth, double range,
                         const std::vector<double>& receiver_depths);

// The field at the environment's array for its source geometry.
ComplexField pressure_field(const ModeSet& modes, const LowFreqEnvironment& env);

// Binary format: "SBMODES1", u64 mode count, u64 node count, f64 frequency,
// then k (re, im) for every mode, then the node depths, the cell densities
// and the eigenfunctions mode by mode. All little-endian.
void write_modes(std::ostream& os, const ModeSet& modes);
ModeSet read_modes(std::istream& is);
void save_modes(const std::filesystem::path& path, const ModeSet& modes);
ModeSet load_modes(const std::filesystem::path& path);

}  // namespace seabed
