#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "nsdg/bdf.hpp"
#include "nsdg/operators.hpp"

namespace nsdg {

// Boundary data of the flow problem. g_u and its time derivative live on the
// Dirichlet part, h_u and g_p on the Neumann part. h_u takes the outward
// normal; the body force may be empty (zero).
struct BcSet {
  VectorFunc g_u;
  VectorFunc dg_u_dt;
  std::function<Vec2(const Vec2&, double, const Vec2&)> h_u;
  ScalarFunc g_p;
  VectorFunc body_force;
  double nu = 1.0;
  bool convective_on = false;
  bool pure_dirichlet = false;
};

// Ring of previous time levels, newest first: entry(0) holds t_n. The
// vorticity projection of each stored velocity is computed on demand and
// cached with the entry.
class History {
public:
  struct Entry {
    double t = 0.0;
    CoefficientField u;
    CoefficientField p;
    std::optional<CoefficientField> omega;
  };

  explicit History(std::size_t capacity = 3) : capacity_(capacity) {}
  void push(double t, CoefficientField u, CoefficientField p);
  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  const CoefficientField& velocity(std::size_t i) const { return entries_.at(i).u; }
  const CoefficientField& pressure(std::size_t i) const { return entries_.at(i).p; }
  // Vorticity of velocity level i as a scalar field of the velocity degree.
  const CoefficientField& omega(std::size_t i, const DgOperators& ops);

private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

CoefficientField vorticity_project(const DgOperators& ops, const CoefficientField& u);

// Consistent pressure Neumann datum on the Dirichlet boundary,
//   h_p = -[dg_u/dt + sum_i beta_i (div F_c(u^{n-i}) + nu curl omega^{n-i})
//           - f(t_{n+1})] . n,
// with the discrete convective divergence u (div u) + (grad u) u evaluated
// from the element-local polynomials and the curl taken of the projected
// vorticity. The convective part is skipped when bc.convective_on is false.
FaceData pressure_neumann_hp(const DgOperators& ops, History& history, const BcSet& bc,
                             double t_next, int jp, const QuadRule1D& rule);

// Consistent Dirichlet datum for the intermediate velocity,
//   g_hat = sum_i (alpha_i/gamma0) g_u(t_{n-i})
//           - (dt/gamma0) sum_i beta_i div F_c(u^{n-i})
//           + (dt/gamma0) f(t_{n+1}).
FaceData intermediate_velocity_bc_ghat(const DgOperators& ops, const History& history,
                                       const BcSet& bc, double t_next, int j, double dt,
                                       const QuadRule1D& rule);

// Pressure-increment boundary data: h_phi = 0 on the Dirichlet part and
// g_phi = g_p(t_{n+1}) - sum_i beta_i g_p(t_{n-i}) on the Neumann part.
ScalarFunc pressure_correction_phi_g(const BcSet& bc, double t_next, double dt, int jp);

}  // namespace nsdg
