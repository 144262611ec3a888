#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nsdg/dofspace.hpp"

namespace nsdg {

// Discretization of the velocity-divergence and pressure-gradient coupling
// terms: integrated by parts with central fluxes and weak boundary data, or
// the non-integrated reference form (volume term only, no boundary
// sensitivity).
enum class FluxFormulation { integrated_by_parts, reference };

// Wave speed entering the local Lax-Friedrichs flux: evaluated pointwise at
// quadrature points, or from elementwise mean velocities.
enum class LambdaMode { pointwise, element_mean };

struct OperatorConfig {
  double nu = 1.0;
  FluxFormulation formulation = FluxFormulation::integrated_by_parts;
  LambdaMode lambda_mode = LambdaMode::pointwise;
  // 0 selects the defaults k_u+1, k_p+1, floor(3 k_u / 2) + 1.
  int nq_velocity = 0;
  int nq_pressure = 0;
  int nq_convective = 0;
};

// Exterior traces on domain boundaries (mirror principle).
struct MirrorBc {
  static double velocity_value(BoundaryTag t, double u_minus, double g) {
    return t == BoundaryTag::dirichlet ? -u_minus + 2.0 * g : u_minus;
  }
  static double velocity_normal_grad(BoundaryTag t, double dudn_minus, double hu_over_nu) {
    return t == BoundaryTag::dirichlet ? dudn_minus : -dudn_minus + 2.0 * hu_over_nu;
  }
  static double pressure_value(BoundaryTag t, double p_minus, double gp) {
    return t == BoundaryTag::dirichlet ? p_minus : -p_minus + 2.0 * gp;
  }
  static double pressure_normal_grad(BoundaryTag t, double dpdn_minus, double hp) {
    return t == BoundaryTag::dirichlet ? -dpdn_minus + 2.0 * hp : dpdn_minus;
  }
};

// Boundary data sampled at face quadrature points: values[bface] is
// (n_q x components). Faces whose tag does not match the datum are ignored by
// the consuming operator.
struct FaceData {
  int n_q = 0;
  int components = 1;
  std::vector<Eigen::MatrixXd> values;
};

// f(x, n, tag, out[components]) evaluated at every face quadrature point.
using BoundarySampler = std::function<void(const Vec2& x, const Vec2& n, BoundaryTag tag, double* out)>;

FaceData sample_boundary_data(const Mesh& mesh, const QuadRule1D& rule, int components,
                              const BoundarySampler& f);

// Matrix-free application of the DG operators on a velocity/pressure space
// pair. All apply functions overwrite their output vector.
class DgOperators {
public:
  DgOperators(const SpacePair& spaces, const OperatorConfig& cfg);
  ~DgOperators();
  DgOperators(const DgOperators&) = delete;
  DgOperators& operator=(const DgOperators&) = delete;

  const SpacePair& spaces() const { return *spaces_; }
  const Mesh& mesh() const { return spaces_->velocity().mesh(); }
  const OperatorConfig& config() const { return cfg_; }

  const QuadRule1D& velocity_rule() const { return rule_u_; }
  const QuadRule1D& pressure_rule() const { return rule_p_; }
  const QuadRule1D& convective_rule() const { return rule_c_; }

  // Interior-penalty parameter tau_e = (k+1)^2 (A_int/2 + A_bnd) / V.
  double penalty_elem(int elem, int degree) const;
  double penalty_interior_face(int face_index, int degree) const;
  double penalty_boundary_face(int bface_index, int degree) const;

  // -- mass and body force ---------------------------------------------------
  void mass_apply_velocity(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
  void mass_apply_pressure(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
  void mass_solve_velocity(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
  void mass_solve_pressure(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
  void body_force_apply(const VectorFunc& f, double t, Eigen::VectorXd& out) const;

  // (v, curl u) against scalar test functions of the velocity degree, and the
  // element-local mass solve in that scalar space (vorticity projection).
  void curl_rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
  void mass_solve_velocity_scalar(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;

  // -- convective term (local Lax-Friedrichs, divergence form) ---------------
  void convective_apply(const Eigen::VectorXd& u, const FaceData& g_dirichlet,
                        Eigen::VectorXd& out) const;
  void convective_linearization_apply(const Eigen::VectorXd& u0, const Eigen::VectorXd& du,
                                      const FaceData& g_dirichlet, Eigen::VectorXd& out) const;

  // -- viscous term (SIPG, Laplace form) --------------------------------------
  void viscous_apply_hom(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
  void viscous_rhs_inhom(const FaceData& g_u, const FaceData& h_u, Eigen::VectorXd& out) const;

  // -- scalar Laplace operator (SIPG); Dirichlet/Neumann roles swapped:
  //    Dirichlet data g_p lives on the Neumann part of the flow boundary and
  //    Neumann data h_p on its Dirichlet part.
  void laplace_apply_hom(const Eigen::VectorXd& p, Eigen::VectorXd& out) const;
  void laplace_rhs_inhom(const FaceData& g_p, const FaceData& h_p, Eigen::VectorXd& out) const;

  // -- velocity divergence and pressure gradient -----------------------------
  void divergence_apply_hom(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
  void divergence_rhs_data(const FaceData& g_dirichlet, Eigen::VectorXd& out) const;
  void divergence_apply(const Eigen::VectorXd& u, const FaceData* g_dirichlet,
                        Eigen::VectorXd& out) const;

  void gradient_apply_hom(const Eigen::VectorXd& p, Eigen::VectorXd& out) const;
  void gradient_rhs_data(const FaceData& g_neumann, Eigen::VectorXd& out) const;
  void gradient_apply(const Eigen::VectorXd& p, const FaceData* g_neumann,
                      Eigen::VectorXd& out) const;

  // -- element-diagonal blocks for preconditioning ----------------------------
  // mass_coeff * M_e + nu-scaled SIPG block of the viscous operator.
  Eigen::MatrixXd momentum_element_block(int elem, double mass_coeff) const;
  Eigen::MatrixXd laplace_element_block(int elem) const;
  Eigen::MatrixXd velocity_mass_element_block(int elem) const;
  Eigen::MatrixXd pressure_mass_element_block(int elem) const;

  // Physical coordinates of the face quadrature points of one boundary face.
  std::vector<Vec2> boundary_face_points(int bface_index, const QuadRule1D& rule) const;

private:
  struct SpaceTables;  // per (space, rule) basis tables
  const SpaceTables& velocity_tables(int n_q) const;
  const SpaceTables& pressure_tables(int n_q) const;

  void sipg_apply(bool velocity_space, const Eigen::VectorXd* in, const FaceData* g,
                  const FaceData* h, Eigen::VectorXd& out) const;
  void sipg_local_apply(bool velocity_space, int elem,
                        const Eigen::MatrixXd& in_cols, Eigen::MatrixXd& out_cols) const;

  const SpacePair* spaces_;
  OperatorConfig cfg_;
  QuadRule1D rule_u_, rule_p_, rule_c_;
  std::vector<SpaceTables> vel_tables_;   // velocity basis at rule_u, rule_c
  std::vector<SpaceTables> pres_tables_;  // pressure basis at rule_p, rule_u, rule_c
  Eigen::MatrixXd mass1d_u_inv_;  // inverse 1D mass matrix, velocity space
  Eigen::MatrixXd mass1d_p_inv_;
  Eigen::MatrixXd mass1d_u_, mass1d_p_;
  std::vector<double> tau_int_u_, tau_int_p_;  // per interior face
  std::vector<double> tau_bnd_u_, tau_bnd_p_;  // per boundary face
};

}  // namespace nsdg
