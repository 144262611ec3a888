#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsdg/mesh.hpp"
#include "nsdg/polybasis.hpp"

namespace nsdg {

using ScalarFunc = std::function<double(const Vec2&, double)>;
using VectorFunc = std::function<Vec2(const Vec2&, double)>;

// DG space of tensor-degree-k Lagrange polynomials on every element, with one
// or two components. Coefficients are element-contiguous and component-blocked:
// dof(e, c, ix, iy) = e * stride + c * (k+1)^2 + iy * (k+1) + ix.
class Space {
public:
  Space(const Mesh& mesh, int degree, int components);

  const Mesh& mesh() const { return *mesh_; }
  int degree() const { return degree_; }
  int components() const { return components_; }
  int nodes_1d() const { return degree_ + 1; }
  int dofs_per_comp() const { return nodes_1d() * nodes_1d(); }
  int elem_stride() const { return components_ * dofs_per_comp(); }
  std::size_t n_dofs() const { return static_cast<std::size_t>(mesh_->n_elements()) * elem_stride(); }
  const Basis1D& basis() const { return basis_; }

  std::size_t dof_index(int elem, int comp, int ix, int iy) const {
    return static_cast<std::size_t>(elem) * elem_stride() + comp * dofs_per_comp() +
           static_cast<std::size_t>(iy) * nodes_1d() + ix;
  }
  // Physical coordinate of a nodal point.
  Vec2 node_point(int elem, int ix, int iy) const;

private:
  const Mesh* mesh_;
  int degree_;
  int components_;
  Basis1D basis_;
};

struct CoefficientField {
  const Space* space = nullptr;
  Eigen::VectorXd coeffs;
  std::optional<double> time;

  CoefficientField() = default;
  explicit CoefficientField(const Space& s, double value = 0.0)
      : space(&s), coeffs(Eigen::VectorXd::Constant(s.n_dofs(), value)) {}
  double* data() { return coeffs.data(); }
  const double* data() const { return coeffs.data(); }
  std::size_t size() const { return static_cast<std::size_t>(coeffs.size()); }
};

// Velocity space (vector, degree k_u) paired with a pressure space (scalar,
// degree k_p). Equal-order means k_p = k_u, mixed-order k_p = k_u - 1.
enum class OrderMode { equal, mixed };

class SpacePair {
public:
  SpacePair(const Mesh& mesh, int degree_u, OrderMode mode);
  const Space& velocity() const { return velocity_; }
  const Space& pressure() const { return pressure_; }
  // Scalar companion of the velocity space (vorticity lives here).
  const Space& velocity_scalar() const { return velocity_scalar_; }
  OrderMode mode() const { return mode_; }

private:
  OrderMode mode_;
  Space velocity_;
  Space pressure_;
  Space velocity_scalar_;
};

CoefficientField interpolate(const Space& space, const ScalarFunc& f, double t);
CoefficientField interpolate(const Space& space, const VectorFunc& f, double t);

// Values and physical gradients of all components at the tensor quadrature
// points of an element; matrices are indexed (qx, qy).
struct ElementValues {
  std::vector<Eigen::MatrixXd> value;
  std::vector<Eigen::MatrixXd> grad_x;
  std::vector<Eigen::MatrixXd> grad_y;
};
ElementValues eval_on_quad(const CoefficientField& field, int elem, const QuadRule1D& rule);

// Traces on one local face at face quadrature points: values and outward
// normal derivative per component.
struct FaceValues {
  std::vector<Eigen::VectorXd> value;
  std::vector<Eigen::VectorXd> normal_deriv;
};
FaceValues trace_on_face(const CoefficientField& field, int elem, int face, const QuadRule1D& rule);

// Point evaluation (elements located by coordinates; extrapolates on the
// closest element if x falls outside the domain).
double value_at(const CoefficientField& field, const Vec2& x, int comp = 0);

// Writes x1,x2,component,value rows sampled on an (n x n) uniform grid per
// element.
void dump_csv(const CoefficientField& field, const std::string& path, int samples_per_elem = 8);

}  // namespace nsdg
