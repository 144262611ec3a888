#include "nsdg/dofspace.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nsdg {

Space::Space(const Mesh& mesh, int degree, int components)
    : mesh_(&mesh), degree_(degree), components_(components), basis_(degree) {
  if (components != 1 && components != 2)
    throw std::invalid_argument("Space: components must be 1 or 2");
}

Vec2 Space::node_point(int elem, int ix, int iy) const {
  const Vec2 o = mesh_->element_origin(elem);
  const Vec2 h = mesh_->element_size();
  const auto& nodes = basis_.nodes();
  return {o[0] + h[0] * nodes[ix], o[1] + h[1] * nodes[iy]};
}

SpacePair::SpacePair(const Mesh& mesh, int degree_u, OrderMode mode)
    : mode_(mode),
      velocity_(mesh, degree_u, 2),
      pressure_(mesh, mode == OrderMode::equal ? degree_u : degree_u - 1, 1),
      velocity_scalar_(mesh, degree_u, 1) {
  if (mode == OrderMode::mixed && degree_u < 2)
    throw std::invalid_argument("SpacePair: mixed order needs k_u >= 2");
}

namespace {

void check_finite(double v) {
  if (!std::isfinite(v)) throw std::domain_error("interpolate: non-finite sample");
}

}  // namespace

CoefficientField interpolate(const Space& space, const ScalarFunc& f, double t) {
  if (space.components() != 1)
    throw std::invalid_argument("interpolate: scalar function on vector space");
  CoefficientField out(space);
  out.time = t;
  const int n = space.nodes_1d();
  for (int e = 0; e < space.mesh().n_elements(); ++e) {
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const double v = f(space.node_point(e, ix, iy), t);
        check_finite(v);
        out.coeffs(space.dof_index(e, 0, ix, iy)) = v;
      }
    }
  }
  return out;
}

CoefficientField interpolate(const Space& space, const VectorFunc& f, double t) {
  if (space.components() != 2)
    throw std::invalid_argument("interpolate: vector function on scalar space");
  CoefficientField out(space);
  out.time = t;
  const int n = space.nodes_1d();
  for (int e = 0; e < space.mesh().n_elements(); ++e) {
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const Vec2 v = f(space.node_point(e, ix, iy), t);
        check_finite(v[0]);
        check_finite(v[1]);
        out.coeffs(space.dof_index(e, 0, ix, iy)) = v[0];
        out.coeffs(space.dof_index(e, 1, ix, iy)) = v[1];
      }
    }
  }
  return out;
}

ElementValues eval_on_quad(const CoefficientField& field, int elem, const QuadRule1D& rule) {
  const Space& s = *field.space;
  const BasisTable tab = tabulate(s.basis(), rule);
  const Vec2 h = s.mesh().element_size();
  const int n = s.nodes_1d();
  ElementValues out;
  for (int c = 0; c < s.components(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> C(field.data() + s.dof_index(elem, c, 0, 0), n, n);
    out.value.push_back(tab.val * C * tab.val.transpose());
    out.grad_x.push_back((tab.der * C * tab.val.transpose()) / h[0]);
    out.grad_y.push_back((tab.val * C * tab.der.transpose()) / h[1]);
  }
  return out;
}

FaceValues trace_on_face(const CoefficientField& field, int elem, int face, const QuadRule1D& rule) {
  const Space& s = *field.space;
  const BasisTable tab = tabulate(s.basis(), rule);
  const Vec2 h = s.mesh().element_size();
  const int n = s.nodes_1d();
  const int axis = face / 2;
  const int side = face % 2;
  FaceValues out;
  for (int c = 0; c < s.components(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> C(field.data() + s.dof_index(elem, c, 0, 0), n, n);
    Eigen::VectorXd trace_coeffs, deriv_coeffs;
    if (axis == 0) {
      trace_coeffs = C.transpose() * (side ? tab.val1 : tab.val0);
      deriv_coeffs = C.transpose() * (side ? tab.der1 : tab.der0);
    } else {
      trace_coeffs = C * (side ? tab.val1 : tab.val0);
      deriv_coeffs = C * (side ? tab.der1 : tab.der0);
    }
    out.value.push_back(tab.val * trace_coeffs);
    // Outward normal: -(d/dxi) on the min side, +(d/dxi) on the max side.
    const double sign = side ? 1.0 : -1.0;
    out.normal_deriv.push_back((sign / h[axis]) * (tab.val * deriv_coeffs));
  }
  return out;
}

double value_at(const CoefficientField& field, const Vec2& x, int comp) {
  const Space& s = *field.space;
  const Mesh& m = s.mesh();
  const Vec2 h = m.element_size();
  const int nside = m.cells_per_side();
  auto clampi = [nside](int i) { return std::max(0, std::min(nside - 1, i)); };
  const int ix = clampi(static_cast<int>(std::floor((x[0] - m.origin()[0]) / h[0])));
  const int iy = clampi(static_cast<int>(std::floor((x[1] - m.origin()[1]) / h[1])));
  const int e = iy * nside + ix;
  const Vec2 o = m.element_origin(e);
  const double xi = (x[0] - o[0]) / h[0];
  const double eta = (x[1] - o[1]) / h[1];
  const int n = s.nodes_1d();
  const Eigen::VectorXd vx = s.basis().values_at(xi);
  const Eigen::VectorXd vy = s.basis().values_at(eta);
  Eigen::Map<const Eigen::MatrixXd> C(field.data() + s.dof_index(e, comp, 0, 0), n, n);
  return vx.dot(C * vy);
}

void dump_csv(const CoefficientField& field, const std::string& path, int samples_per_elem) {
  const Space& s = *field.space;
  const Mesh& m = s.mesh();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_csv: cannot open " + path);
  out << "x1,x2,component,value\n";
  const Vec2 h = m.element_size();
  const int n = s.nodes_1d();
  char line[128];
  for (int e = 0; e < m.n_elements(); ++e) {
    const Vec2 o = m.element_origin(e);
    for (int c = 0; c < s.components(); ++c) {
      Eigen::Map<const Eigen::MatrixXd> C(field.data() + s.dof_index(e, c, 0, 0), n, n);
      for (int j = 0; j < samples_per_elem; ++j) {
        const double eta = (samples_per_elem == 1) ? 0.5 : double(j) / (samples_per_elem - 1);
        const Eigen::VectorXd vy = s.basis().values_at(eta);
        for (int i = 0; i < samples_per_elem; ++i) {
          const double xi = (samples_per_elem == 1) ? 0.5 : double(i) / (samples_per_elem - 1);
          const Eigen::VectorXd vx = s.basis().values_at(xi);
          const double v = vx.dot(C * vy);
          std::snprintf(line, sizeof(line), "%.8g,%.8g,%d,%.8g\n", o[0] + h[0] * xi,
                        o[1] + h[1] * eta, c, v);
          out << line;
        }
      }
    }
  }
}

}  // namespace nsdg
