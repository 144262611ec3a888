#include "nsdg/bcdata.hpp"

#include <stdexcept>

namespace nsdg {

void History::push(double t, CoefficientField u, CoefficientField p) {
  Entry e;
  e.t = t;
  e.u = std::move(u);
  e.p = std::move(p);
  entries_.push_front(std::move(e));
  while (entries_.size() > capacity_) entries_.pop_back();
}

const CoefficientField& History::omega(std::size_t i, const DgOperators& ops) {
  Entry& e = entries_.at(i);
  if (!e.omega) e.omega = vorticity_project(ops, e.u);
  return *e.omega;
}

CoefficientField vorticity_project(const DgOperators& ops, const CoefficientField& u) {
  CoefficientField w(ops.spaces().velocity_scalar());
  w.time = u.time;
  Eigen::VectorXd rhs(w.coeffs.size());
  ops.curl_rhs(u.coeffs, rhs);
  ops.mass_solve_velocity_scalar(rhs, w.coeffs);
  return w;
}

namespace {

// Values and full physical gradients of all components of a field on one
// boundary face, at the points of a 1D rule along the face.
struct FaceEval {
  Eigen::MatrixXd val, gx, gy;  // n_q x components
};

FaceEval eval_on_boundary_face(const CoefficientField& f, const BoundaryFace& bf,
                               const BasisTable& tab, const Vec2& h) {
  const Space& S = *f.space;
  const int n = S.nodes_1d();
  const int nq = static_cast<int>(tab.val.rows());
  const int axis = bf.face / 2;
  const int side = bf.face % 2;
  FaceEval out;
  out.val.resize(nq, S.components());
  out.gx.resize(nq, S.components());
  out.gy.resize(nq, S.components());
  for (int c = 0; c < S.components(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> C(f.data() + S.dof_index(bf.elem, c, 0, 0), n, n);
    Eigen::VectorXd tv, dn;  // trace coefficients and normal-direction slice
    if (axis == 0) {
      tv = C.row(side ? n - 1 : 0).transpose();
      dn = C.transpose() * (side ? tab.der1 : tab.der0);
    } else {
      tv = C.col(side ? n - 1 : 0);
      dn = C * (side ? tab.der1 : tab.der0);
    }
    out.val.col(c) = tab.val * tv;
    // derivative along the face axis (not outward-signed) and tangentially
    Eigen::VectorXd d_axis = (tab.val * dn) / h[axis];
    Eigen::VectorXd d_tang = (tab.der * tv) / h[1 - axis];
    if (axis == 0) {
      out.gx.col(c) = d_axis;
      out.gy.col(c) = d_tang;
    } else {
      out.gx.col(c) = d_tang;
      out.gy.col(c) = d_axis;
    }
  }
  return out;
}

}  // namespace

FaceData pressure_neumann_hp(const DgOperators& ops, History& history, const BcSet& bc,
                             double t_next, int jp, const QuadRule1D& rule) {
  const BdfCoefficients coeffs = BdfCoefficients::make(jp == 0 ? 1 : jp, jp);
  if (static_cast<int>(history.size()) < jp)
    throw std::invalid_argument("pressure_neumann_hp: insufficient history");
  const Mesh& mesh = ops.mesh();
  const Vec2 h = mesh.element_size();
  const BasisTable tab = tabulate(ops.spaces().velocity().basis(), rule);

  FaceData data;
  data.n_q = rule.size();
  data.components = 1;
  data.values.assign(mesh.boundary_faces().size(), Eigen::MatrixXd::Zero(rule.size(), 1));

  for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = mesh.boundary_faces()[bi];
    if (bf.tag != BoundaryTag::dirichlet) continue;
    const std::vector<Vec2> pts = ops.boundary_face_points(static_cast<int>(bi), rule);
    Eigen::MatrixXd term = Eigen::MatrixXd::Zero(rule.size(), 2);
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 gdot = bc.dg_u_dt(pts[q], t_next);
      term(q, 0) += gdot[0];
      term(q, 1) += gdot[1];
      if (bc.body_force) {
        const Vec2 f = bc.body_force(pts[q], t_next);
        term(q, 0) -= f[0];
        term(q, 1) -= f[1];
      }
    }
    for (int i = 0; i < jp; ++i) {
      const double beta = coeffs.beta[i];
      if (bc.convective_on) {
        const FaceEval ue = eval_on_boundary_face(history.velocity(i), bf, tab, h);
        for (int q = 0; q < rule.size(); ++q) {
          const double div_u = ue.gx(q, 0) + ue.gy(q, 1);
          // u (div u) + (grad u) u
          term(q, 0) += beta * (ue.val(q, 0) * div_u + ue.gx(q, 0) * ue.val(q, 0) +
                                ue.gy(q, 0) * ue.val(q, 1));
          term(q, 1) += beta * (ue.val(q, 1) * div_u + ue.gx(q, 1) * ue.val(q, 0) +
                                ue.gy(q, 1) * ue.val(q, 1));
        }
      }
      const FaceEval we = eval_on_boundary_face(history.omega(i, ops), bf, tab, h);
      for (int q = 0; q < rule.size(); ++q) {
        // curl of the scalar vorticity: (d omega/dy, -d omega/dx)
        term(q, 0) += beta * bc.nu * we.gy(q, 0);
        term(q, 1) -= beta * bc.nu * we.gx(q, 0);
      }
    }
    for (int q = 0; q < rule.size(); ++q)
      data.values[bi](q, 0) = -(term(q, 0) * bf.normal[0] + term(q, 1) * bf.normal[1]);
  }
  return data;
}

FaceData intermediate_velocity_bc_ghat(const DgOperators& ops, const History& history,
                                       const BcSet& bc, double t_next, int j, double dt,
                                       const QuadRule1D& rule) {
  const BdfCoefficients coeffs = BdfCoefficients::make(j, j);
  if (static_cast<int>(history.size()) < j)
    throw std::invalid_argument("intermediate_velocity_bc_ghat: insufficient history");
  const Mesh& mesh = ops.mesh();
  const Vec2 h = mesh.element_size();
  const BasisTable tab = tabulate(ops.spaces().velocity().basis(), rule);
  const double g0 = coeffs.gamma0;

  FaceData data;
  data.n_q = rule.size();
  data.components = 2;
  data.values.assign(mesh.boundary_faces().size(), Eigen::MatrixXd::Zero(rule.size(), 2));

  for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = mesh.boundary_faces()[bi];
    if (bf.tag != BoundaryTag::dirichlet) continue;
    const std::vector<Vec2> pts = ops.boundary_face_points(static_cast<int>(bi), rule);
    Eigen::MatrixXd& val = data.values[bi];
    for (int i = 0; i < j; ++i) {
      const double t_old = history.entry(i).t;
      const double w = coeffs.alpha[i] / g0;
      for (int q = 0; q < rule.size(); ++q) {
        const Vec2 g = bc.g_u(pts[q], t_old);
        val(q, 0) += w * g[0];
        val(q, 1) += w * g[1];
      }
    }
    if (bc.convective_on) {
      for (int i = 0; i < j; ++i) {
        const double w = dt / g0 * coeffs.beta[i];
        const FaceEval ue = eval_on_boundary_face(history.velocity(i), bf, tab, h);
        for (int q = 0; q < rule.size(); ++q) {
          const double div_u = ue.gx(q, 0) + ue.gy(q, 1);
          val(q, 0) -= w * (ue.val(q, 0) * div_u + ue.gx(q, 0) * ue.val(q, 0) +
                            ue.gy(q, 0) * ue.val(q, 1));
          val(q, 1) -= w * (ue.val(q, 1) * div_u + ue.gx(q, 1) * ue.val(q, 0) +
                            ue.gy(q, 1) * ue.val(q, 1));
        }
      }
    }
    if (bc.body_force) {
      for (int q = 0; q < rule.size(); ++q) {
        const Vec2 f = bc.body_force(pts[q], t_next);
        val(q, 0) += dt / g0 * f[0];
        val(q, 1) += dt / g0 * f[1];
      }
    }
  }
  return data;
}

ScalarFunc pressure_correction_phi_g(const BcSet& bc, double t_next, double dt, int jp) {
  const BdfCoefficients coeffs = BdfCoefficients::make(jp == 0 ? 1 : jp, jp);
  return [gp = bc.g_p, t_next, dt, beta = coeffs.beta](const Vec2& x, double) {
    double v = gp(x, t_next);
    for (std::size_t i = 0; i < beta.size(); ++i)
      v -= beta[i] * gp(x, t_next - (1.0 + static_cast<double>(i)) * dt);
    return v;
  };
}

}  // namespace nsdg
