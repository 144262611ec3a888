#include "nsdg/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace nsdg {

struct DgOperators::SpaceTables {
  QuadRule1D rule;
  Eigen::VectorXd w;   // 1D weights
  Eigen::MatrixXd W;   // w * w^T
  BasisTable tab;
};

namespace {

using MapMat = Eigen::Map<Eigen::MatrixXd>;
using CMapMat = Eigen::Map<const Eigen::MatrixXd>;

// Trace of one component on a local face: values and outward normal
// derivative at the face quadrature points.
void face_trace_comp(const CMapMat& C, int face, const BasisTable& tab, const Vec2& h,
                     Eigen::Ref<Eigen::VectorXd> value, Eigen::Ref<Eigen::VectorXd> nderiv,
                     Eigen::VectorXd& tmp) {
  const int axis = face / 2;
  const int side = face % 2;
  const int n = static_cast<int>(C.rows());
  const Eigen::VectorXd& dend = side ? tab.der1 : tab.der0;
  const double sign = side ? 1.0 : -1.0;
  if (axis == 0) {
    value.noalias() = tab.val * C.row(side ? n - 1 : 0).transpose();
    tmp.noalias() = C.transpose() * dend;
  } else {
    value.noalias() = tab.val * C.col(side ? n - 1 : 0);
    tmp.noalias() = C * dend;
  }
  nderiv.noalias() = (sign / h[axis]) * (tab.val * tmp);
}

// Adjoint scatter of a face integrand tested with the trace of v.
void scatter_value(MapMat& out, int face, const BasisTable& tab, const Eigen::VectorXd& g,
                   Eigen::VectorXd& tmp) {
  const int axis = face / 2;
  const int side = face % 2;
  const int n = static_cast<int>(out.rows());
  tmp.noalias() = tab.val.transpose() * g;
  if (axis == 0)
    out.row(side ? n - 1 : 0) += tmp.transpose();
  else
    out.col(side ? n - 1 : 0) += tmp;
}

// Adjoint scatter of a face integrand tested with grad(v).n (outward).
void scatter_normal_deriv(MapMat& out, int face, const BasisTable& tab, const Vec2& h,
                          const Eigen::VectorXd& g, Eigen::VectorXd& tmp) {
  const int axis = face / 2;
  const int side = face % 2;
  const double sign = side ? 1.0 : -1.0;
  tmp.noalias() = tab.val.transpose() * g;
  const Eigen::VectorXd& dend = side ? tab.der1 : tab.der0;
  if (axis == 0)
    out += (sign / h[0]) * (dend * tmp.transpose());
  else
    out += (sign / h[1]) * (tmp * dend.transpose());
}

}  // namespace

FaceData sample_boundary_data(const Mesh& mesh, const QuadRule1D& rule, int components,
                              const BoundarySampler& f) {
  FaceData data;
  data.n_q = rule.size();
  data.components = components;
  data.values.reserve(mesh.boundary_faces().size());
  const Vec2 h = mesh.element_size();
  std::vector<double> buf(components);
  for (const BoundaryFace& bf : mesh.boundary_faces()) {
    const int axis = bf.face / 2;
    const int side = bf.face % 2;
    const Vec2 o = mesh.element_origin(bf.elem);
    Eigen::MatrixXd vals(rule.size(), components);
    for (int q = 0; q < rule.size(); ++q) {
      Vec2 x;
      x[axis] = o[axis] + (side ? h[axis] : 0.0);
      x[1 - axis] = o[1 - axis] + h[1 - axis] * rule.points[q];
      f(x, bf.normal, bf.tag, buf.data());
      for (int c = 0; c < components; ++c) vals(q, c) = buf[c];
    }
    data.values.push_back(std::move(vals));
  }
  return data;
}

DgOperators::DgOperators(const SpacePair& spaces, const OperatorConfig& cfg)
    : spaces_(&spaces), cfg_(cfg) {
  const int ku = spaces.velocity().degree();
  const int kp = spaces.pressure().degree();
  rule_u_ = gauss_rule(cfg.nq_velocity > 0 ? cfg.nq_velocity : ku + 1);
  rule_p_ = gauss_rule(cfg.nq_pressure > 0 ? cfg.nq_pressure : kp + 1);
  rule_c_ = gauss_rule(cfg.nq_convective > 0 ? cfg.nq_convective : (3 * ku) / 2 + 1);

  auto make_tables = [](const Basis1D& basis, const QuadRule1D& rule) {
    SpaceTables t;
    t.rule = rule;
    t.w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), rule.size());
    t.W = t.w * t.w.transpose();
    t.tab = tabulate(basis, rule);
    return t;
  };
  vel_tables_.push_back(make_tables(spaces.velocity().basis(), rule_u_));
  vel_tables_.push_back(make_tables(spaces.velocity().basis(), rule_c_));
  pres_tables_.push_back(make_tables(spaces.pressure().basis(), rule_p_));
  pres_tables_.push_back(make_tables(spaces.pressure().basis(), rule_u_));
  pres_tables_.push_back(make_tables(spaces.pressure().basis(), rule_c_));

  auto mass_1d = [](const SpaceTables& t) -> Eigen::MatrixXd {
    return t.tab.val.transpose() * t.w.asDiagonal() * t.tab.val;
  };
  mass1d_u_ = mass_1d(vel_tables_[0]);
  mass1d_p_ = mass_1d(pres_tables_[0]);
  mass1d_u_inv_ = mass1d_u_.inverse();
  mass1d_p_inv_ = mass1d_p_.inverse();

  const Mesh& mesh = spaces.velocity().mesh();
  auto fill_tau = [&](int degree, std::vector<double>& tau_int, std::vector<double>& tau_bnd) {
    std::vector<double> tau_e(mesh.n_elements());
    for (int e = 0; e < mesh.n_elements(); ++e) tau_e[e] = penalty_elem(e, degree);
    tau_int.resize(mesh.interior_faces().size());
    for (std::size_t i = 0; i < mesh.interior_faces().size(); ++i) {
      const InteriorFace& f = mesh.interior_faces()[i];
      tau_int[i] = std::max(tau_e[f.elem_minus], tau_e[f.elem_plus]);
    }
    tau_bnd.resize(mesh.boundary_faces().size());
    for (std::size_t i = 0; i < mesh.boundary_faces().size(); ++i)
      tau_bnd[i] = tau_e[mesh.boundary_faces()[i].elem];
  };
  fill_tau(ku, tau_int_u_, tau_bnd_u_);
  fill_tau(kp, tau_int_p_, tau_bnd_p_);
}

DgOperators::~DgOperators() = default;

const DgOperators::SpaceTables& DgOperators::velocity_tables(int n_q) const {
  for (const SpaceTables& t : vel_tables_)
    if (t.rule.size() == n_q) return t;
  throw std::invalid_argument("DgOperators: no velocity tables for this rule size");
}

const DgOperators::SpaceTables& DgOperators::pressure_tables(int n_q) const {
  for (const SpaceTables& t : pres_tables_)
    if (t.rule.size() == n_q) return t;
  throw std::invalid_argument("DgOperators: no pressure tables for this rule size");
}

double DgOperators::penalty_elem(int elem, int degree) const {
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const double volume = h[0] * h[1];
  if (volume <= 0.0) throw std::invalid_argument("penalty_elem: degenerate element");
  double a_int = 0.0, a_bnd = 0.0;
  const auto faces = mesh.faces_of(elem);
  for (int f = 0; f < 4; ++f) {
    const double len = h[1 - f / 2];
    if (faces[f].boundary)
      a_bnd += len;
    else
      a_int += len;
  }
  const double kp1 = degree + 1.0;
  return kp1 * kp1 * (0.5 * a_int + a_bnd) / volume;
}

double DgOperators::penalty_interior_face(int face_index, int degree) const {
  if (degree == spaces_->velocity().degree()) return tau_int_u_[face_index];
  if (degree == spaces_->pressure().degree()) return tau_int_p_[face_index];
  throw std::invalid_argument("penalty_interior_face: unknown degree");
}

double DgOperators::penalty_boundary_face(int bface_index, int degree) const {
  if (degree == spaces_->velocity().degree()) return tau_bnd_u_[bface_index];
  if (degree == spaces_->pressure().degree()) return tau_bnd_p_[bface_index];
  throw std::invalid_argument("penalty_boundary_face: unknown degree");
}

// ---------------------------------------------------------------------------
// mass and body force
// ---------------------------------------------------------------------------

namespace {

void mass_apply_space(const Space& S, const Eigen::MatrixXd& W, const Eigen::MatrixXd& val,
                      double area, const Eigen::VectorXd& in, Eigen::VectorXd& out) {
  const int n = S.nodes_1d();
  const int nq = static_cast<int>(val.rows());
  Eigen::MatrixXd t1(nq, n), uq(nq, nq), t2(n, nq);
  out.setZero();
  for (int e = 0; e < S.mesh().n_elements(); ++e) {
    for (int c = 0; c < S.components(); ++c) {
      CMapMat C(in.data() + S.dof_index(e, c, 0, 0), n, n);
      MapMat O(out.data() + S.dof_index(e, c, 0, 0), n, n);
      t1.noalias() = val * C;
      uq.noalias() = t1 * val.transpose();
      uq.array() *= W.array();
      t2.noalias() = val.transpose() * uq;
      O.noalias() += area * (t2 * val);
    }
  }
}

void mass_solve_space(const Space& S, const Eigen::MatrixXd& minv, double area,
                      const Eigen::VectorXd& in, Eigen::VectorXd& out) {
  const int n = S.nodes_1d();
  Eigen::MatrixXd t(n, n);
  out.setZero();
  for (int e = 0; e < S.mesh().n_elements(); ++e) {
    for (int c = 0; c < S.components(); ++c) {
      CMapMat B(in.data() + S.dof_index(e, c, 0, 0), n, n);
      MapMat X(out.data() + S.dof_index(e, c, 0, 0), n, n);
      t.noalias() = minv * B;
      X.noalias() = (t * minv) / area;
    }
  }
}

}  // namespace

void DgOperators::mass_apply_velocity(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  const Vec2 h = mesh().element_size();
  mass_apply_space(spaces_->velocity(), vel_tables_[0].W, vel_tables_[0].tab.val, h[0] * h[1], in,
                   out);
}

void DgOperators::mass_apply_pressure(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  const Vec2 h = mesh().element_size();
  mass_apply_space(spaces_->pressure(), pres_tables_[0].W, pres_tables_[0].tab.val, h[0] * h[1],
                   in, out);
}

void DgOperators::mass_solve_velocity(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  const Vec2 h = mesh().element_size();
  mass_solve_space(spaces_->velocity(), mass1d_u_inv_, h[0] * h[1], in, out);
}

void DgOperators::mass_solve_pressure(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  const Vec2 h = mesh().element_size();
  mass_solve_space(spaces_->pressure(), mass1d_p_inv_, h[0] * h[1], in, out);
}

void DgOperators::curl_rhs(const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
  const Space& SU = spaces_->velocity();
  const Space& SW = spaces_->velocity_scalar();
  const SpaceTables& T = vel_tables_[0];
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const int n = SU.nodes_1d();
  const int nq = T.rule.size();
  Eigen::MatrixXd t1(nq, n), G(nq, nq), t2(n, nq);
  out.setZero();
  for (int e = 0; e < mesh.n_elements(); ++e) {
    CMapMat C1(u.data() + SU.dof_index(e, 0, 0, 0), n, n);
    CMapMat C2(u.data() + SU.dof_index(e, 1, 0, 0), n, n);
    MapMat O(out.data() + SW.dof_index(e, 0, 0, 0), n, n);
    t1.noalias() = T.tab.der * C2;
    G.noalias() = (1.0 / h[0]) * (t1 * T.tab.val.transpose());
    t1.noalias() = T.tab.val * C1;
    G.noalias() -= (1.0 / h[1]) * (t1 * T.tab.der.transpose());
    G.array() *= T.W.array();
    t2.noalias() = T.tab.val.transpose() * G;
    O.noalias() += (h[0] * h[1]) * (t2 * T.tab.val);
  }
}

void DgOperators::mass_solve_velocity_scalar(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  const Vec2 h = mesh().element_size();
  mass_solve_space(spaces_->velocity_scalar(), mass1d_u_inv_, h[0] * h[1], in, out);
}

void DgOperators::body_force_apply(const VectorFunc& f, double t, Eigen::VectorXd& out) const {
  const Space& S = spaces_->velocity();
  const SpaceTables& T = vel_tables_[0];
  const int n = S.nodes_1d();
  const int nq = T.rule.size();
  const Vec2 h = mesh().element_size();
  const double area = h[0] * h[1];
  Eigen::MatrixXd F1(nq, nq), F2(nq, nq), t2(n, nq);
  out.setZero();
  for (int e = 0; e < mesh().n_elements(); ++e) {
    const Vec2 o = mesh().element_origin(e);
    for (int qy = 0; qy < nq; ++qy) {
      for (int qx = 0; qx < nq; ++qx) {
        const Vec2 x{o[0] + h[0] * T.rule.points[qx], o[1] + h[1] * T.rule.points[qy]};
        const Vec2 v = f(x, t);
        F1(qx, qy) = v[0];
        F2(qx, qy) = v[1];
      }
    }
    F1.array() *= T.W.array();
    F2.array() *= T.W.array();
    MapMat O1(out.data() + S.dof_index(e, 0, 0, 0), n, n);
    MapMat O2(out.data() + S.dof_index(e, 1, 0, 0), n, n);
    t2.noalias() = T.tab.val.transpose() * F1;
    O1.noalias() += area * (t2 * T.tab.val);
    t2.noalias() = T.tab.val.transpose() * F2;
    O2.noalias() += area * (t2 * T.tab.val);
  }
}

// ---------------------------------------------------------------------------
// SIPG (viscous and pressure Laplace)
// ---------------------------------------------------------------------------

void DgOperators::sipg_apply(bool velocity_space, const Eigen::VectorXd* in, const FaceData* g,
                             const FaceData* h_data, Eigen::VectorXd& out) const {
  const Space& S = velocity_space ? spaces_->velocity() : spaces_->pressure();
  const SpaceTables& T = velocity_space ? vel_tables_[0] : pres_tables_[0];
  const std::vector<double>& tau_int = velocity_space ? tau_int_u_ : tau_int_p_;
  const std::vector<double>& tau_bnd = velocity_space ? tau_bnd_u_ : tau_bnd_p_;
  const double nu = velocity_space ? cfg_.nu : 1.0;
  // The pressure Poisson equation swaps the roles of the flow-problem tags.
  const BoundaryTag dirichlet_like = velocity_space ? BoundaryTag::dirichlet : BoundaryTag::neumann;
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const int n = S.nodes_1d();
  const int nq = T.rule.size();
  const int comps = S.components();

  out.setZero();
  if (in) {
    // volume: (grad v, nu grad u)
    Eigen::MatrixXd t1(nq, n), q1(nq, nq), t2(n, nq);
    for (int e = 0; e < mesh.n_elements(); ++e) {
      for (int c = 0; c < comps; ++c) {
        CMapMat C(in->data() + S.dof_index(e, c, 0, 0), n, n);
        MapMat O(out.data() + S.dof_index(e, c, 0, 0), n, n);
        t1.noalias() = T.tab.der * C;
        q1.noalias() = t1 * T.tab.val.transpose();
        q1.array() *= T.W.array();
        t2.noalias() = T.tab.der.transpose() * q1;
        O.noalias() += (nu * h[1] / h[0]) * (t2 * T.tab.val);
        t1.noalias() = T.tab.val * C;
        q1.noalias() = t1 * T.tab.der.transpose();
        q1.array() *= T.W.array();
        t2.noalias() = T.tab.val.transpose() * q1;
        O.noalias() += (nu * h[0] / h[1]) * (t2 * T.tab.der);
      }
    }

    Eigen::MatrixXd tm(nq, comps), tp(nq, comps), ndm(nq, comps), ndp(nq, comps);
    Eigen::VectorXd jump(nq), avgdn(nq), flux(nq), gv(nq), gd(nq), tmp(n);
    for (std::size_t fi = 0; fi < mesh.interior_faces().size(); ++fi) {
      const InteriorFace& f = mesh.interior_faces()[fi];
      const int axis = f.face_minus / 2;
      const double ht = h[1 - axis];
      const double tau = tau_int[fi];
      for (int c = 0; c < comps; ++c) {
        CMapMat Cm(in->data() + S.dof_index(f.elem_minus, c, 0, 0), n, n);
        CMapMat Cp(in->data() + S.dof_index(f.elem_plus, c, 0, 0), n, n);
        face_trace_comp(Cm, f.face_minus, T.tab, h, tm.col(c), ndm.col(c), tmp);
        face_trace_comp(Cp, f.face_plus, T.tab, h, tp.col(c), ndp.col(c), tmp);
      }
      for (int c = 0; c < comps; ++c) {
        MapMat Om(out.data() + S.dof_index(f.elem_minus, c, 0, 0), n, n);
        MapMat Op(out.data() + S.dof_index(f.elem_plus, c, 0, 0), n, n);
        jump = tm.col(c) - tp.col(c);
        avgdn = 0.5 * (ndm.col(c) - ndp.col(c));
        flux = nu * avgdn - (nu * tau) * jump;
        gv = (-ht) * T.w.cwiseProduct(flux);
        scatter_value(Om, f.face_minus, T.tab, gv, tmp);
        gv = ht * T.w.cwiseProduct(flux);
        scatter_value(Op, f.face_plus, T.tab, gv, tmp);
        gd = (-0.5 * nu * ht) * T.w.cwiseProduct(jump);
        scatter_normal_deriv(Om, f.face_minus, T.tab, h, gd, tmp);
        gd = (0.5 * nu * ht) * T.w.cwiseProduct(jump);
        scatter_normal_deriv(Op, f.face_plus, T.tab, h, gd, tmp);
      }
    }
    // homogeneous boundary terms (zero data)
    for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
      const BoundaryFace& bf = mesh.boundary_faces()[bi];
      if (bf.tag != dirichlet_like) continue;  // Neumann-like is data-only
      const int axis = bf.face / 2;
      const double ht = h[1 - axis];
      const double tau = tau_bnd[bi];
      for (int c = 0; c < comps; ++c) {
        CMapMat Cm(in->data() + S.dof_index(bf.elem, c, 0, 0), n, n);
        MapMat Om(out.data() + S.dof_index(bf.elem, c, 0, 0), n, n);
        face_trace_comp(Cm, bf.face, T.tab, h, tm.col(0), ndm.col(0), tmp);
        flux = nu * ndm.col(0) - (2.0 * nu * tau) * tm.col(0);
        gv = (-ht) * T.w.cwiseProduct(flux);
        scatter_value(Om, bf.face, T.tab, gv, tmp);
        gd = (-nu * ht) * T.w.cwiseProduct(tm.col(0));
        scatter_normal_deriv(Om, bf.face, T.tab, h, gd, tmp);
      }
    }
  }

  if (g || h_data) {
    const int nq_d = g ? g->n_q : h_data->n_q;
    if (g && h_data && g->n_q != h_data->n_q)
      throw std::invalid_argument("sipg inhomogeneous data sampled on different rules");
    const SpaceTables& TD = velocity_space ? velocity_tables(nq_d) : pressure_tables(nq_d);
    Eigen::VectorXd gv(nq_d), gd(nq_d), tmp(n);
    for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
      const BoundaryFace& bf = mesh.boundary_faces()[bi];
      const int axis = bf.face / 2;
      const double ht = h[1 - axis];
      const double tau = tau_bnd[bi];
      for (int c = 0; c < comps; ++c) {
        MapMat Om(out.data() + S.dof_index(bf.elem, c, 0, 0), n, n);
        if (bf.tag == dirichlet_like && g) {
          const auto gcol = g->values[bi].col(c);
          // -(v, 2 nu tau g) and +(grad v . n, nu g)
          gv = (-2.0 * nu * tau * ht) * TD.w.cwiseProduct(gcol);
          scatter_value(Om, bf.face, TD.tab, gv, tmp);
          gd = (nu * ht) * TD.w.cwiseProduct(gcol);
          scatter_normal_deriv(Om, bf.face, TD.tab, h, gd, tmp);
        } else if (bf.tag != dirichlet_like && h_data) {
          // -(v, h)
          const auto hcol = h_data->values[bi].col(c);
          gv = (-ht) * TD.w.cwiseProduct(hcol);
          scatter_value(Om, bf.face, TD.tab, gv, tmp);
        }
      }
    }
  }
}

void DgOperators::viscous_apply_hom(const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
  sipg_apply(true, &u, nullptr, nullptr, out);
}

void DgOperators::viscous_rhs_inhom(const FaceData& g_u, const FaceData& h_u,
                                    Eigen::VectorXd& out) const {
  sipg_apply(true, nullptr, &g_u, &h_u, out);
}

void DgOperators::laplace_apply_hom(const Eigen::VectorXd& p, Eigen::VectorXd& out) const {
  sipg_apply(false, &p, nullptr, nullptr, out);
}

void DgOperators::laplace_rhs_inhom(const FaceData& g_p, const FaceData& h_p,
                                    Eigen::VectorXd& out) const {
  sipg_apply(false, nullptr, &g_p, &h_p, out);
}

// ---------------------------------------------------------------------------
// divergence and gradient (central fluxes / reference forms)
// ---------------------------------------------------------------------------

void DgOperators::divergence_apply_hom(const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
  const Space& SU = spaces_->velocity();
  const Space& SP = spaces_->pressure();
  const SpaceTables& TU = vel_tables_[0];
  const SpaceTables& TP = pres_tables_[1];  // pressure basis at the velocity rule
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const int nu_ = SU.nodes_1d();
  const int np = SP.nodes_1d();
  const int nq = TU.rule.size();

  out.setZero();
  Eigen::MatrixXd t1(nq, nu_), Uq(nq, nq), t2(np, nq);
  if (cfg_.formulation == FluxFormulation::reference) {
    // (q, div u): volume only, no boundary sensitivity
    Eigen::MatrixXd divq(nq, nq);
    for (int e = 0; e < mesh.n_elements(); ++e) {
      CMapMat C1(u.data() + SU.dof_index(e, 0, 0, 0), nu_, nu_);
      CMapMat C2(u.data() + SU.dof_index(e, 1, 0, 0), nu_, nu_);
      MapMat O(out.data() + SP.dof_index(e, 0, 0, 0), np, np);
      t1.noalias() = TU.tab.der * C1;
      divq.noalias() = (1.0 / h[0]) * (t1 * TU.tab.val.transpose());
      t1.noalias() = TU.tab.val * C2;
      divq.noalias() += (1.0 / h[1]) * (t1 * TU.tab.der.transpose());
      divq.array() *= TU.W.array();
      t2.noalias() = TP.tab.val.transpose() * divq;
      O.noalias() += (h[0] * h[1]) * (t2 * TP.tab.val);
    }
    return;
  }

  // -(grad q, u)
  for (int e = 0; e < mesh.n_elements(); ++e) {
    CMapMat C1(u.data() + SU.dof_index(e, 0, 0, 0), nu_, nu_);
    CMapMat C2(u.data() + SU.dof_index(e, 1, 0, 0), nu_, nu_);
    MapMat O(out.data() + SP.dof_index(e, 0, 0, 0), np, np);
    t1.noalias() = TU.tab.val * C1;
    Uq.noalias() = t1 * TU.tab.val.transpose();
    Uq.array() *= TU.W.array();
    t2.noalias() = TP.tab.der.transpose() * Uq;
    O.noalias() -= h[1] * (t2 * TP.tab.val);
    t1.noalias() = TU.tab.val * C2;
    Uq.noalias() = t1 * TU.tab.val.transpose();
    Uq.array() *= TU.W.array();
    t2.noalias() = TP.tab.val.transpose() * Uq;
    O.noalias() -= h[0] * (t2 * TP.tab.der);
  }

  // interior faces: (q, {u}.n), tested from both sides
  Eigen::VectorXd tm(nq), tp(nq), nd(nq), phi(nq), gv(nq), tmp(std::max(nu_, np));
  Eigen::VectorXd tmpn(nu_), tmpp(np);
  for (std::size_t fi = 0; fi < mesh.interior_faces().size(); ++fi) {
    const InteriorFace& f = mesh.interior_faces()[fi];
    const int axis = f.face_minus / 2;
    const double ht = h[1 - axis];
    CMapMat Cm(u.data() + SU.dof_index(f.elem_minus, axis, 0, 0), nu_, nu_);
    CMapMat Cp(u.data() + SU.dof_index(f.elem_plus, axis, 0, 0), nu_, nu_);
    face_trace_comp(Cm, f.face_minus, TU.tab, h, tm, nd, tmpn);
    face_trace_comp(Cp, f.face_plus, TU.tab, h, tp, nd, tmpn);
    phi = 0.5 * (tm + tp);  // {u}.n with n = +e_axis
    MapMat Om(out.data() + SP.dof_index(f.elem_minus, 0, 0, 0), np, np);
    MapMat Op(out.data() + SP.dof_index(f.elem_plus, 0, 0, 0), np, np);
    gv = ht * TU.w.cwiseProduct(phi);
    scatter_value(Om, f.face_minus, TP.tab, gv, tmpp);
    gv = (-ht) * TU.w.cwiseProduct(phi);
    scatter_value(Op, f.face_plus, TP.tab, gv, tmpp);
  }
  // Neumann boundary: (q, u-.n); Dirichlet boundary carries only data terms.
  for (const BoundaryFace& bf : mesh.boundary_faces()) {
    if (bf.tag != BoundaryTag::neumann) continue;
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const double nsign = (bf.face % 2) ? 1.0 : -1.0;
    CMapMat Cm(u.data() + SU.dof_index(bf.elem, axis, 0, 0), nu_, nu_);
    face_trace_comp(Cm, bf.face, TU.tab, h, tm, nd, tmpn);
    MapMat Om(out.data() + SP.dof_index(bf.elem, 0, 0, 0), np, np);
    gv = (nsign * ht) * TU.w.cwiseProduct(tm);
    scatter_value(Om, bf.face, TP.tab, gv, tmpp);
  }
}

void DgOperators::divergence_rhs_data(const FaceData& g_dirichlet, Eigen::VectorXd& out) const {
  const Space& SP = spaces_->pressure();
  out.setZero();
  if (cfg_.formulation == FluxFormulation::reference) return;
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const SpaceTables& TP = pressure_tables(g_dirichlet.n_q);
  const int np = SP.nodes_1d();
  Eigen::VectorXd gv(g_dirichlet.n_q), tmpp(np);
  for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = mesh.boundary_faces()[bi];
    if (bf.tag != BoundaryTag::dirichlet) continue;
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const double nsign = (bf.face % 2) ? 1.0 : -1.0;
    MapMat Om(out.data() + SP.dof_index(bf.elem, 0, 0, 0), np, np);
    gv = (nsign * ht) * TP.w.cwiseProduct(g_dirichlet.values[bi].col(axis));
    scatter_value(Om, bf.face, TP.tab, gv, tmpp);
  }
}

void DgOperators::divergence_apply(const Eigen::VectorXd& u, const FaceData* g_dirichlet,
                                   Eigen::VectorXd& out) const {
  divergence_apply_hom(u, out);
  if (cfg_.formulation == FluxFormulation::reference) return;
  bool has_dirichlet = false;
  for (const BoundaryFace& bf : mesh().boundary_faces())
    if (bf.tag == BoundaryTag::dirichlet) { has_dirichlet = true; break; }
  if (!has_dirichlet) return;
  if (!g_dirichlet)
    throw std::invalid_argument("divergence_apply: missing Dirichlet velocity data");
  Eigen::VectorXd data(out.size());
  divergence_rhs_data(*g_dirichlet, data);
  out += data;
}

void DgOperators::gradient_apply_hom(const Eigen::VectorXd& p, Eigen::VectorXd& out) const {
  const Space& SU = spaces_->velocity();
  const Space& SP = spaces_->pressure();
  const SpaceTables& TU = vel_tables_[0];
  const SpaceTables& TP = pres_tables_[1];
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const int nu_ = SU.nodes_1d();
  const int np = SP.nodes_1d();
  const int nq = TU.rule.size();

  out.setZero();
  Eigen::MatrixXd t1(nq, np), Pq(nq, nq), t2(nu_, nq);
  if (cfg_.formulation == FluxFormulation::reference) {
    // (v, grad p)
    for (int e = 0; e < mesh.n_elements(); ++e) {
      CMapMat C(p.data() + SP.dof_index(e, 0, 0, 0), np, np);
      MapMat O1(out.data() + SU.dof_index(e, 0, 0, 0), nu_, nu_);
      MapMat O2(out.data() + SU.dof_index(e, 1, 0, 0), nu_, nu_);
      t1.noalias() = TP.tab.der * C;
      Pq.noalias() = t1 * TP.tab.val.transpose();
      Pq.array() *= TU.W.array();
      t2.noalias() = TU.tab.val.transpose() * Pq;
      O1.noalias() += h[1] * (t2 * TU.tab.val);
      t1.noalias() = TP.tab.val * C;
      Pq.noalias() = t1 * TP.tab.der.transpose();
      Pq.array() *= TU.W.array();
      t2.noalias() = TU.tab.val.transpose() * Pq;
      O2.noalias() += h[0] * (t2 * TU.tab.val);
    }
    return;
  }

  // -(div v, p)
  for (int e = 0; e < mesh.n_elements(); ++e) {
    CMapMat C(p.data() + SP.dof_index(e, 0, 0, 0), np, np);
    MapMat O1(out.data() + SU.dof_index(e, 0, 0, 0), nu_, nu_);
    MapMat O2(out.data() + SU.dof_index(e, 1, 0, 0), nu_, nu_);
    t1.noalias() = TP.tab.val * C;
    Pq.noalias() = t1 * TP.tab.val.transpose();
    Pq.array() *= TU.W.array();
    t2.noalias() = TU.tab.der.transpose() * Pq;
    O1.noalias() -= h[1] * (t2 * TU.tab.val);
    t2.noalias() = TU.tab.val.transpose() * Pq;
    O2.noalias() -= h[0] * (t2 * TU.tab.der);
  }

  // interior faces: (v, {p} n)
  Eigen::VectorXd tm(nq), tp(nq), nd(nq), psi(nq), gv(nq), tmpp(np), tmpu(nu_);
  for (std::size_t fi = 0; fi < mesh.interior_faces().size(); ++fi) {
    const InteriorFace& f = mesh.interior_faces()[fi];
    const int axis = f.face_minus / 2;
    const double ht = h[1 - axis];
    CMapMat Cm(p.data() + SP.dof_index(f.elem_minus, 0, 0, 0), np, np);
    CMapMat Cp(p.data() + SP.dof_index(f.elem_plus, 0, 0, 0), np, np);
    face_trace_comp(Cm, f.face_minus, TP.tab, h, tm, nd, tmpp);
    face_trace_comp(Cp, f.face_plus, TP.tab, h, tp, nd, tmpp);
    psi = 0.5 * (tm + tp);
    MapMat Om(out.data() + SU.dof_index(f.elem_minus, axis, 0, 0), nu_, nu_);
    MapMat Op(out.data() + SU.dof_index(f.elem_plus, axis, 0, 0), nu_, nu_);
    gv = ht * TU.w.cwiseProduct(psi);
    scatter_value(Om, f.face_minus, TU.tab, gv, tmpu);
    gv = (-ht) * TU.w.cwiseProduct(psi);
    scatter_value(Op, f.face_plus, TU.tab, gv, tmpu);
  }
  // Dirichlet boundary: (v, p- n); Neumann boundary carries only data terms.
  for (const BoundaryFace& bf : mesh.boundary_faces()) {
    if (bf.tag != BoundaryTag::dirichlet) continue;
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const double nsign = (bf.face % 2) ? 1.0 : -1.0;
    CMapMat Cm(p.data() + SP.dof_index(bf.elem, 0, 0, 0), np, np);
    face_trace_comp(Cm, bf.face, TP.tab, h, tm, nd, tmpp);
    MapMat Om(out.data() + SU.dof_index(bf.elem, axis, 0, 0), nu_, nu_);
    gv = (nsign * ht) * TU.w.cwiseProduct(tm);
    scatter_value(Om, bf.face, TU.tab, gv, tmpu);
  }
}

void DgOperators::gradient_rhs_data(const FaceData& g_neumann, Eigen::VectorXd& out) const {
  const Space& SU = spaces_->velocity();
  out.setZero();
  if (cfg_.formulation == FluxFormulation::reference) return;
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const SpaceTables& TU = velocity_tables(g_neumann.n_q);
  const int nu_ = SU.nodes_1d();
  Eigen::VectorXd gv(g_neumann.n_q), tmpu(nu_);
  for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = mesh.boundary_faces()[bi];
    if (bf.tag != BoundaryTag::neumann) continue;
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const double nsign = (bf.face % 2) ? 1.0 : -1.0;
    MapMat Om(out.data() + SU.dof_index(bf.elem, axis, 0, 0), nu_, nu_);
    gv = (nsign * ht) * TU.w.cwiseProduct(g_neumann.values[bi].col(0));
    scatter_value(Om, bf.face, TU.tab, gv, tmpu);
  }
}

void DgOperators::gradient_apply(const Eigen::VectorXd& p, const FaceData* g_neumann,
                                 Eigen::VectorXd& out) const {
  gradient_apply_hom(p, out);
  if (cfg_.formulation == FluxFormulation::reference) return;
  bool has_neumann = false;
  for (const BoundaryFace& bf : mesh().boundary_faces())
    if (bf.tag == BoundaryTag::neumann) { has_neumann = true; break; }
  if (!has_neumann) return;
  if (!g_neumann)
    throw std::invalid_argument("gradient_apply: missing pressure boundary data");
  Eigen::VectorXd data(out.size());
  gradient_rhs_data(*g_neumann, data);
  out += data;
}

// ---------------------------------------------------------------------------
// convective term
// ---------------------------------------------------------------------------

void DgOperators::convective_apply(const Eigen::VectorXd& u, const FaceData& g_dirichlet,
                                   Eigen::VectorXd& out) const {
  const Space& SU = spaces_->velocity();
  const SpaceTables& T = vel_tables_[1];  // convective rule
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const int n = SU.nodes_1d();
  const int nq = T.rule.size();

  bool has_dirichlet = false;
  for (const BoundaryFace& bf : mesh.boundary_faces())
    if (bf.tag == BoundaryTag::dirichlet) { has_dirichlet = true; break; }
  if (has_dirichlet && g_dirichlet.n_q != nq)
    throw std::invalid_argument("convective_apply: boundary data not on the convective rule");

  out.setZero();
  // volume: -(grad v, u kron u)
  Eigen::MatrixXd t1(nq, n), U1(nq, nq), U2(nq, nq), G(nq, nq), t2(n, nq);
  std::vector<Vec2> mean(cfg_.lambda_mode == LambdaMode::element_mean ? mesh.n_elements() : 0);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    CMapMat C1(u.data() + SU.dof_index(e, 0, 0, 0), n, n);
    CMapMat C2(u.data() + SU.dof_index(e, 1, 0, 0), n, n);
    t1.noalias() = T.tab.val * C1;
    U1.noalias() = t1 * T.tab.val.transpose();
    t1.noalias() = T.tab.val * C2;
    U2.noalias() = t1 * T.tab.val.transpose();
    if (!mean.empty()) {
      mean[e][0] = (U1.array() * T.W.array()).sum();
      mean[e][1] = (U2.array() * T.W.array()).sum();
    }
    for (int c = 0; c < 2; ++c) {
      const Eigen::MatrixXd& Uc = (c == 0) ? U1 : U2;
      MapMat O(out.data() + SU.dof_index(e, c, 0, 0), n, n);
      G = Uc.cwiseProduct(U1).cwiseProduct(T.W);
      t2.noalias() = T.tab.der.transpose() * G;
      O.noalias() -= h[1] * (t2 * T.tab.val);
      G = Uc.cwiseProduct(U2).cwiseProduct(T.W);
      t2.noalias() = T.tab.val.transpose() * G;
      O.noalias() -= h[0] * (t2 * T.tab.der);
    }
  }

  Eigen::MatrixXd tm(nq, 2), tp(nq, 2);
  Eigen::VectorXd nd(nq), unm(nq), unp(nq), lam(nq), phi(nq), gv(nq), tmp(n);
  auto lambda_of = [](double un) { return 2.0 * std::abs(un); };

  for (std::size_t fi = 0; fi < mesh.interior_faces().size(); ++fi) {
    const InteriorFace& f = mesh.interior_faces()[fi];
    const int axis = f.face_minus / 2;
    const double ht = h[1 - axis];
    for (int c = 0; c < 2; ++c) {
      CMapMat Cm(u.data() + SU.dof_index(f.elem_minus, c, 0, 0), n, n);
      CMapMat Cp(u.data() + SU.dof_index(f.elem_plus, c, 0, 0), n, n);
      face_trace_comp(Cm, f.face_minus, T.tab, h, tm.col(c), nd, tmp);
      face_trace_comp(Cp, f.face_plus, T.tab, h, tp.col(c), nd, tmp);
    }
    unm = tm.col(axis);  // u.n with n = +e_axis
    unp = tp.col(axis);
    if (mean.empty()) {
      for (int q = 0; q < nq; ++q) lam(q) = std::max(lambda_of(unm(q)), lambda_of(unp(q)));
    } else {
      const double l = std::max(lambda_of(mean[f.elem_minus][axis]),
                                lambda_of(mean[f.elem_plus][axis]));
      lam.setConstant(l);
    }
    for (int c = 0; c < 2; ++c) {
      phi = 0.5 * (tm.col(c).cwiseProduct(unm) + tp.col(c).cwiseProduct(unp)) +
            0.5 * lam.cwiseProduct(tm.col(c) - tp.col(c));
      MapMat Om(out.data() + SU.dof_index(f.elem_minus, c, 0, 0), n, n);
      MapMat Op(out.data() + SU.dof_index(f.elem_plus, c, 0, 0), n, n);
      gv = ht * T.w.cwiseProduct(phi);
      scatter_value(Om, f.face_minus, T.tab, gv, tmp);
      gv = (-ht) * T.w.cwiseProduct(phi);
      scatter_value(Op, f.face_plus, T.tab, gv, tmp);
    }
  }

  for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = mesh.boundary_faces()[bi];
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const double nsign = (bf.face % 2) ? 1.0 : -1.0;
    for (int c = 0; c < 2; ++c) {
      CMapMat Cm(u.data() + SU.dof_index(bf.elem, c, 0, 0), n, n);
      face_trace_comp(Cm, bf.face, T.tab, h, tm.col(c), nd, tmp);
      if (bf.tag == BoundaryTag::dirichlet) {
        tp.col(c) = -tm.col(c) + 2.0 * g_dirichlet.values[bi].col(c);
      } else {
        tp.col(c) = tm.col(c);
      }
    }
    unm = nsign * tm.col(axis);
    unp = nsign * tp.col(axis);
    if (mean.empty()) {
      for (int q = 0; q < nq; ++q) lam(q) = std::max(lambda_of(unm(q)), lambda_of(unp(q)));
    } else {
      // exterior mean mirrored from the face-mean of the data
      const double um = mean[bf.elem][axis] * nsign;
      double up = um;
      if (bf.tag == BoundaryTag::dirichlet) {
        const double gmean = T.w.dot(g_dirichlet.values[bi].col(axis));
        up = -um + 2.0 * gmean * nsign;
      }
      lam.setConstant(std::max(lambda_of(um), lambda_of(up)));
    }
    for (int c = 0; c < 2; ++c) {
      phi = 0.5 * (tm.col(c).cwiseProduct(unm) + tp.col(c).cwiseProduct(unp)) +
            0.5 * lam.cwiseProduct(tm.col(c) - tp.col(c));
      MapMat Om(out.data() + SU.dof_index(bf.elem, c, 0, 0), n, n);
      gv = ht * T.w.cwiseProduct(phi);
      scatter_value(Om, bf.face, T.tab, gv, tmp);
    }
  }
}

void DgOperators::convective_linearization_apply(const Eigen::VectorXd& u0,
                                                 const Eigen::VectorXd& du,
                                                 const FaceData& g_dirichlet,
                                                 Eigen::VectorXd& out) const {
  const Space& SU = spaces_->velocity();
  const SpaceTables& T = vel_tables_[1];
  const Mesh& mesh = this->mesh();
  const Vec2 h = mesh.element_size();
  const int n = SU.nodes_1d();
  const int nq = T.rule.size();

  out.setZero();
  Eigen::MatrixXd t1(nq, n), U1(nq, nq), U2(nq, nq), D1(nq, nq), D2(nq, nq), G(nq, nq), t2(n, nq);
  std::vector<Vec2> mean0(cfg_.lambda_mode == LambdaMode::element_mean ? mesh.n_elements() : 0);
  std::vector<Vec2> dmean(mean0.size());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    CMapMat C1(u0.data() + SU.dof_index(e, 0, 0, 0), n, n);
    CMapMat C2(u0.data() + SU.dof_index(e, 1, 0, 0), n, n);
    CMapMat B1(du.data() + SU.dof_index(e, 0, 0, 0), n, n);
    CMapMat B2(du.data() + SU.dof_index(e, 1, 0, 0), n, n);
    t1.noalias() = T.tab.val * C1;
    U1.noalias() = t1 * T.tab.val.transpose();
    t1.noalias() = T.tab.val * C2;
    U2.noalias() = t1 * T.tab.val.transpose();
    t1.noalias() = T.tab.val * B1;
    D1.noalias() = t1 * T.tab.val.transpose();
    t1.noalias() = T.tab.val * B2;
    D2.noalias() = t1 * T.tab.val.transpose();
    if (!mean0.empty()) {
      mean0[e][0] = (U1.array() * T.W.array()).sum();
      mean0[e][1] = (U2.array() * T.W.array()).sum();
      dmean[e][0] = (D1.array() * T.W.array()).sum();
      dmean[e][1] = (D2.array() * T.W.array()).sum();
    }
    for (int c = 0; c < 2; ++c) {
      const Eigen::MatrixXd& Uc = (c == 0) ? U1 : U2;
      const Eigen::MatrixXd& Dc = (c == 0) ? D1 : D2;
      MapMat O(out.data() + SU.dof_index(e, c, 0, 0), n, n);
      G = (Dc.cwiseProduct(U1) + Uc.cwiseProduct(D1)).cwiseProduct(T.W);
      t2.noalias() = T.tab.der.transpose() * G;
      O.noalias() -= h[1] * (t2 * T.tab.val);
      G = (Dc.cwiseProduct(U2) + Uc.cwiseProduct(D2)).cwiseProduct(T.W);
      t2.noalias() = T.tab.val.transpose() * G;
      O.noalias() -= h[0] * (t2 * T.tab.der);
    }
  }

  Eigen::MatrixXd tm(nq, 2), tp(nq, 2), sm(nq, 2), sp(nq, 2);
  Eigen::VectorXd nd(nq), unm(nq), unp(nq), dunm(nq), dunp(nq), lam(nq), dlam(nq), dphi(nq),
      gv(nq), tmp(n);
  auto lambda_of = [](double un) { return 2.0 * std::abs(un); };
  auto sgn = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };

  auto face_flux_derivative = [&](int axis_unused) {
    (void)axis_unused;
    for (int q = 0; q < nq; ++q) {
      if (lambda_of(unm(q)) >= lambda_of(unp(q)))
        dlam(q) = 2.0 * sgn(unm(q)) * dunm(q);
      else
        dlam(q) = 2.0 * sgn(unp(q)) * dunp(q);
    }
  };

  for (std::size_t fi = 0; fi < mesh.interior_faces().size(); ++fi) {
    const InteriorFace& f = mesh.interior_faces()[fi];
    const int axis = f.face_minus / 2;
    const double ht = h[1 - axis];
    for (int c = 0; c < 2; ++c) {
      CMapMat Cm(u0.data() + SU.dof_index(f.elem_minus, c, 0, 0), n, n);
      CMapMat Cp(u0.data() + SU.dof_index(f.elem_plus, c, 0, 0), n, n);
      CMapMat Bm(du.data() + SU.dof_index(f.elem_minus, c, 0, 0), n, n);
      CMapMat Bp(du.data() + SU.dof_index(f.elem_plus, c, 0, 0), n, n);
      face_trace_comp(Cm, f.face_minus, T.tab, h, tm.col(c), nd, tmp);
      face_trace_comp(Cp, f.face_plus, T.tab, h, tp.col(c), nd, tmp);
      face_trace_comp(Bm, f.face_minus, T.tab, h, sm.col(c), nd, tmp);
      face_trace_comp(Bp, f.face_plus, T.tab, h, sp.col(c), nd, tmp);
    }
    unm = tm.col(axis);
    unp = tp.col(axis);
    dunm = sm.col(axis);
    dunp = sp.col(axis);
    if (mean0.empty()) {
      for (int q = 0; q < nq; ++q) lam(q) = std::max(lambda_of(unm(q)), lambda_of(unp(q)));
      face_flux_derivative(axis);
    } else {
      const double lm = lambda_of(mean0[f.elem_minus][axis]);
      const double lp = lambda_of(mean0[f.elem_plus][axis]);
      lam.setConstant(std::max(lm, lp));
      const int which = (lm >= lp) ? f.elem_minus : f.elem_plus;
      dlam.setConstant(2.0 * sgn(mean0[which][axis]) * dmean[which][axis]);
    }
    for (int c = 0; c < 2; ++c) {
      dphi = 0.5 * (sm.col(c).cwiseProduct(unm) + tm.col(c).cwiseProduct(dunm) +
                    sp.col(c).cwiseProduct(unp) + tp.col(c).cwiseProduct(dunp)) +
             0.5 * dlam.cwiseProduct(tm.col(c) - tp.col(c)) +
             0.5 * lam.cwiseProduct(sm.col(c) - sp.col(c));
      MapMat Om(out.data() + SU.dof_index(f.elem_minus, c, 0, 0), n, n);
      MapMat Op(out.data() + SU.dof_index(f.elem_plus, c, 0, 0), n, n);
      gv = ht * T.w.cwiseProduct(dphi);
      scatter_value(Om, f.face_minus, T.tab, gv, tmp);
      gv = (-ht) * T.w.cwiseProduct(dphi);
      scatter_value(Op, f.face_plus, T.tab, gv, tmp);
    }
  }

  for (std::size_t bi = 0; bi < mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = mesh.boundary_faces()[bi];
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const double nsign = (bf.face % 2) ? 1.0 : -1.0;
    for (int c = 0; c < 2; ++c) {
      CMapMat Cm(u0.data() + SU.dof_index(bf.elem, c, 0, 0), n, n);
      CMapMat Bm(du.data() + SU.dof_index(bf.elem, c, 0, 0), n, n);
      face_trace_comp(Cm, bf.face, T.tab, h, tm.col(c), nd, tmp);
      face_trace_comp(Bm, bf.face, T.tab, h, sm.col(c), nd, tmp);
      if (bf.tag == BoundaryTag::dirichlet) {
        tp.col(c) = -tm.col(c) + 2.0 * g_dirichlet.values[bi].col(c);
        sp.col(c) = -sm.col(c);
      } else {
        tp.col(c) = tm.col(c);
        sp.col(c) = sm.col(c);
      }
    }
    unm = nsign * tm.col(axis);
    unp = nsign * tp.col(axis);
    dunm = nsign * sm.col(axis);
    dunp = nsign * sp.col(axis);
    if (mean0.empty()) {
      for (int q = 0; q < nq; ++q) lam(q) = std::max(lambda_of(unm(q)), lambda_of(unp(q)));
      face_flux_derivative(axis);
    } else {
      const double um = mean0[bf.elem][axis] * nsign;
      const double dm = dmean[bf.elem][axis] * nsign;
      double up = um, dp = dm;
      if (bf.tag == BoundaryTag::dirichlet) {
        const double gmean = T.w.dot(g_dirichlet.values[bi].col(axis));
        up = -um + 2.0 * gmean * nsign;
        dp = -dm;
      }
      if (lambda_of(um) >= lambda_of(up)) {
        lam.setConstant(lambda_of(um));
        dlam.setConstant(2.0 * sgn(um) * dm);
      } else {
        lam.setConstant(lambda_of(up));
        dlam.setConstant(2.0 * sgn(up) * dp);
      }
    }
    for (int c = 0; c < 2; ++c) {
      dphi = 0.5 * (sm.col(c).cwiseProduct(unm) + tm.col(c).cwiseProduct(dunm) +
                    sp.col(c).cwiseProduct(unp) + tp.col(c).cwiseProduct(dunp)) +
             0.5 * dlam.cwiseProduct(tm.col(c) - tp.col(c)) +
             0.5 * lam.cwiseProduct(sm.col(c) - sp.col(c));
      MapMat Om(out.data() + SU.dof_index(bf.elem, c, 0, 0), n, n);
      gv = ht * T.w.cwiseProduct(dphi);
      scatter_value(Om, bf.face, T.tab, gv, tmp);
    }
  }
}

// ---------------------------------------------------------------------------
// element-diagonal blocks
// ---------------------------------------------------------------------------

void DgOperators::sipg_local_apply(bool velocity_space, int elem, const Eigen::MatrixXd& in_cols,
                                   Eigen::MatrixXd& out_cols) const {
  const Space& S = velocity_space ? spaces_->velocity() : spaces_->pressure();
  const SpaceTables& T = velocity_space ? vel_tables_[0] : pres_tables_[0];
  const std::vector<double>& tau_int = velocity_space ? tau_int_u_ : tau_int_p_;
  const std::vector<double>& tau_bnd = velocity_space ? tau_bnd_u_ : tau_bnd_p_;
  const double nu = velocity_space ? cfg_.nu : 1.0;
  const BoundaryTag dirichlet_like = velocity_space ? BoundaryTag::dirichlet : BoundaryTag::neumann;
  const Vec2 h = mesh().element_size();
  const int n = S.nodes_1d();
  const int nq = T.rule.size();
  const int comps = S.components();
  const int n2 = n * n;
  const auto faces = mesh().faces_of(elem);

  Eigen::MatrixXd t1(nq, n), q1(nq, nq), t2(n, nq);
  Eigen::VectorXd tv(nq), ndv(nq), flux(nq), gv(nq), gd(nq), tmp(n);
  out_cols.setZero();
  for (int col = 0; col < in_cols.cols(); ++col) {
    for (int c = 0; c < comps; ++c) {
      CMapMat C(in_cols.col(col).data() + c * n2, n, n);
      MapMat O(out_cols.col(col).data() + c * n2, n, n);
      t1.noalias() = T.tab.der * C;
      q1.noalias() = t1 * T.tab.val.transpose();
      q1.array() *= T.W.array();
      t2.noalias() = T.tab.der.transpose() * q1;
      O.noalias() += (nu * h[1] / h[0]) * (t2 * T.tab.val);
      t1.noalias() = T.tab.val * C;
      q1.noalias() = t1 * T.tab.der.transpose();
      q1.array() *= T.W.array();
      t2.noalias() = T.tab.val.transpose() * q1;
      O.noalias() += (nu * h[0] / h[1]) * (t2 * T.tab.der);

      for (int f = 0; f < 4; ++f) {
        const double ht = h[1 - f / 2];
        face_trace_comp(C, f, T.tab, h, tv, ndv, tmp);
        if (faces[f].boundary) {
          if (faces[f].tag != dirichlet_like) continue;
          const double tau = tau_bnd[faces[f].index];
          flux = nu * ndv - (2.0 * nu * tau) * tv;
          gv = (-ht) * T.w.cwiseProduct(flux);
          scatter_value(O, f, T.tab, gv, tmp);
          gd = (-nu * ht) * T.w.cwiseProduct(tv);
          scatter_normal_deriv(O, f, T.tab, h, gd, tmp);
        } else {
          // one-sided interior contribution (neighbor trace zero)
          const double tau = tau_int[faces[f].index];
          flux = (0.5 * nu) * ndv - (nu * tau) * tv;
          gv = (-ht) * T.w.cwiseProduct(flux);
          scatter_value(O, f, T.tab, gv, tmp);
          gd = (-0.5 * nu * ht) * T.w.cwiseProduct(tv);
          scatter_normal_deriv(O, f, T.tab, h, gd, tmp);
        }
      }
    }
  }
}

Eigen::MatrixXd DgOperators::laplace_element_block(int elem) const {
  const int n2 = spaces_->pressure().dofs_per_comp();
  Eigen::MatrixXd in = Eigen::MatrixXd::Identity(n2, n2);
  Eigen::MatrixXd out(n2, n2);
  sipg_local_apply(false, elem, in, out);
  return out;
}

Eigen::MatrixXd DgOperators::momentum_element_block(int elem, double mass_coeff) const {
  const Space& S = spaces_->velocity();
  const int n = S.nodes_1d();
  const int n2 = n * n;
  const int m = 2 * n2;
  Eigen::MatrixXd in = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd out(m, m);
  sipg_local_apply(true, elem, in, out);
  const Vec2 h = mesh().element_size();
  const double area = h[0] * h[1];
  for (int c = 0; c < 2; ++c) {
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        for (int jy = 0; jy < n; ++jy)
          for (int jx = 0; jx < n; ++jx)
            out(c * n2 + iy * n + ix, c * n2 + jy * n + jx) +=
                mass_coeff * area * mass1d_u_(ix, jx) * mass1d_u_(iy, jy);
  }
  return out;
}

Eigen::MatrixXd DgOperators::velocity_mass_element_block(int elem) const {
  (void)elem;
  const Space& S = spaces_->velocity();
  const int n = S.nodes_1d();
  const int n2 = n * n;
  const Vec2 h = mesh().element_size();
  const double area = h[0] * h[1];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * n2, 2 * n2);
  for (int c = 0; c < 2; ++c)
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        for (int jy = 0; jy < n; ++jy)
          for (int jx = 0; jx < n; ++jx)
            out(c * n2 + iy * n + ix, c * n2 + jy * n + jx) =
                area * mass1d_u_(ix, jx) * mass1d_u_(iy, jy);
  return out;
}

Eigen::MatrixXd DgOperators::pressure_mass_element_block(int elem) const {
  (void)elem;
  const Space& S = spaces_->pressure();
  const int n = S.nodes_1d();
  const Vec2 h = mesh().element_size();
  const double area = h[0] * h[1];
  Eigen::MatrixXd out(n * n, n * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      for (int jy = 0; jy < n; ++jy)
        for (int jx = 0; jx < n; ++jx)
          out(iy * n + ix, jy * n + jx) = area * mass1d_p_(ix, jx) * mass1d_p_(iy, jy);
  return out;
}

std::vector<Vec2> DgOperators::boundary_face_points(int bface_index, const QuadRule1D& rule) const {
  const BoundaryFace& bf = mesh().boundary_faces()[bface_index];
  const int axis = bf.face / 2;
  const int side = bf.face % 2;
  const Vec2 o = mesh().element_origin(bf.elem);
  const Vec2 h = mesh().element_size();
  std::vector<Vec2> pts(rule.size());
  for (int q = 0; q < rule.size(); ++q) {
    pts[q][axis] = o[axis] + (side ? h[axis] : 0.0);
    pts[q][1 - axis] = o[1 - axis] + h[1 - axis] * rule.points[q];
  }
  return pts;
}

}  // namespace nsdg
