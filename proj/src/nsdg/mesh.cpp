#include "nsdg/mesh.hpp"

#include <stdexcept>

namespace nsdg {

BoundaryClassifier all_dirichlet() {
  return [](const Vec2&, const Vec2&) { return BoundaryTag::dirichlet; };
}

BoundaryClassifier inflow_dirichlet(std::function<Vec2(const Vec2&)> u0) {
  return [u0 = std::move(u0)](const Vec2& x, const Vec2& n) {
    const Vec2 u = u0(x);
    const double un = u[0] * n[0] + u[1] * n[1];
    return un < 0.0 ? BoundaryTag::dirichlet : BoundaryTag::neumann;
  };
}

Mesh Mesh::cartesian(const Vec2& origin, const Vec2& lengths, int level,
                     const BoundaryClassifier& classifier, std::int64_t element_cap) {
  if (level < 0) throw std::invalid_argument("Mesh::cartesian: level must be >= 0");
  if (lengths[0] <= 0.0 || lengths[1] <= 0.0)
    throw std::invalid_argument("Mesh::cartesian: lengths must be positive");
  const std::int64_t n_side = std::int64_t{1} << level;
  if (n_side * n_side > element_cap)
    throw std::invalid_argument("Mesh::cartesian: element count exceeds cap");

  Mesh m;
  m.origin_ = origin;
  m.lengths_ = lengths;
  m.level_ = level;
  m.nx_ = m.ny_ = static_cast<int>(n_side);
  const int nx = m.nx_, ny = m.ny_;
  const double hx = lengths[0] / nx, hy = lengths[1] / ny;

  m.elem_faces_.resize(static_cast<size_t>(nx) * ny);

  auto eid = [nx](int ix, int iy) { return iy * nx + ix; };

  // Vertical interior faces (normal +x), then horizontal (normal +y). The
  // lower-indexed element is the minus side.
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      InteriorFace f;
      f.elem_minus = eid(ix, iy);
      f.elem_plus = eid(ix + 1, iy);
      f.face_minus = 1;
      f.face_plus = 0;
      f.normal = {1.0, 0.0};
      const int idx = static_cast<int>(m.interior_.size());
      m.interior_.push_back(f);
      m.elem_faces_[f.elem_minus][1] = {false, f.elem_plus, BoundaryTag::dirichlet, idx, true};
      m.elem_faces_[f.elem_plus][0] = {false, f.elem_minus, BoundaryTag::dirichlet, idx, false};
    }
  }
  for (int iy = 0; iy + 1 < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      InteriorFace f;
      f.elem_minus = eid(ix, iy);
      f.elem_plus = eid(ix, iy + 1);
      f.face_minus = 3;
      f.face_plus = 2;
      f.normal = {0.0, 1.0};
      const int idx = static_cast<int>(m.interior_.size());
      m.interior_.push_back(f);
      m.elem_faces_[f.elem_minus][3] = {false, f.elem_plus, BoundaryTag::dirichlet, idx, true};
      m.elem_faces_[f.elem_plus][2] = {false, f.elem_minus, BoundaryTag::dirichlet, idx, false};
    }
  }

  auto add_boundary = [&](int e, int face, const Vec2& normal, const Vec2& midpoint) {
    BoundaryFace f;
    f.elem = e;
    f.face = face;
    f.normal = normal;
    f.tag = classifier(midpoint, normal);
    const int idx = static_cast<int>(m.boundary_.size());
    m.boundary_.push_back(f);
    m.elem_faces_[e][face] = {true, -1, f.tag, idx, true};
  };

  for (int iy = 0; iy < ny; ++iy) {
    const double ymid = origin[1] + (iy + 0.5) * hy;
    add_boundary(eid(0, iy), 0, {-1.0, 0.0}, {origin[0], ymid});
    add_boundary(eid(nx - 1, iy), 1, {1.0, 0.0}, {origin[0] + lengths[0], ymid});
  }
  for (int ix = 0; ix < nx; ++ix) {
    const double xmid = origin[0] + (ix + 0.5) * hx;
    add_boundary(eid(ix, 0), 2, {0.0, -1.0}, {xmid, origin[1]});
    add_boundary(eid(ix, ny - 1), 3, {0.0, 1.0}, {xmid, origin[1] + lengths[1]});
  }
  return m;
}

Vec2 Mesh::element_origin(int e) const {
  const int ix = e % nx_;
  const int iy = e / nx_;
  return {origin_[0] + ix * lengths_[0] / nx_, origin_[1] + iy * lengths_[1] / ny_};
}

std::array<FaceOfElement, 4> Mesh::faces_of(int element) const {
  if (element < 0 || element >= n_elements())
    throw std::out_of_range("Mesh::faces_of: invalid element id");
  return elem_faces_[element];
}

}  // namespace nsdg
