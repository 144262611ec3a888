#include <doctest.h>

#include "nsdg/mesh.hpp"
#include "nsdg/problems.hpp"

using namespace nsdg;

TEST_CASE("cartesian mesh counts at level 1 and 2") {
  const Mesh m1 = Mesh::cartesian({-1.0, -1.0}, {2.0, 2.0}, 1, all_dirichlet());
  CHECK(m1.n_elements() == 4);
  CHECK(m1.interior_faces().size() == 4);
  CHECK(m1.boundary_faces().size() == 8);
  CHECK(m1.element_size()[0] == doctest::Approx(1.0));

  const Mesh m2 = Mesh::cartesian({-1.0, -1.0}, {2.0, 2.0}, 2, all_dirichlet());
  CHECK(m2.n_elements() == 16);
  CHECK(m2.element_size()[0] == doctest::Approx(0.5));

  // element areas sum to the domain area
  double area = 0.0;
  for (int e = 0; e < m2.n_elements(); ++e)
    area += m2.element_size()[0] * m2.element_size()[1];
  CHECK(area == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("mesh rejects invalid input") {
  CHECK_THROWS_AS(Mesh::cartesian({0, 0}, {1, 1}, -1, all_dirichlet()), std::invalid_argument);
  CHECK_THROWS_AS(Mesh::cartesian({0, 0}, {0, 1}, 1, all_dirichlet()), std::invalid_argument);
  CHECK_THROWS_AS(Mesh::cartesian({0, 0}, {1, 1}, 12, all_dirichlet(), 1000),
                  std::invalid_argument);
}

TEST_CASE("faces_of: corner and interior elements, neighbor symmetry") {
  const Mesh m1 = Mesh::cartesian({0, 0}, {1, 1}, 1, all_dirichlet());
  int n_bnd = 0, n_int = 0;
  for (const FaceOfElement& f : m1.faces_of(0)) (f.boundary ? n_bnd : n_int)++;
  CHECK(n_bnd == 2);
  CHECK(n_int == 2);

  const Mesh m2 = Mesh::cartesian({0, 0}, {1, 1}, 2, all_dirichlet());
  // element (1,1) is interior on the level-2 mesh
  const int e_interior = 1 * 4 + 1;
  for (const FaceOfElement& f : m2.faces_of(e_interior)) CHECK_FALSE(f.boundary);

  // neighbor(neighbor(e, f)) = e
  for (int e = 0; e < m2.n_elements(); ++e) {
    const auto faces = m2.faces_of(e);
    for (int f = 0; f < 4; ++f) {
      if (faces[f].boundary) continue;
      const int nb = faces[f].neighbor;
      bool found = false;
      for (const FaceOfElement& g : m2.faces_of(nb))
        if (!g.boundary && g.neighbor == e) found = true;
      CHECK(found);
    }
  }
  CHECK_THROWS_AS(m2.faces_of(99), std::out_of_range);
}

TEST_CASE("interior faces reference two elements with the minus convention") {
  const Mesh m = Mesh::cartesian({0, 0}, {1, 1}, 2, all_dirichlet());
  for (const InteriorFace& f : m.interior_faces()) {
    CHECK(f.elem_minus < f.elem_plus);
    CHECK(std::abs(f.normal[0]) + std::abs(f.normal[1]) == doctest::Approx(1.0));
  }
  for (const BoundaryFace& f : m.boundary_faces())
    CHECK(std::abs(f.normal[0]) + std::abs(f.normal[1]) == doctest::Approx(1.0));
}

TEST_CASE("vortex classifier splits every side into a Dirichlet and a Neumann half") {
  const AnalyticProblem prob = vortex_problem();
  const Mesh m = prob.make_mesh(3);
  // right edge: inflow above the axis, outflow below
  for (const BoundaryFace& bf : m.boundary_faces()) {
    const Vec2 o = m.element_origin(bf.elem);
    const Vec2 h = m.element_size();
    Vec2 mid{o[0] + 0.5 * h[0], o[1] + 0.5 * h[1]};
    const int axis = bf.face / 2;
    mid[axis] = o[axis] + (bf.face % 2 ? h[axis] : 0.0);
    if (bf.normal[0] == 1.0) {
      CHECK(bf.tag == (mid[1] > 0 ? BoundaryTag::dirichlet : BoundaryTag::neumann));
    }
  }
  // each of the four sides carries both tags, half and half
  int counts[4][2] = {};
  for (const BoundaryFace& bf : m.boundary_faces()) {
    const int side = bf.face;  // 0: x-min side, 1: x-max, 2: y-min, 3: y-max
    counts[side][bf.tag == BoundaryTag::dirichlet ? 0 : 1]++;
  }
  for (int s = 0; s < 4; ++s) {
    CHECK(counts[s][0] == 4);
    CHECK(counts[s][1] == 4);
  }
}

TEST_CASE("spot values of the vortex split on the right edge") {
  const AnalyticProblem prob = vortex_problem();
  const Vec2 n{1.0, 0.0};
  CHECK(prob.classifier({0.5, 0.25}, n) == BoundaryTag::dirichlet);
  CHECK(prob.classifier({0.5, -0.25}, n) == BoundaryTag::neumann);
}
