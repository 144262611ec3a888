#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace nsdg {

using Vec2 = std::array<double, 2>;

enum class BoundaryTag { dirichlet, neumann };

// Maps a boundary-face midpoint and outward unit normal to a tag. Must be
// deterministic and time-independent.
using BoundaryClassifier = std::function<BoundaryTag(const Vec2& midpoint, const Vec2& normal)>;

BoundaryClassifier all_dirichlet();
// Tags a face Dirichlet where the given velocity field flows inward
// (u0(x) . n < 0) and Neumann where it flows outward.
BoundaryClassifier inflow_dirichlet(std::function<Vec2(const Vec2&)> u0);

// Local face ids: 0 = x-min, 1 = x-max, 2 = y-min, 3 = y-max.
struct InteriorFace {
  int elem_minus;  // lower element index; owns the face normal
  int elem_plus;
  int face_minus;  // local id within elem_minus
  int face_plus;
  Vec2 normal;     // outward from elem_minus
};

struct BoundaryFace {
  int elem;
  int face;      // local id
  Vec2 normal;   // outward
  BoundaryTag tag;
};

struct FaceOfElement {
  bool boundary;
  int neighbor;             // valid if interior
  BoundaryTag tag;          // valid if boundary
  int index;                // index into interior_faces()/boundary_faces()
  bool is_minus_side;       // this element is the minus side (interior only)
};

// Uniform Cartesian quadrilateral mesh of a rectangle, refinement level l:
// 2^l x 2^l elements of size (Lx, Ly) / 2^l.
class Mesh {
public:
  static Mesh cartesian(const Vec2& origin, const Vec2& lengths, int level,
                        const BoundaryClassifier& classifier,
                        std::int64_t element_cap = (1 << 22));

  int n_elements() const { return nx_ * ny_; }
  int cells_per_side() const { return nx_; }
  int level() const { return level_; }
  const Vec2& origin() const { return origin_; }
  const Vec2& lengths() const { return lengths_; }
  Vec2 element_size() const { return {lengths_[0] / nx_, lengths_[1] / ny_}; }
  Vec2 element_origin(int e) const;
  double domain_area() const { return lengths_[0] * lengths_[1]; }

  const std::vector<InteriorFace>& interior_faces() const { return interior_; }
  const std::vector<BoundaryFace>& boundary_faces() const { return boundary_; }

  std::array<FaceOfElement, 4> faces_of(int element) const;

private:
  Vec2 origin_{};
  Vec2 lengths_{};
  int level_ = 0;
  int nx_ = 0, ny_ = 0;
  std::vector<InteriorFace> interior_;
  std::vector<BoundaryFace> boundary_;
  // per element, per local face: (boundary?, index into the face list, minus side?)
  std::vector<std::array<FaceOfElement, 4>> elem_faces_;
};

}  // namespace nsdg
