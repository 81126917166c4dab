#pragma once

#include "stf/types.hpp"

namespace stf {

inline constexpr int kMaxShDegree = 3;

inline constexpr int sh_coeff_count(int l_max) { return (l_max + 1) * (l_max + 1); }

/// Real SH basis values for a unit direction, 3DGS coefficient convention.
/// `basis` must hold sh_coeff_count(l_max) doubles.
void sh_basis(int l_max, const Vec3& d, double* basis);

/// Basis plus d(basis_k)/d(direction); `dbasis` is row-major [count][3].
void sh_basis_with_grad(int l_max, const Vec3& d, double* basis, double* dbasis);

}  // namespace stf
