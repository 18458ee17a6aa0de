#ifndef KWC_CLI_INITIAL_DATA_HPP
#define KWC_CLI_INITIAL_DATA_HPP

#include <cstdint>
#include <string_view>

#include "kwc/mesh.hpp"
#include "kwc/model.hpp"
#include "kwc/scheme.hpp"

namespace kwc::cli {

/**
 * Two grains separated by vertical interfaces of width 4h (h = hx):
 *   theta = lerp(r0, r1, S), S a C^1 smoothstep profile,
 *   eta   = 1 - 0.8 exp(-d^2 / (2 (2h)^2)), d = distance to the nearest interface.
 * On the periodic strip the r1 grain fills lx/4 < x < 3lx/4 (two interfaces);
 * on the interval the interface sits at lx/2.
 */
State two_grain_state(const Mesh& mesh, const ModelParams& params);

/// Same layout with perfectly sharp interfaces and eta = 1.
State sharp_two_grain_state(const Mesh& mesh, const ModelParams& params);

/// eta = 1, theta = r0 everywhere.
State ground_state(const Mesh& mesh, const ModelParams& params);

/// eta uniform in [0, 1], theta uniform in [r0, r1], from a 64-bit Mersenne twister.
State random_state(const Mesh& mesh, const ModelParams& params, std::uint64_t seed);

}  // namespace kwc::cli

#endif  // KWC_CLI_INITIAL_DATA_HPP
