#pragma once

#include "capsense/potential.hpp"

namespace capsense::reference {

/// Straight-line serial implementations of the dense operator assembly,
/// written independently of the OpenMP kernels in potential.cpp. The parity
/// tests require bitwise-identical matrices; the benchmark compares wall
/// times.
potential::OperatorSet assemble_all_serial(
    const geometry::SurfaceQuadrature& quad);

}  // namespace capsense::reference
