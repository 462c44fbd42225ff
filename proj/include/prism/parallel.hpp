#pragma once

namespace prism
{

/// Selects the OpenMP kernel or its serial reference. Every kernel that takes an
/// Execution produces bit-identical results on both paths.
enum class Execution
{
    serial,
    parallel
};

}  // namespace prism
