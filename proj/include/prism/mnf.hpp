#pragma once
/**
 * @file   mnf.hpp
 * @brief  Minimum noise fraction band reduction.
 *
 * Noise covariance comes from horizontal shift differences (half the
 * covariance of x(r, c+1) - x(r, c)); signal covariance from the raw
 * pixels. Components solve  S v = lambda N v  and are ordered by
 * decreasing lambda, normalised so that V^T N V = I.
 */

#include "prism/cube.hpp"
#include "prism/parallel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace prism
{

struct MnfSettings
{
    /// Fraction of bands kept. 0.7 drops ~30% of the bands; 0.3 is the keep-30% reading.
    double retain_fraction = 0.7;
};

struct MnfModel
{
    Eigen::MatrixXd noise_covariance;
    Eigen::MatrixXd signal_covariance;
    Eigen::MatrixXd components;  ///< row i is the i-th component, decreasing eigenvalue
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd mean;
    int retained_k = 1;
    bool regularized = false;  ///< noise covariance needed a ridge

    [[nodiscard]] int bands() const noexcept { return static_cast<int>(mean.size()); }
};

/// round(retain_fraction * bands), clamped to [1, bands]. 67 for 96 bands at 0.7.
[[nodiscard]] int default_retained_k(int bands, double retain_fraction = 0.7);

/// Solves the generalized problem from precomputed statistics.
[[nodiscard]] MnfModel mnf_from_statistics(const Eigen::VectorXd& mean, const Eigen::MatrixXd& signal_covariance,
                                           Eigen::MatrixXd noise_covariance, int retained_k);

/// Fits on the pixels where `mask` is non-zero (all valid pixels when the mask is empty).
[[nodiscard]] MnfModel mnf_fit(const HyperspectralCube& cube, std::span<const std::uint8_t> mask = {},
                               const MnfSettings& settings = {}, Execution exec = Execution::parallel);

/// Projects one spectrum onto the top k components (k = 0 means model.retained_k).
[[nodiscard]] Eigen::VectorXd mnf_transform(const MnfModel& model, std::span<const float> spectrum, int k = 0);

/// Projects a pixels x bands matrix; returns pixels x k.
[[nodiscard]] Eigen::MatrixXd mnf_transform(const MnfModel& model, const Eigen::MatrixXd& spectra, int k = 0);

/// Back-projection of reduced coordinates; exact when reduced.size() == bands.
[[nodiscard]] Eigen::VectorXd mnf_inverse(const MnfModel& model, const Eigen::VectorXd& reduced);

}  // namespace prism
