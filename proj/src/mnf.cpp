#include "prism/mnf.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace prism
{

int default_retained_k(int bands, double retain_fraction)
{
    if (bands < 1)
        throw std::invalid_argument("default_retained_k: bands must be >= 1");
    const int k = static_cast<int>(std::lround(retain_fraction * bands));
    return std::clamp(k, 1, bands);
}

MnfModel mnf_from_statistics(const Eigen::VectorXd& mean, const Eigen::MatrixXd& signal_covariance,
                             Eigen::MatrixXd noise_covariance, int retained_k)
{
    const Eigen::Index n = mean.size();
    if (signal_covariance.rows() != n || noise_covariance.rows() != n)
        throw std::invalid_argument("mnf: covariance size mismatch");
    if (retained_k < 1 || retained_k > n)
        throw std::invalid_argument("mnf: retained_k outside [1, bands]");

    MnfModel m;
    m.mean = mean;
    m.signal_covariance = signal_covariance;
    m.retained_k = retained_k;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> noise_eig(noise_covariance, Eigen::EigenvaluesOnly);
    const double max_ev = noise_eig.eigenvalues().maxCoeff();
    const double min_ev = noise_eig.eigenvalues().minCoeff();
    if (!(min_ev > 1e-12 * std::max(max_ev, 0.0)) || !(max_ev > 0.0))
    {
        double eps = 1e-8 * noise_covariance.trace() / static_cast<double>(n);
        if (!(eps > 0.0))
            eps = 1e-12;
        noise_covariance.diagonal().array() += eps;
        m.regularized = true;
        std::clog << "warning: mnf: singular noise covariance, ridge " << eps << " added\n";
    }
    m.noise_covariance = noise_covariance;

    // Whitening reduces the pair to an ordinary symmetric problem:
    // C = L^-1 S L^-T,  C w = lambda w,  v = L^-T w.
    const Eigen::LLT<Eigen::MatrixXd> llt(noise_covariance);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("mnf: noise covariance is not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(signal_covariance);
    c = l.triangularView<Eigen::Lower>().solve(c.transpose()).eval();
    c = (0.5 * (c + c.transpose())).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("mnf: eigen decomposition failed");

    const Eigen::MatrixXd w = eig.eigenvectors().rowwise().reverse();
    m.eigenvalues = eig.eigenvalues().reverse();
    Eigen::MatrixXd v = l.transpose().triangularView<Eigen::Upper>().solve(w);
    for (Eigen::Index j = 0; j < n; ++j)
    {
        Eigen::Index at = 0;
        v.col(j).cwiseAbs().maxCoeff(&at);
        if (v(at, j) < 0.0)
            v.col(j) = -v.col(j);
    }
    m.components = v.transpose();
    return m;
}

namespace
{
struct Moments
{
    Eigen::VectorXd sum_x, sum_d;
    Eigen::MatrixXd xx, dd;
    long long n_x = 0, n_d = 0;

    explicit Moments(int bands)
        : sum_x(Eigen::VectorXd::Zero(bands)), sum_d(Eigen::VectorXd::Zero(bands)),
          xx(Eigen::MatrixXd::Zero(bands, bands)), dd(Eigen::MatrixXd::Zero(bands, bands))
    {
    }
};

constexpr int kBlockRows = 16;

// pass 0 accumulates sums, pass 1 centred outer products about the given means.
void accumulate_block(const HyperspectralCube& cube, const std::vector<std::uint8_t>& region, int r0, int r1,
                      int pass, const Eigen::VectorXd& mean_x, const Eigen::VectorXd& mean_d, Moments& out)
{
    const int bands = cube.bands(), cols = cube.cols();
    Eigen::MatrixXd xs(cols, bands), ds(cols, bands);
    for (int r = r0; r < r1; ++r)
    {
        Eigen::Index nx = 0, nd = 0;
        for (int c = 0; c < cols; ++c)
        {
            const std::size_t i = std::size_t(r) * cols + c;
            if (!region[i])
                continue;
            const float* s = cube.spectrum(r, c);
            for (int b = 0; b < bands; ++b)
                xs(nx, b) = s[b];
            ++nx;
            if (c + 1 < cols && region[i + 1])
            {
                const float* t = cube.spectrum(r, c + 1);
                for (int b = 0; b < bands; ++b)
                    ds(nd, b) = double(t[b]) - double(s[b]);
                ++nd;
            }
        }
        if (pass == 0)
        {
            out.sum_x += xs.topRows(nx).colwise().sum().transpose();
            out.sum_d += ds.topRows(nd).colwise().sum().transpose();
            out.n_x += nx;
            out.n_d += nd;
        }
        else
        {
            if (nx > 0)
            {
                const Eigen::MatrixXd cx = xs.topRows(nx).rowwise() - mean_x.transpose();
                out.xx.noalias() += cx.transpose() * cx;
            }
            if (nd > 0)
            {
                const Eigen::MatrixXd cd = ds.topRows(nd).rowwise() - mean_d.transpose();
                out.dd.noalias() += cd.transpose() * cd;
            }
        }
    }
}

Moments accumulate(const HyperspectralCube& cube, const std::vector<std::uint8_t>& region, int pass,
                   const Eigen::VectorXd& mean_x, const Eigen::VectorXd& mean_d, Execution exec)
{
    const int blocks = (cube.rows() + kBlockRows - 1) / kBlockRows;
    std::vector<Moments> partial(std::size_t(blocks), Moments(cube.bands()));
    const auto run = [&](int blk) {
        accumulate_block(cube, region, blk * kBlockRows, std::min(cube.rows(), (blk + 1) * kBlockRows), pass, mean_x,
                         mean_d, partial[std::size_t(blk)]);
    };
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(dynamic)
        for (int blk = 0; blk < blocks; ++blk)
            run(blk);
    }
    else
    {
        for (int blk = 0; blk < blocks; ++blk)
            run(blk);
    }
    // Fixed reduction order keeps the result independent of thread scheduling.
    Moments total(cube.bands());
    for (const auto& p : partial)
    {
        total.sum_x += p.sum_x;
        total.sum_d += p.sum_d;
        total.xx += p.xx;
        total.dd += p.dd;
        total.n_x += p.n_x;
        total.n_d += p.n_d;
    }
    return total;
}
}  // namespace

MnfModel mnf_fit(const HyperspectralCube& cube, std::span<const std::uint8_t> mask, const MnfSettings& settings,
                 Execution exec)
{
    const int bands = cube.bands();
    if (!mask.empty() && mask.size() != cube.pixel_count())
        throw std::invalid_argument("mnf_fit: mask size does not match the cube");
    std::vector<std::uint8_t> region(cube.pixel_count());
    for (std::size_t i = 0; i < region.size(); ++i)
    {
        const bool valid = cube.valid.empty() || cube.valid[i] != 0;
        region[i] = valid && (mask.empty() || mask[i] != 0) ? 1 : 0;
    }

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(bands);
    const Moments first = accumulate(cube, region, 0, zero, zero, exec);
    if (first.n_x < bands + 1)
        throw std::invalid_argument("mnf_fit: region has " + std::to_string(first.n_x) + " pixels, need at least " +
                                    std::to_string(bands + 1));
    if (first.n_d < 2)
        throw std::invalid_argument("mnf_fit: region has no horizontal neighbour pairs");
    const Eigen::VectorXd mean_x = first.sum_x / double(first.n_x);
    const Eigen::VectorXd mean_d = first.sum_d / double(first.n_d);
    const Moments second = accumulate(cube, region, 1, mean_x, mean_d, exec);

    const Eigen::MatrixXd signal = second.xx / double(first.n_x - 1);
    const Eigen::MatrixXd noise = second.dd / (2.0 * double(first.n_d - 1));
    return mnf_from_statistics(mean_x, signal, noise, default_retained_k(bands, settings.retain_fraction));
}

Eigen::VectorXd mnf_transform(const MnfModel& model, std::span<const float> spectrum, int k)
{
    if (k == 0)
        k = model.retained_k;
    if (k < 1 || k > model.bands())
        throw std::invalid_argument("mnf_transform: retained_k outside [1, bands]");
    if (static_cast<int>(spectrum.size()) != model.bands())
        throw std::invalid_argument("mnf_transform: spectrum length does not match the model");
    Eigen::VectorXd x(model.bands());
    for (int b = 0; b < model.bands(); ++b)
        x(b) = spectrum[std::size_t(b)] - model.mean(b);
    return model.components.topRows(k) * x;
}

Eigen::MatrixXd mnf_transform(const MnfModel& model, const Eigen::MatrixXd& spectra, int k)
{
    if (k == 0)
        k = model.retained_k;
    if (k < 1 || k > model.bands())
        throw std::invalid_argument("mnf_transform: retained_k outside [1, bands]");
    if (spectra.cols() != model.bands())
        throw std::invalid_argument("mnf_transform: spectrum length does not match the model");
    return (spectra.rowwise() - model.mean.transpose()) * model.components.topRows(k).transpose();
}

Eigen::VectorXd mnf_inverse(const MnfModel& model, const Eigen::VectorXd& reduced)
{
    const Eigen::Index k = reduced.size();
    if (k < 1 || k > model.bands())
        throw std::invalid_argument("mnf_inverse: reduced length outside [1, bands]");
    // V^T N V = I, so (V^T)^-1 = N V.
    return model.mean + model.noise_covariance * (model.components.topRows(k).transpose() * reduced);
}

}  // namespace prism
