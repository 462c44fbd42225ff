#pragma once
/**
 * @file   classifier.hpp
 * @brief  Stage-one pixel classifier: repeated [Conv1d -> MaxPool1d -> ReLU ->
 *         BatchNorm1d] blocks over the reduced spectrum, then flatten and
 *         dense layers to class logits. Trained with plain mini-batch SGD on
 *         softmax cross-entropy; everything is double precision so analytic
 *         gradients can be checked against finite differences.
 */

#include "prism/cube.hpp"
#include "prism/mnf.hpp"
#include "prism/parallel.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prism
{

struct ConvBlockSpec
{
    int kernel = 5;
    int channels = 16;
    int pool = 2;

    friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

struct ClassifierSpec
{
    std::vector<ConvBlockSpec> blocks{{5, 16, 2}, {3, 32, 2}};
    std::vector<int> hidden;  ///< widths of dense layers before the logits layer
    int class_count = 4;
    double learning_rate = 0.01;
    int batch_size = 64;
    int max_epochs = 50;
    std::uint64_t seed = 1;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;  ///< running = momentum * running + (1 - momentum) * batch

    /// Length of the flattened feature vector after all blocks, or 0 if a block collapses it.
    [[nodiscard]] int flattened_length(int input_length) const noexcept;
    void validate(int input_length) const;

    friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// Named view of one parameter tensor and its gradient.
struct ParamView
{
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

class PixelClassifier
{
  public:
    PixelClassifier() = default;
    /// Randomly initialised network (He-uniform, seeded by spec.seed).
    PixelClassifier(const ClassifierSpec& spec, int input_length);

    [[nodiscard]] const ClassifierSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] int input_length() const noexcept { return input_length_; }
    [[nodiscard]] int class_count() const noexcept { return spec_.class_count; }

    /// Inference-mode logits for n inputs laid out row-major (n x input_length).
    [[nodiscard]] std::vector<double> logits(std::span<const double> inputs, int n) const;

    /// Arg-max class and its softmax probability for each input.
    void predict(std::span<const double> inputs, int n, std::span<int> labels, std::span<double> confidence) const;

    /// Training-mode forward and backward pass; fills every gradient and returns the mean loss.
    /// Batch-norm running statistics are updated only when `update_running_stats` is set.
    double loss_and_gradients(std::span<const double> inputs, std::span<const int> labels, int n,
                              bool update_running_stats = false);

    /// Training-mode loss without touching gradients or running statistics.
    [[nodiscard]] double training_loss(std::span<const double> inputs, std::span<const int> labels, int n) const;

    /// Gradient of the training-mode loss with respect to the inputs (after loss_and_gradients).
    [[nodiscard]] const std::vector<double>& input_gradient() const noexcept { return input_grad_; }

    void sgd_step(double learning_rate);

    [[nodiscard]] std::vector<ParamView> parameters();
    /// Every persistent tensor (parameters then batch-norm running statistics), in file order.
    [[nodiscard]] std::vector<std::vector<double>*> state();
    [[nodiscard]] std::vector<const std::vector<double>*> state() const;

    struct Conv
    {
        int in = 0, out = 0, kernel = 0;
        std::vector<double> w, b, gw, gb;
    };
    struct Norm
    {
        int channels = 0;
        std::vector<double> gamma, beta, ggamma, gbeta, running_mean, running_var;
    };
    struct Dense
    {
        int in = 0, out = 0;
        std::vector<double> w, b, gw, gb;
    };
    struct Block
    {
        Conv conv;
        int pool = 2;
        Norm norm;
    };

  private:
    struct Tape;
    double forward(std::span<const double> inputs, int n, bool training, Tape* tape,
                   std::vector<double>& logits_out) const;

    ClassifierSpec spec_;
    int input_length_ = 0;
    std::vector<Block> blocks_;
    std::vector<Dense> dense_;
    std::vector<double> input_grad_;
};

struct LabeledSpectra
{
    int length = 0;
    std::vector<double> values;  ///< count x length
    std::vector<int> labels;     ///< class index in [0, class_count)

    [[nodiscard]] int count() const noexcept { return static_cast<int>(labels.size()); }
    void add(std::span<const double> spectrum, int label);
};

struct TrainedClassifier
{
    PixelClassifier model;
    double training_accuracy = 0.0;
    int epochs_run = 0;
};

/// Mini-batch SGD; stops early once training accuracy reaches 1. Bit-reproducible for a given seed.
[[nodiscard]] TrainedClassifier train_pixel_classifier(const ClassifierSpec& spec, const LabeledSpectra& data);

/// Fraction of samples the model labels correctly (inference mode).
[[nodiscard]] double accuracy(const PixelClassifier& model, const LabeledSpectra& data);

/// Per-pixel labels over a region: 0 is background, class index + 1 otherwise.
struct PixelLabelMap
{
    int rows = 0;
    int cols = 0;
    int class_count = 0;  ///< object classes, excluding background
    std::vector<int> labels;
    std::vector<float> confidence;

    [[nodiscard]] int label(int r, int c) const noexcept { return labels[std::size_t(r) * cols + c]; }
};

/// Classifies pixels where `region` is non-zero: MNF-reduce, then run the network.
/// Other pixels are background with confidence 1.
[[nodiscard]] PixelLabelMap predict_pixel_labels(const HyperspectralCube& cube, std::span<const std::uint8_t> region,
                                                 const PixelClassifier& model, const MnfModel& mnf,
                                                 Execution exec = Execution::parallel);

}  // namespace prism
