#include "prism/classifier.hpp"
#include "prism/mnf.hpp"

#include "doctest.h"
#include "support.hpp"

#include <stdexcept>
#include <cmath>
#include <random>

using namespace prism;

namespace
{
ClassifierSpec tiny_spec()
{
    ClassifierSpec s;
    s.blocks = {{3, 2, 2}, {3, 3, 2}};
    s.hidden = {5};
    s.class_count = 3;
    s.seed = 17;
    return s;
}

std::vector<double> random_inputs(int n, int len, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(std::size_t(n) * len);
    for (auto& v : x)
        v = g(rng);
    return x;
}

double rel_error(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Three classes of noisy smooth curves.
LabeledSpectra toy_dataset(int per_class, int len, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.05);
    LabeledSpectra d;
    d.length = len;
    std::vector<double> x(static_cast<std::size_t>(len));
    for (int i = 0; i < per_class; ++i)
        for (int c = 0; c < 3; ++c)
        {
            for (int b = 0; b < len; ++b)
                x[std::size_t(b)] = std::sin(0.3 * b * (c + 1)) + g(rng);
            d.add(x, c);
        }
    return d;
}
}  // namespace

TEST_CASE("flattened length and spec validation")
{
    ClassifierSpec s;
    CHECK(s.flattened_length(67) == 32 * 16);
    s.blocks = {{5, 4, 8}, {3, 4, 8}};
    CHECK(s.flattened_length(20) == 0);
    CHECK_THROWS_AS(s.validate(20), std::invalid_argument);
    ClassifierSpec t;
    t.blocks[0].pool = 0;
    CHECK_THROWS_AS(t.validate(67), std::invalid_argument);
    ClassifierSpec u;
    u.class_count = 0;
    CHECK_THROWS_AS(u.validate(67), std::invalid_argument);
    ClassifierSpec none;
    none.blocks.clear();
    CHECK(none.flattened_length(10) == 10);
}

TEST_CASE("analytic gradients match central differences on every tensor")
{
    const int n = 6, len = 12;
    PixelClassifier net(tiny_spec(), len);
    const auto x = random_inputs(n, len, 1);
    const std::vector<int> y{0, 1, 2, 2, 1, 0};
    net.loss_and_gradients(x, y, n);
    const double h = 1e-6;
    for (auto& p : net.parameters())
    {
        CAPTURE(p.name);
        double worst = 0.0;
        for (std::size_t i = 0; i < p.value->size(); ++i)
        {
            const double keep = (*p.value)[i];
            (*p.value)[i] = keep + h;
            const double up = net.training_loss(x, y, n);
            (*p.value)[i] = keep - h;
            const double down = net.training_loss(x, y, n);
            (*p.value)[i] = keep;
            worst = std::max(worst, rel_error((up - down) / (2 * h), (*p.grad)[i]));
        }
        CHECK(worst <= 1e-4);
    }
    // Input gradient as well.
    auto xv = x;
    const auto gx = net.input_gradient();
    double worst = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i)
    {
        const double keep = xv[i];
        xv[i] = keep + h;
        const double up = net.training_loss(xv, y, n);
        xv[i] = keep - h;
        const double down = net.training_loss(xv, y, n);
        xv[i] = keep;
        worst = std::max(worst, rel_error((up - down) / (2 * h), gx[i]));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("parameter names cover every layer")
{
    PixelClassifier net(tiny_spec(), 12);
    std::vector<std::string> names;
    for (const auto& p : net.parameters())
        names.push_back(p.name);
    const std::vector<std::string> expect{"block0.conv.weight", "block0.conv.bias",  "block0.norm.gamma",
                                          "block0.norm.beta",   "block1.conv.weight", "block1.conv.bias",
                                          "block1.norm.gamma",  "block1.norm.beta",   "dense0.weight",
                                          "dense0.bias",        "dense1.weight",      "dense1.bias"};
    CHECK(names == expect);
    CHECK(net.state().size() == expect.size() + 4);
}

TEST_CASE("running statistics only move when asked")
{
    PixelClassifier net(tiny_spec(), 12);
    const auto x = random_inputs(8, 12, 2);
    const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    const auto before = net.state();
    std::vector<std::vector<double>> snapshot;
    for (const auto* t : before)
        snapshot.push_back(*t);
    net.loss_and_gradients(x, y, 8, false);
    for (std::size_t i = 0; i < snapshot.size(); ++i)
        CHECK(*net.state()[i] == snapshot[i]);
    net.loss_and_gradients(x, y, 8, true);
    CHECK(*net.state().back() != snapshot.back());
}

TEST_CASE("predictions are the arg-max of the logits with softmax confidence")
{
    PixelClassifier net(tiny_spec(), 12);
    const auto x = random_inputs(10, 12, 3);
    const auto logits = net.logits(x, 10);
    std::vector<int> labels(10);
    std::vector<double> conf(10);
    net.predict(x, 10, labels, conf);
    for (int i = 0; i < 10; ++i)
    {
        const double* l = logits.data() + i * 3;
        const int best = int(std::max_element(l, l + 3) - l);
        CHECK(labels[std::size_t(i)] == best);
        double z = 0.0;
        for (int c = 0; c < 3; ++c)
            z += std::exp(l[c] - l[best]);
        CHECK(conf[std::size_t(i)] == doctest::Approx(1.0 / z).epsilon(1e-12));
        CHECK(conf[std::size_t(i)] >= 1.0 / 3.0 - 1e-12);
    }
}

TEST_CASE("training is deterministic and learns a separable set")
{
    ClassifierSpec s = tiny_spec();
    s.batch_size = 16;
    s.max_epochs = 30;
    s.learning_rate = 0.05;
    const LabeledSpectra train = toy_dataset(60, 16, 4);
    const LabeledSpectra held = toy_dataset(40, 16, 5);
    const TrainedClassifier a = train_pixel_classifier(s, train);
    const TrainedClassifier b = train_pixel_classifier(s, train);
    CHECK(a.epochs_run == b.epochs_run);
    for (std::size_t i = 0; i < a.model.state().size(); ++i)
        CHECK(*a.model.state()[i] == *b.model.state()[i]);
    CHECK(a.training_accuracy >= 0.95);
    CHECK(accuracy(a.model, held) >= 0.95);
}

TEST_CASE("training rejects bad data")
{
    ClassifierSpec s = tiny_spec();
    LabeledSpectra d = toy_dataset(2, 16, 1);
    CHECK_THROWS_AS((void)train_pixel_classifier(s, d), std::invalid_argument);
    LabeledSpectra e = toy_dataset(80, 16, 1);
    e.labels[0] = 7;
    CHECK_THROWS_AS((void)train_pixel_classifier(s, e), std::invalid_argument);
}

TEST_CASE("pixel label map covers only the requested region")
{
    const HyperspectralCube cube = testing::mixed_source_cube(10, 12, 8, 6);
    const MnfModel mnf = mnf_fit(cube);
    ClassifierSpec s = tiny_spec();
    s.blocks = {{3, 2, 2}};
    PixelClassifier net(s, mnf.retained_k);
    std::vector<std::uint8_t> region(cube.pixel_count(), 0);
    region[5] = region[17] = 1;
    const PixelLabelMap m = predict_pixel_labels(cube, region, net, mnf);
    CHECK(m.class_count == 3);
    for (std::size_t i = 0; i < region.size(); ++i)
    {
        if (region[i])
        {
            CHECK(m.labels[i] >= 1);
            CHECK(m.labels[i] <= 3);
        }
        else
        {
            CHECK(m.labels[i] == 0);
            CHECK(m.confidence[i] == 1.0f);
        }
    }
    PixelClassifier wrong(s, mnf.retained_k + 1);
    CHECK_THROWS_AS((void)predict_pixel_labels(cube, region, wrong, mnf), std::invalid_argument);
}
