#include "prism/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace prism
{

int ClassifierSpec::flattened_length(int input_length) const noexcept
{
    int len = input_length;
    int channels = 1;
    for (const auto& b : blocks)
    {
        if (b.kernel < 1 || b.pool < 1 || b.channels < 1)
            return 0;
        const int pad = (b.kernel - 1) / 2;
        len = len + 2 * pad - b.kernel + 1;
        if (len < 1)
            return 0;
        len /= b.pool;
        if (len < 1)
            return 0;
        channels = b.channels;
    }
    return len * channels;
}

void ClassifierSpec::validate(int input_length) const
{
    if (input_length < 1)
        throw std::invalid_argument("classifier: input length must be >= 1");
    for (const auto& b : blocks)
    {
        if (b.pool < 1)
            throw std::invalid_argument("classifier: pool stride must be >= 1");
        if (b.kernel < 1 || b.channels < 1)
            throw std::invalid_argument("classifier: kernel size and channel count must be >= 1");
    }
    if (flattened_length(input_length) < 1)
        throw std::invalid_argument("classifier: blocks reduce an input of length " + std::to_string(input_length) +
                                    " to nothing");
    for (int h : hidden)
        if (h < 1)
            throw std::invalid_argument("classifier: hidden width must be >= 1");
    if (class_count < 1)
        throw std::invalid_argument("classifier: class count must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("classifier: learning rate must be > 0");
    if (batch_size < 1 || max_epochs < 1)
        throw std::invalid_argument("classifier: batch size and epoch count must be >= 1");
    if (!(bn_epsilon > 0.0) || !(bn_momentum >= 0.0 && bn_momentum < 1.0))
        throw std::invalid_argument("classifier: invalid batch-norm settings");
}

// ---------------------------------------------------------------------------
// Layer kernels. Activations are (n, channels, length), length fastest.

namespace
{
void conv_forward(const PixelClassifier::Conv& cv, const double* x, int n, int len_in, double* y, int len_out)
{
    const int pad = (cv.kernel - 1) / 2;
    for (int s = 0; s < n; ++s)
        for (int o = 0; o < cv.out; ++o)
        {
            double* yr = y + (std::size_t(s) * cv.out + o) * len_out;
            std::fill(yr, yr + len_out, cv.b[std::size_t(o)]);
            for (int i = 0; i < cv.in; ++i)
            {
                const double* xr = x + (std::size_t(s) * cv.in + i) * len_in;
                const double* wr = cv.w.data() + (std::size_t(o) * cv.in + i) * cv.kernel;
                for (int j = 0; j < cv.kernel; ++j)
                {
                    const int shift = j - pad;
                    const int t0 = std::max(0, -shift);
                    const int t1 = std::min(len_out, len_in - shift);
                    const double w = wr[j];
                    for (int t = t0; t < t1; ++t)
                        yr[t] += w * xr[t + shift];
                }
            }
        }
}

void conv_backward(PixelClassifier::Conv& cv, const double* x, int n, int len_in, const double* dy, int len_out,
                   double* dx)
{
    const int pad = (cv.kernel - 1) / 2;
    if (dx)
        std::fill(dx, dx + std::size_t(n) * cv.in * len_in, 0.0);
    for (int s = 0; s < n; ++s)
        for (int o = 0; o < cv.out; ++o)
        {
            const double* dyr = dy + (std::size_t(s) * cv.out + o) * len_out;
            double gb = 0.0;
            for (int t = 0; t < len_out; ++t)
                gb += dyr[t];
            cv.gb[std::size_t(o)] += gb;
            for (int i = 0; i < cv.in; ++i)
            {
                const double* xr = x + (std::size_t(s) * cv.in + i) * len_in;
                double* dxr = dx ? dx + (std::size_t(s) * cv.in + i) * len_in : nullptr;
                const std::size_t wbase = (std::size_t(o) * cv.in + i) * cv.kernel;
                for (int j = 0; j < cv.kernel; ++j)
                {
                    const int shift = j - pad;
                    const int t0 = std::max(0, -shift);
                    const int t1 = std::min(len_out, len_in - shift);
                    double g = 0.0;
                    for (int t = t0; t < t1; ++t)
                        g += dyr[t] * xr[t + shift];
                    cv.gw[wbase + std::size_t(j)] += g;
                    if (dxr)
                    {
                        const double w = cv.w[wbase + std::size_t(j)];
                        for (int t = t0; t < t1; ++t)
                            dxr[t + shift] += w * dyr[t];
                    }
                }
            }
        }
}

void init_uniform(std::vector<double>& v, double bound, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> d(-bound, bound);
    for (auto& x : v)
        x = d(rng);
}
}  // namespace

PixelClassifier::PixelClassifier(const ClassifierSpec& spec, int input_length)
    : spec_(spec), input_length_(input_length)
{
    spec.validate(input_length);
    std::mt19937_64 rng(spec.seed);
    int channels = 1;
    for (const auto& bs : spec.blocks)
    {
        Block b;
        b.conv.in = channels;
        b.conv.out = bs.channels;
        b.conv.kernel = bs.kernel;
        b.conv.w.resize(std::size_t(channels) * bs.channels * bs.kernel);
        init_uniform(b.conv.w, std::sqrt(6.0 / (channels * bs.kernel)), rng);
        b.conv.b.assign(std::size_t(bs.channels), 0.0);
        b.conv.gw.assign(b.conv.w.size(), 0.0);
        b.conv.gb.assign(b.conv.b.size(), 0.0);
        b.pool = bs.pool;
        b.norm.channels = bs.channels;
        b.norm.gamma.assign(std::size_t(bs.channels), 1.0);
        b.norm.beta.assign(std::size_t(bs.channels), 0.0);
        b.norm.ggamma.assign(std::size_t(bs.channels), 0.0);
        b.norm.gbeta.assign(std::size_t(bs.channels), 0.0);
        b.norm.running_mean.assign(std::size_t(bs.channels), 0.0);
        b.norm.running_var.assign(std::size_t(bs.channels), 1.0);
        blocks_.push_back(std::move(b));
        channels = bs.channels;
    }
    int width = spec.flattened_length(input_length);
    std::vector<int> widths = spec.hidden;
    widths.push_back(spec.class_count);
    for (int out : widths)
    {
        Dense d;
        d.in = width;
        d.out = out;
        d.w.resize(std::size_t(width) * out);
        init_uniform(d.w, std::sqrt(6.0 / width), rng);
        d.b.assign(std::size_t(out), 0.0);
        d.gw.assign(d.w.size(), 0.0);
        d.gb.assign(d.b.size(), 0.0);
        dense_.push_back(std::move(d));
        width = out;
    }
}

struct PixelClassifier::Tape
{
    struct BlockTape
    {
        int len_in = 0, len_conv = 0, len_pool = 0;
        std::vector<double> input, conv, pooled;  // pooled is pre-activation
        std::vector<int> argmax;
        std::vector<double> xhat, inv_std, batch_mean, batch_var;
    };
    std::vector<BlockTape> blocks;
    std::vector<std::vector<double>> dense_in;  // input to each dense layer (post-ReLU for hidden)
    std::vector<std::vector<double>> dense_pre;  // pre-activation outputs of hidden layers
    std::vector<double> probs;
};

double PixelClassifier::forward(std::span<const double> inputs, int n, bool training, Tape* tape,
                                std::vector<double>& logits_out) const
{
    if (static_cast<std::size_t>(n) * input_length_ != inputs.size())
        throw std::invalid_argument("classifier: input size does not match batch x input length");
    std::vector<double> act(inputs.begin(), inputs.end());
    int len = input_length_;
    if (tape)
        tape->blocks.assign(blocks_.size(), {});

    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
    {
        const Block& b = blocks_[bi];
        const int pad = (b.conv.kernel - 1) / 2;
        const int len_conv = len + 2 * pad - b.conv.kernel + 1;
        const int len_pool = len_conv / b.pool;
        const int ch = b.conv.out;

        std::vector<double> conv(std::size_t(n) * ch * len_conv);
        conv_forward(b.conv, act.data(), n, len, conv.data(), len_conv);

        std::vector<double> pooled(std::size_t(n) * ch * len_pool);
        std::vector<int> argmax(pooled.size());
        for (std::size_t row = 0; row < std::size_t(n) * ch; ++row)
        {
            const double* src = conv.data() + row * len_conv;
            for (int t = 0; t < len_pool; ++t)
            {
                int best = t * b.pool;
                for (int q = best + 1; q < (t + 1) * b.pool; ++q)
                    if (src[q] > src[best])
                        best = q;
                pooled[row * len_pool + t] = src[best];
                argmax[row * len_pool + t] = best;
            }
        }

        std::vector<double> out(pooled.size());
        std::vector<double> xhat(pooled.size());
        const auto nch = static_cast<std::size_t>(ch);
        std::vector<double> inv_std(nch), bmean(nch), bvar(nch);
        const double m = double(n) * len_pool;
        for (int c = 0; c < ch; ++c)
        {
            double mean, var;
            if (training)
            {
                double s = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int t = 0; t < len_pool; ++t)
                        s += std::max(0.0, pooled[(std::size_t(i) * ch + c) * len_pool + t]);
                mean = s / m;
                double v = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int t = 0; t < len_pool; ++t)
                    {
                        const double d = std::max(0.0, pooled[(std::size_t(i) * ch + c) * len_pool + t]) - mean;
                        v += d * d;
                    }
                var = v / m;
            }
            else
            {
                mean = b.norm.running_mean[std::size_t(c)];
                var = b.norm.running_var[std::size_t(c)];
            }
            const double is = 1.0 / std::sqrt(var + spec_.bn_epsilon);
            inv_std[std::size_t(c)] = is;
            bmean[std::size_t(c)] = mean;
            bvar[std::size_t(c)] = var;
            const double g = b.norm.gamma[std::size_t(c)], be = b.norm.beta[std::size_t(c)];
            for (int i = 0; i < n; ++i)
                for (int t = 0; t < len_pool; ++t)
                {
                    const std::size_t k = (std::size_t(i) * ch + c) * len_pool + t;
                    const double xh = (std::max(0.0, pooled[k]) - mean) * is;
                    xhat[k] = xh;
                    out[k] = g * xh + be;
                }
        }

        if (tape)
        {
            auto& bt = tape->blocks[bi];
            bt.len_in = len;
            bt.len_conv = len_conv;
            bt.len_pool = len_pool;
            bt.input = std::move(act);
            bt.conv = std::move(conv);
            bt.pooled = std::move(pooled);
            bt.argmax = std::move(argmax);
            bt.xhat = std::move(xhat);
            bt.inv_std = std::move(inv_std);
            bt.batch_mean = std::move(bmean);
            bt.batch_var = std::move(bvar);
        }
        act = std::move(out);
        len = len_pool;
    }

    // Flatten is a no-op on the (n, ch, len) layout.
    if (tape)
    {
        tape->dense_in.assign(dense_.size(), {});
        tape->dense_pre.assign(dense_.size(), {});
    }
    for (std::size_t di = 0; di < dense_.size(); ++di)
    {
        const Dense& d = dense_[di];
        std::vector<double> out(std::size_t(n) * d.out);
        for (int i = 0; i < n; ++i)
        {
            const double* x = act.data() + std::size_t(i) * d.in;
            for (int o = 0; o < d.out; ++o)
            {
                const double* w = d.w.data() + std::size_t(o) * d.in;
                double s = d.b[std::size_t(o)];
                for (int k = 0; k < d.in; ++k)
                    s += w[k] * x[k];
                out[std::size_t(i) * d.out + o] = s;
            }
        }
        const bool last = di + 1 == dense_.size();
        if (tape)
        {
            tape->dense_in[di] = std::move(act);
            if (!last)
                tape->dense_pre[di] = out;
        }
        if (!last)
            for (auto& v : out)
                v = std::max(0.0, v);
        act = std::move(out);
    }
    logits_out = std::move(act);
    return 0.0;
}

namespace
{
// Mean softmax cross-entropy; writes probabilities when asked.
double softmax_xent(const std::vector<double>& logits, std::span<const int> labels, int n, int classes,
                    std::vector<double>* probs)
{
    if (probs)
        probs->resize(logits.size());
    double loss = 0.0;
    for (int i = 0; i < n; ++i)
    {
        const double* z = logits.data() + std::size_t(i) * classes;
        const double mx = *std::max_element(z, z + classes);
        double s = 0.0;
        for (int c = 0; c < classes; ++c)
            s += std::exp(z[c] - mx);
        const double lse = mx + std::log(s);
        loss += lse - z[labels[std::size_t(i)]];
        if (probs)
            for (int c = 0; c < classes; ++c)
                (*probs)[std::size_t(i) * classes + c] = std::exp(z[c] - lse);
    }
    return loss / n;
}

void check_labels(std::span<const int> labels, int n, int classes)
{
    if (labels.size() != std::size_t(n))
        throw std::invalid_argument("classifier: label count does not match batch size");
    for (int l : labels)
        if (l < 0 || l >= classes)
            throw std::invalid_argument("classifier: label outside [0, class_count)");
}
}  // namespace

std::vector<double> PixelClassifier::logits(std::span<const double> inputs, int n) const
{
    std::vector<double> z;
    forward(inputs, n, false, nullptr, z);
    return z;
}

void PixelClassifier::predict(std::span<const double> inputs, int n, std::span<int> labels,
                              std::span<double> confidence) const
{
    const auto z = logits(inputs, n);
    const int classes = spec_.class_count;
    for (int i = 0; i < n; ++i)
    {
        const double* zi = z.data() + std::size_t(i) * classes;
        const int best = static_cast<int>(std::max_element(zi, zi + classes) - zi);
        double s = 0.0;
        for (int c = 0; c < classes; ++c)
            s += std::exp(zi[c] - zi[best]);
        labels[std::size_t(i)] = best;
        confidence[std::size_t(i)] = 1.0 / s;
    }
}

double PixelClassifier::training_loss(std::span<const double> inputs, std::span<const int> labels, int n) const
{
    check_labels(labels, n, spec_.class_count);
    std::vector<double> z;
    forward(inputs, n, true, nullptr, z);
    return softmax_xent(z, labels, n, spec_.class_count, nullptr);
}

double PixelClassifier::loss_and_gradients(std::span<const double> inputs, std::span<const int> labels, int n,
                                           bool update_running_stats)
{
    check_labels(labels, n, spec_.class_count);
    Tape tape;
    std::vector<double> z;
    forward(inputs, n, true, &tape, z);
    const int classes = spec_.class_count;
    const double loss = softmax_xent(z, labels, n, classes, &tape.probs);

    for (auto& p : parameters())
        std::fill(p.grad->begin(), p.grad->end(), 0.0);

    std::vector<double> grad = tape.probs;
    for (int i = 0; i < n; ++i)
        grad[std::size_t(i) * classes + labels[std::size_t(i)]] -= 1.0;
    for (auto& g : grad)
        g /= n;

    for (std::size_t di = dense_.size(); di-- > 0;)
    {
        Dense& d = dense_[di];
        const bool last = di + 1 == dense_.size();
        if (!last)
            for (std::size_t k = 0; k < grad.size(); ++k)
                if (tape.dense_pre[di][k] <= 0.0)
                    grad[k] = 0.0;
        const auto& x = tape.dense_in[di];
        std::vector<double> dx(std::size_t(n) * d.in, 0.0);
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < d.out; ++o)
            {
                const double g = grad[std::size_t(i) * d.out + o];
                d.gb[std::size_t(o)] += g;
                double* gw = d.gw.data() + std::size_t(o) * d.in;
                const double* w = d.w.data() + std::size_t(o) * d.in;
                const double* xi = x.data() + std::size_t(i) * d.in;
                double* dxi = dx.data() + std::size_t(i) * d.in;
                for (int k = 0; k < d.in; ++k)
                {
                    gw[k] += g * xi[k];
                    dxi[k] += g * w[k];
                }
            }
        grad = std::move(dx);
    }

    for (std::size_t bi = blocks_.size(); bi-- > 0;)
    {
        Block& b = blocks_[bi];
        auto& bt = tape.blocks[bi];
        const int ch = b.conv.out;
        const int lp = bt.len_pool;
        const double m = double(n) * lp;

        // batch norm (input is the post-ReLU pooled value)
        std::vector<double> dpool(grad.size());
        for (int c = 0; c < ch; ++c)
        {
            const double g = b.norm.gamma[std::size_t(c)];
            double sum_dxh = 0.0, sum_dxh_xh = 0.0, dgamma = 0.0, dbeta = 0.0;
            for (int i = 0; i < n; ++i)
                for (int t = 0; t < lp; ++t)
                {
                    const std::size_t k = (std::size_t(i) * ch + c) * lp + t;
                    dgamma += grad[k] * bt.xhat[k];
                    dbeta += grad[k];
                    const double dxh = grad[k] * g;
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * bt.xhat[k];
                }
            b.norm.ggamma[std::size_t(c)] += dgamma;
            b.norm.gbeta[std::size_t(c)] += dbeta;
            const double is = bt.inv_std[std::size_t(c)];
            for (int i = 0; i < n; ++i)
                for (int t = 0; t < lp; ++t)
                {
                    const std::size_t k = (std::size_t(i) * ch + c) * lp + t;
                    const double dxh = grad[k] * g;
                    double dx = is / m * (m * dxh - sum_dxh - bt.xhat[k] * sum_dxh_xh);
                    if (bt.pooled[k] <= 0.0)  // ReLU
                        dx = 0.0;
                    dpool[k] = dx;
                }
        }

        // max pool
        std::vector<double> dconv(std::size_t(n) * ch * bt.len_conv, 0.0);
        for (std::size_t row = 0; row < std::size_t(n) * ch; ++row)
            for (int t = 0; t < lp; ++t)
                dconv[row * bt.len_conv + bt.argmax[row * lp + t]] += dpool[row * lp + t];

        std::vector<double> dx(std::size_t(n) * b.conv.in * bt.len_in);
        conv_backward(b.conv, bt.input.data(), n, bt.len_in, dconv.data(), bt.len_conv, dx.data());
        grad = std::move(dx);

        if (update_running_stats)
        {
            const double mom = spec_.bn_momentum;
            const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
            for (int c = 0; c < ch; ++c)
            {
                auto& rm = b.norm.running_mean[std::size_t(c)];
                auto& rv = b.norm.running_var[std::size_t(c)];
                rm = mom * rm + (1.0 - mom) * bt.batch_mean[std::size_t(c)];
                rv = mom * rv + (1.0 - mom) * bt.batch_var[std::size_t(c)] * unbias;
            }
        }
    }
    input_grad_ = std::move(grad);
    return loss;
}

void PixelClassifier::sgd_step(double learning_rate)
{
    for (auto& p : parameters())
        for (std::size_t i = 0; i < p.value->size(); ++i)
            (*p.value)[i] -= learning_rate * (*p.grad)[i];
}

std::vector<ParamView> PixelClassifier::parameters()
{
    std::vector<ParamView> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
    {
        auto& b = blocks_[i];
        const std::string p = "block" + std::to_string(i) + ".";
        out.push_back({p + "conv.weight", &b.conv.w, &b.conv.gw});
        out.push_back({p + "conv.bias", &b.conv.b, &b.conv.gb});
        out.push_back({p + "norm.gamma", &b.norm.gamma, &b.norm.ggamma});
        out.push_back({p + "norm.beta", &b.norm.beta, &b.norm.gbeta});
    }
    for (std::size_t i = 0; i < dense_.size(); ++i)
    {
        auto& d = dense_[i];
        const std::string p = "dense" + std::to_string(i) + ".";
        out.push_back({p + "weight", &d.w, &d.gw});
        out.push_back({p + "bias", &d.b, &d.gb});
    }
    return out;
}

std::vector<std::vector<double>*> PixelClassifier::state()
{
    std::vector<std::vector<double>*> out;
    for (auto& p : parameters())
        out.push_back(p.value);
    for (auto& b : blocks_)
    {
        out.push_back(&b.norm.running_mean);
        out.push_back(&b.norm.running_var);
    }
    return out;
}

std::vector<const std::vector<double>*> PixelClassifier::state() const
{
    auto mutable_state = const_cast<PixelClassifier*>(this)->state();
    return {mutable_state.begin(), mutable_state.end()};
}

// ---------------------------------------------------------------------------
// Training

void LabeledSpectra::add(std::span<const double> spectrum, int label)
{
    if (length == 0)
        length = static_cast<int>(spectrum.size());
    if (static_cast<int>(spectrum.size()) != length)
        throw std::invalid_argument("LabeledSpectra: spectrum length mismatch");
    values.insert(values.end(), spectrum.begin(), spectrum.end());
    labels.push_back(label);
}

double accuracy(const PixelClassifier& model, const LabeledSpectra& data)
{
    if (data.count() == 0)
        return 0.0;
    constexpr int chunk = 512;
    int correct = 0;
    std::vector<int> pred(chunk);
    std::vector<double> conf(chunk);
    for (int start = 0; start < data.count(); start += chunk)
    {
        const int n = std::min(chunk, data.count() - start);
        model.predict(std::span(data.values).subspan(std::size_t(start) * data.length, std::size_t(n) * data.length),
                      n, pred, conf);
        for (int i = 0; i < n; ++i)
            correct += pred[std::size_t(i)] == data.labels[std::size_t(start + i)];
    }
    return double(correct) / data.count();
}

TrainedClassifier train_pixel_classifier(const ClassifierSpec& spec, const LabeledSpectra& data)
{
    spec.validate(data.length);
    if (data.values.size() != std::size_t(data.count()) * data.length)
        throw std::invalid_argument("train_pixel_classifier: malformed dataset");
    std::vector<int> per_class(std::size_t(spec.class_count), 0);
    for (int l : data.labels)
    {
        if (l < 0 || l >= spec.class_count)
            throw std::invalid_argument("train_pixel_classifier: label outside [0, class_count)");
        ++per_class[std::size_t(l)];
    }
    for (int c = 0; c < spec.class_count; ++c)
        if (per_class[std::size_t(c)] < spec.batch_size)
            throw std::invalid_argument("train_pixel_classifier: class " + std::to_string(c) + " has " +
                                        std::to_string(per_class[std::size_t(c)]) + " samples, need at least " +
                                        std::to_string(spec.batch_size));

    TrainedClassifier result{PixelClassifier(spec, data.length), 0.0, 0};
    std::mt19937_64 rng(mix_seed(spec.seed, 0x5eed));
    std::vector<int> order(std::size_t(data.count()));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> batch;
    std::vector<int> batch_labels;
    for (int epoch = 0; epoch < spec.max_epochs; ++epoch)
    {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < data.count(); start += spec.batch_size)
        {
            const int n = std::min(spec.batch_size, data.count() - start);
            if (n < 2)
                break;  // batch norm needs two samples
            batch.resize(std::size_t(n) * data.length);
            batch_labels.resize(std::size_t(n));
            for (int i = 0; i < n; ++i)
            {
                const int src = order[std::size_t(start + i)];
                std::copy_n(data.values.begin() + std::ptrdiff_t(src) * data.length, data.length,
                            batch.begin() + std::ptrdiff_t(i) * data.length);
                batch_labels[std::size_t(i)] = data.labels[std::size_t(src)];
            }
            result.model.loss_and_gradients(batch, batch_labels, n, true);
            result.model.sgd_step(spec.learning_rate);
        }
        result.epochs_run = epoch + 1;
        result.training_accuracy = accuracy(result.model, data);
        if (result.training_accuracy >= 1.0)
            break;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Inference over a cube

PixelLabelMap predict_pixel_labels(const HyperspectralCube& cube, std::span<const std::uint8_t> region,
                                   const PixelClassifier& model, const MnfModel& mnf, Execution exec)
{
    if (model.input_length() != mnf.retained_k)
        throw std::invalid_argument("predict_pixel_labels: model input length " +
                                    std::to_string(model.input_length()) + " differs from MNF retained_k " +
                                    std::to_string(mnf.retained_k));
    if (mnf.bands() != cube.bands())
        throw std::invalid_argument("predict_pixel_labels: MNF model band count differs from the cube");
    if (!region.empty() && region.size() != cube.pixel_count())
        throw std::invalid_argument("predict_pixel_labels: region size does not match the cube");

    PixelLabelMap out;
    out.rows = cube.rows();
    out.cols = cube.cols();
    out.class_count = model.class_count();
    out.labels.assign(cube.pixel_count(), 0);
    out.confidence.assign(cube.pixel_count(), 1.0f);

    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i] && (cube.valid.empty() || cube.valid[i]))
            pixels.push_back(i);

    constexpr int chunk = 256;
    const int chunks = static_cast<int>((pixels.size() + chunk - 1) / chunk);
    const int k = mnf.retained_k;
    const int bands = cube.bands();
    const Eigen::MatrixXd proj = mnf.components.topRows(k).transpose();
    const auto run = [&](int ci) {
        const std::size_t start = std::size_t(ci) * chunk;
        const int n = static_cast<int>(std::min<std::size_t>(chunk, pixels.size() - start));
        Eigen::MatrixXd x(n, bands);
        for (int i = 0; i < n; ++i)
        {
            const float* s = cube.data().data() + pixels[start + std::size_t(i)] * std::size_t(bands);
            for (int b = 0; b < bands; ++b)
                x(i, b) = s[b];
        }
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> reduced =
            (x.rowwise() - mnf.mean.transpose()) * proj;
        std::vector<int> labels(static_cast<std::size_t>(n));
        std::vector<double> conf(static_cast<std::size_t>(n));
        model.predict(std::span(reduced.data(), std::size_t(n) * k), n, labels, conf);
        for (int i = 0; i < n; ++i)
        {
            out.labels[pixels[start + std::size_t(i)]] = labels[std::size_t(i)] + 1;
            out.confidence[pixels[start + std::size_t(i)]] = static_cast<float>(conf[std::size_t(i)]);
        }
    };
    if (exec == Execution::parallel)
    {
#pragma omp parallel for schedule(dynamic)
        for (int ci = 0; ci < chunks; ++ci)
            run(ci);
    }
    else
    {
        for (int ci = 0; ci < chunks; ++ci)
            run(ci);
    }
    return out;
}

}  // namespace prism
