#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hloc/descriptor.hpp"
#include "hloc/detail/binio.hpp"
#include "hloc/detail/rng.hpp"

namespace hloc {

// R-way softmax head over descriptors: one neuron per room. Parameters are
// kept in double for deterministic training; the file format stores float32.
struct SoftmaxModel {
    std::size_t dim = 0;
    std::vector<std::string> rooms;       // ordered; index = class
    std::vector<double> weights;          // R x m, row-major
    std::vector<double> bias;             // R

    std::size_t num_rooms() const { return rooms.size(); }
};

struct TrainConfig {
    int batch_size = 16;
    int epochs = 30;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw std::invalid_argument("momentum must be in [0, 1)");
    }
};

namespace detail_classifier {

inline void check_dim(const SoftmaxModel& model, std::size_t got) {
    if (got != model.dim)
        throw std::runtime_error("descriptor dim " + std::to_string(got) +
                                 " does not match model dim " + std::to_string(model.dim));
}

}  // namespace detail_classifier

// Log-sum-exp stabilized softmax of W*d + b.
inline std::vector<double> forward(const SoftmaxModel& model, std::span<const float> d) {
    detail_classifier::check_dim(model, d.size());
    const std::size_t R = model.num_rooms();
    std::vector<double> z(R);
    for (std::size_t j = 0; j < R; ++j) {
        const double* w = model.weights.data() + j * model.dim;
        double acc = model.bias[j];
        for (std::size_t i = 0; i < model.dim; ++i) acc += w[i] * d[i];
        z[j] = acc;
    }
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return z;
}

// Mean cross-entropy over a batch; the log is floored at log(1e-12) so a
// zero probability on the true class stays finite.
inline double cross_entropy(const std::vector<std::vector<double>>& batch_probs,
                            const std::vector<int>& labels) {
    if (batch_probs.size() != labels.size() || batch_probs.empty())
        throw std::invalid_argument("batch/labels shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < batch_probs.size(); ++i) {
        const auto& p = batch_probs[i];
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= p.size())
            throw std::invalid_argument("label out of range");
        loss -= std::log(std::max(p[static_cast<std::size_t>(y)], 1e-12));
    }
    return loss / static_cast<double>(batch_probs.size());
}

struct BatchGradient {
    double loss = 0.0;
    std::vector<double> d_weights;  // R x m
    std::vector<double> d_bias;     // R
};

// Analytic gradient of cross-entropy(softmax(W d + b)) averaged over the
// batch: dz_j = (p_j - y_j) / B.
inline BatchGradient batch_gradient(const SoftmaxModel& model,
                                    const std::vector<std::span<const float>>& batch,
                                    const std::vector<int>& labels) {
    if (batch.size() != labels.size() || batch.empty())
        throw std::invalid_argument("batch/labels shape mismatch");
    const std::size_t R = model.num_rooms();
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    BatchGradient g;
    g.d_weights.assign(R * model.dim, 0.0);
    g.d_bias.assign(R, 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<double> p = forward(model, batch[i]);
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= R)
            throw std::invalid_argument("label out of range");
        g.loss -= std::log(std::max(p[static_cast<std::size_t>(y)], 1e-12));
        for (std::size_t j = 0; j < R; ++j) {
            double dz = (p[j] - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) * inv_b;
            g.d_bias[j] += dz;
            double* gw = g.d_weights.data() + j * model.dim;
            const float* d = batch[i].data();
            for (std::size_t k = 0; k < model.dim; ++k) gw[k] += dz * d[k];
        }
    }
    g.loss *= inv_b;
    return g;
}

struct Prediction {
    int room_index = 0;
    std::string room;
    std::vector<double> probs;
};

// Argmax of the softmax output; ties break to the lowest class index.
inline Prediction predict_room(const SoftmaxModel& model, std::span<const float> d) {
    Prediction pred;
    pred.probs = forward(model, d);
    for (std::size_t j = 1; j < pred.probs.size(); ++j)
        if (pred.probs[j] > pred.probs[static_cast<std::size_t>(pred.room_index)])
            pred.room_index = static_cast<int>(j);
    pred.room = model.rooms[static_cast<std::size_t>(pred.room_index)];
    return pred;
}

inline double accuracy(const SoftmaxModel& model, const DescriptorSet& ds,
                       const std::vector<int>& labels) {
    if (ds.rows.size() != labels.size() || ds.rows.empty())
        throw std::invalid_argument("dataset/labels shape mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.rows.size(); ++i)
        if (predict_room(model, ds.rows[i].values).room_index == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.rows.size());
}

// Class indices from the manifest's sorted room list, aligned row by row.
inline std::vector<int> labels_from_manifest(const DescriptorSet& ds, const Manifest& m) {
    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& rec : m.records) by_id[rec.id] = &rec;
    std::vector<int> labels;
    labels.reserve(ds.rows.size());
    for (const auto& row : ds.rows) {
        auto it = by_id.find(row.source_id);
        if (it == by_id.end())
            throw std::runtime_error("descriptor id not in manifest: " + row.source_id);
        labels.push_back(m.room_index(it->second->room));
    }
    return labels;
}

// As above but indices come from a foreign room list (e.g. labeling the
// validation set with the training manifest's classes).
inline std::vector<int> labels_from_manifest(const DescriptorSet& ds, const Manifest& m,
                                             const std::vector<std::string>& rooms) {
    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& rec : m.records) by_id[rec.id] = &rec;
    std::vector<int> labels;
    labels.reserve(ds.rows.size());
    for (const auto& row : ds.rows) {
        auto it = by_id.find(row.source_id);
        if (it == by_id.end())
            throw std::runtime_error("descriptor id not in manifest: " + row.source_id);
        auto rit = std::find(rooms.begin(), rooms.end(), it->second->room);
        if (rit == rooms.end())
            throw std::runtime_error("room " + it->second->room + " not in the class list");
        labels.push_back(static_cast<int>(rit - rooms.begin()));
    }
    return labels;
}

// Minibatch SGD with momentum: v <- mu*v - lr*grad, theta <- theta + v.
// Shuffles with the seeded generator each epoch, evaluates validation
// accuracy after every epoch, and returns the checkpoint with the best
// validation accuracy (ties -> earliest epoch). Bit-deterministic given the
// seed: single-threaded with a fixed operation order.
inline SoftmaxModel train(const DescriptorSet& train_ds, const std::vector<int>& train_labels,
                          const DescriptorSet& val_ds, const std::vector<int>& val_labels,
                          const std::vector<std::string>& rooms, const TrainConfig& cfg) {
    cfg.validate();
    if (train_ds.rows.empty() || val_ds.rows.empty())
        throw std::invalid_argument("training and validation sets must be nonempty");
    if (train_ds.dim != val_ds.dim)
        throw std::invalid_argument("train/val descriptor dims differ");
    if (rooms.size() < 2) throw std::invalid_argument("training needs at least 2 rooms");
    if (train_ds.rows.size() != train_labels.size() || val_ds.rows.size() != val_labels.size())
        throw std::invalid_argument("dataset/labels shape mismatch");

    const std::size_t R = rooms.size();
    const std::size_t m = train_ds.dim;

    SoftmaxModel model;
    model.dim = m;
    model.rooms = rooms;
    model.weights.resize(R * m);
    model.bias.assign(R, 0.0);
    detail::SplitMix64 rng(cfg.seed);
    const double bound = std::sqrt(6.0 / static_cast<double>(m + R));
    for (double& w : model.weights) w = bound * (2.0 * rng.next_unit() - 1.0);

    std::vector<double> vel_w(R * m, 0.0), vel_b(R, 0.0);
    std::vector<std::size_t> order(train_ds.rows.size());
    std::iota(order.begin(), order.end(), 0);

    SoftmaxModel best = model;
    double best_acc = -1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::span<const float>> batch;
            std::vector<int> labels;
            batch.reserve(stop - start);
            labels.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                batch.emplace_back(train_ds.rows[order[i]].values);
                labels.push_back(train_labels[order[i]]);
            }
            BatchGradient g = batch_gradient(model, batch, labels);
            if (!std::isfinite(g.loss)) throw std::runtime_error("training loss diverged");
            for (std::size_t k = 0; k < vel_w.size(); ++k) {
                vel_w[k] = cfg.momentum * vel_w[k] - cfg.learning_rate * g.d_weights[k];
                model.weights[k] += vel_w[k];
            }
            for (std::size_t k = 0; k < vel_b.size(); ++k) {
                vel_b[k] = cfg.momentum * vel_b[k] - cfg.learning_rate * g.d_bias[k];
                model.bias[k] += vel_b[k];
            }
        }
        double val_acc = accuracy(model, val_ds, val_labels);
        if (val_acc > best_acc) {
            best_acc = val_acc;
            best = model;
        }
    }
    return best;
}

// Model file: magic HLCM, version, R, m, length-prefixed room names, then
// R*m weights and R biases as little-endian float32.
inline constexpr char kModelMagic[4] = {'H', 'L', 'C', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const SoftmaxModel& model, const fs::path& path) {
    detail::BinWriter w(path.string());
    w.bytes(kModelMagic, 4);
    w.u32(kModelVersion);
    w.u32(static_cast<std::uint32_t>(model.num_rooms()));
    w.u32(static_cast<std::uint32_t>(model.dim));
    for (const auto& room : model.rooms) w.str(room);
    for (double v : model.weights) w.f32(static_cast<float>(v));
    for (double v : model.bias) w.f32(static_cast<float>(v));
    if (!w.out) throw std::runtime_error("write failed: " + path.string());
}

inline SoftmaxModel load_model(const fs::path& path) {
    detail::BinReader r(path.string());
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != std::string(kModelMagic, 4))
        throw std::runtime_error("bad magic in model file " + path.string());
    std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model file version " + std::to_string(version));
    SoftmaxModel model;
    std::uint32_t R = r.u32();
    model.dim = r.u32();
    if (R == 0 || model.dim == 0)
        throw std::runtime_error("degenerate model file " + path.string());
    model.rooms.reserve(R);
    for (std::uint32_t i = 0; i < R; ++i) model.rooms.push_back(r.str());
    model.weights.resize(static_cast<std::size_t>(R) * model.dim);
    for (double& v : model.weights) v = r.f32();
    model.bias.resize(R);
    for (double& v : model.bias) v = r.f32();
    if (!r.at_eof()) throw std::runtime_error("trailing bytes in model file " + path.string());
    for (double v : model.weights)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite weight in " + path.string());
    for (double v : model.bias)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite bias in " + path.string());
    return model;
}

}  // namespace hloc
