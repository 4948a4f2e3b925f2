#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "convmf/common.hpp"
#include "convmf/embeddings.hpp"

namespace convmf {

// One review as L rows of word vectors. PAD rows are zero.
struct ReviewMatrix {
    Matrix values;  // L x D
    std::uint32_t true_length = 0;
};

ReviewMatrix make_review_matrix(std::span<const std::uint32_t> tokens, std::uint32_t true_length,
                                const EmbeddingTable& embeddings);

// F convolution filters of shape window x D plus a scalar bias each.
struct FilterBank {
    std::size_t n_filters = 0;
    std::size_t window = 0;
    std::size_t dim = 0;
    std::vector<double> weights;  // [f][i][j], f-major
    std::vector<double> bias;     // per filter

    FilterBank() = default;
    FilterBank(std::size_t f, std::size_t w, std::size_t d)
        : n_filters(f), window(w), dim(d), weights(f * w * d, 0.0), bias(f, 0.0) {}

    double& weight(std::size_t f, std::size_t i, std::size_t j) {
        return weights[(f * window + i) * dim + j];
    }
    double weight(std::size_t f, std::size_t i, std::size_t j) const {
        return weights[(f * window + i) * dim + j];
    }
};

// Per-review window activations: one row per filter, one column per valid
// window position (L' = L - w + 1 columns).
struct ActivationMap {
    Matrix values;  // F x L'
    // Windows fully inside the unpadded prefix: max(1, true_length - w + 1),
    // capped at L'. Only consulted when PAD masking is on.
    std::size_t valid_windows = 0;
};

// Valid 1-D convolution with identity activation:
//   a[f][t] = bias_f + sum_{i<w, j<D} filter_f[i][j] * review[t+i][j]
ActivationMap conv1d_valid(const ReviewMatrix& review, const FilterBank& filters);

// Optional tanh squashing behind a flag; identity is the default because
// topic extraction ranks raw activation values.
enum class ConvActivation { Identity, Tanh };

struct PoolResult {
    double value = 0.0;
    std::size_t index = 0;  // smallest index attaining the maximum
};

PoolResult max_pool(std::span<const double> row);

std::vector<double> softmax(std::span<const double> a);

// -sum p_i log2 p_i with 0 log 0 = 0.
double entropy_bits(std::span<const double> p);

// Entropy of softmax(a) in bits; when grad is non-empty (same length as a)
// it receives dH/da, with the softmax and entropy differentiated jointly:
//   dH/da_k = -p_k * (log2 p_k + H)
double entropy_of_activations(std::span<const double> a, std::span<double> grad = {});

// Mean of entropy_bits(softmax(row)) over all N x F rows of the batch. With
// masking on, each row is restricted to its map's valid window prefix.
double entropy_regularizer(std::span<const ActivationMap> maps, bool mask_pad = false);

struct LossBreakdown {
    double total = 0.0;
    double rmse_term = 0.0;
    double entropy_term_bits = 0.0;
    double lambda = 0.0;
    std::size_t n_reviews = 0;
    std::size_t n_factors = 0;
};

LossBreakdown composite_loss(std::span<const double> predictions, std::span<const double> targets,
                             double reg, double lambda);

// d rmse / d prediction_k = (pred_k - target_k) / (n * rmse), with the sqrt
// chain factor floored at rmse = 1e-8.
inline constexpr double kRmseGuard = 1e-8;
void rmse_gradient(std::span<const double> predictions, std::span<const double> targets,
                   std::span<double> grad_out);

// Gradient wrt filter weights / biases and, when d_review is non-null, the
// review rows (for unfrozen embeddings). Accumulates into the outputs.
void conv1d_backward(const ReviewMatrix& review, const FilterBank& filters,
                     const Matrix& d_activations, FilterBank& d_filters, Matrix* d_review);

// --- finite-difference gradient checking -----------------------------------

struct ParamBlockView {
    std::string name;
    std::span<double> values;            // mutated in place during the check
    std::span<const double> analytic;    // analytic gradient, same length
};

struct BlockCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradientCheckReport {
    std::vector<BlockCheckResult> blocks;
    double max_rel_error = 0.0;
};

// Central differences with step h; relative error |g-g^| / max(1, |g|, |g^|).
// `loss` must re-run the forward pass against the live parameter storage.
GradientCheckReport gradient_check(const std::function<double()>& loss,
                                   std::span<const ParamBlockView> blocks, double h = 1e-5);

}  // namespace convmf
