#include "convmf/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace convmf {

namespace {
constexpr double kLog2E = 1.4426950408889634;  // 1 / ln 2
}

ReviewMatrix make_review_matrix(std::span<const std::uint32_t> tokens, std::uint32_t true_length,
                                const EmbeddingTable& embeddings) {
    ReviewMatrix review;
    review.true_length = true_length;
    review.values = Matrix(tokens.size(), embeddings.dimension);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto row = embeddings.row(tokens[t]);
        std::copy(row.begin(), row.end(), review.values.row(t));
    }
    return review;
}

ActivationMap conv1d_valid(const ReviewMatrix& review, const FilterBank& filters) {
    const std::size_t L = review.values.rows();
    const std::size_t D = review.values.cols();
    const std::size_t w = filters.window;
    if (filters.dim != D) throw ConfigError("conv1d_valid: filter dim does not match review dim");
    if (w > L) throw ConfigError("conv1d_valid: window exceeds review length");
    const std::size_t n_windows = L - w + 1;

    ActivationMap map;
    map.values = Matrix(filters.n_filters, n_windows);
    const std::size_t full = review.true_length >= w ? review.true_length - w + 1 : 1;
    map.valid_windows = std::min(full, n_windows);

    for (std::size_t f = 0; f < filters.n_filters; ++f) {
        double* out = map.values.row(f);
        const double* weights = &filters.weights[f * w * D];
        for (std::size_t t = 0; t < n_windows; ++t) {
            double acc = filters.bias[f];
            const double* window_start = review.values.row(t);
            for (std::size_t k = 0; k < w * D; ++k) acc += weights[k] * window_start[k];
            out[t] = acc;
        }
    }
    return map;
}

PoolResult max_pool(std::span<const double> row) {
    if (row.empty()) throw ConfigError("max_pool: empty row");
    PoolResult best{row[0], 0};
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i] > best.value) {
            best.value = row[i];
            best.index = i;
        }
    }
    return best;
}

std::vector<double> softmax(std::span<const double> a) {
    std::vector<double> p(a.size());
    const double shift = *std::max_element(a.begin(), a.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        p[i] = std::exp(a[i] - shift);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double entropy_bits(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log2(v);
    return h;
}

double entropy_of_activations(std::span<const double> a, std::span<double> grad) {
    const std::vector<double> p = softmax(a);
    const double h = entropy_bits(p);
    if (!grad.empty()) {
        if (grad.size() != a.size()) throw ConfigError("entropy_of_activations: grad size mismatch");
        for (std::size_t k = 0; k < p.size(); ++k)
            grad[k] = p[k] > 0.0 ? -p[k] * (std::log2(p[k]) + h) : 0.0;
    }
    return h;
}

double entropy_regularizer(std::span<const ActivationMap> maps, bool mask_pad) {
    if (maps.empty()) throw ConfigError("entropy_regularizer: empty batch");
    double sum = 0.0;
    std::size_t rows = 0;
    for (const auto& map : maps) {
        const std::size_t len = mask_pad ? map.valid_windows : map.values.cols();
        for (std::size_t f = 0; f < map.values.rows(); ++f) {
            sum += entropy_of_activations({map.values.row(f), len});
            ++rows;
        }
    }
    return sum / static_cast<double>(rows);
}

LossBreakdown composite_loss(std::span<const double> predictions, std::span<const double> targets,
                             double reg, double lambda) {
    if (predictions.size() != targets.size() || predictions.empty())
        throw ConfigError("composite_loss: predictions/targets must be same nonzero length");
    if (lambda < 0.0) throw ConfigError("composite_loss: lambda must be >= 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - targets[i];
        mse += e * e;
    }
    mse /= static_cast<double>(predictions.size());

    LossBreakdown out;
    out.rmse_term = std::sqrt(mse);
    out.entropy_term_bits = reg;
    out.lambda = lambda;
    out.total = out.rmse_term + lambda * reg;
    return out;
}

void rmse_gradient(std::span<const double> predictions, std::span<const double> targets,
                   std::span<double> grad_out) {
    const std::size_t n = predictions.size();
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = predictions[i] - targets[i];
        mse += e * e;
    }
    mse /= static_cast<double>(n);
    const double denom = static_cast<double>(n) * std::max(std::sqrt(mse), kRmseGuard);
    for (std::size_t i = 0; i < n; ++i) grad_out[i] = (predictions[i] - targets[i]) / denom;
}

void conv1d_backward(const ReviewMatrix& review, const FilterBank& filters,
                     const Matrix& d_activations, FilterBank& d_filters, Matrix* d_review) {
    const std::size_t D = filters.dim;
    const std::size_t w = filters.window;
    const std::size_t n_windows = d_activations.cols();
    for (std::size_t f = 0; f < filters.n_filters; ++f) {
        const double* da = d_activations.row(f);
        double* dw = &d_filters.weights[f * w * D];
        const double* fw = &filters.weights[f * w * D];
        for (std::size_t t = 0; t < n_windows; ++t) {
            const double g = da[t];
            if (g == 0.0) continue;
            d_filters.bias[f] += g;
            const double* window_start = review.values.row(t);
            for (std::size_t k = 0; k < w * D; ++k) dw[k] += g * window_start[k];
            if (d_review) {
                double* dr = d_review->row(t);
                for (std::size_t k = 0; k < w * D; ++k) dr[k] += g * fw[k];
            }
        }
    }
}

GradientCheckReport gradient_check(const std::function<double()>& loss,
                                   std::span<const ParamBlockView> blocks, double h) {
    GradientCheckReport report;
    for (const auto& block : blocks) {
        BlockCheckResult result;
        result.name = block.name;
        for (std::size_t i = 0; i < block.values.size(); ++i) {
            const double original = block.values[i];
            block.values[i] = original + h;
            const double up = loss();
            block.values[i] = original - h;
            const double down = loss();
            block.values[i] = original;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = block.analytic[i];
            const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            const double rel = std::abs(analytic - numeric) / scale;
            if (rel >= result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_index = i;
                result.analytic_at_worst = analytic;
                result.numeric_at_worst = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, result.max_rel_error);
        report.blocks.push_back(std::move(result));
    }
    return report;
}

}  // namespace convmf
