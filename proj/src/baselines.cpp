#include "convmf/baselines.hpp"

#include <cmath>

#include "convmf/model.hpp"

namespace convmf {

OffsetModel offset_fit(std::span<const double> train_ratings) {
    if (train_ratings.empty()) throw ConfigError("offset_fit: empty training set");
    double sum = 0.0;
    for (double r : train_ratings) sum += r;
    return OffsetModel{sum / static_cast<double>(train_ratings.size())};
}

namespace {

double pmf_rmse(const PmfParams& params, const TokenizedCorpus& corpus,
                const std::vector<std::size_t>& record_ids) {
    double sq = 0.0;
    for (std::size_t id : record_ids) {
        const auto& review = corpus.records[id].review;
        const double pred =
            clamp_rating(pmf_predict(params, review.user_index, review.item_index));
        const double e = pred - review.rating;
        sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(record_ids.size()));
}

}  // namespace

PmfParams pmf_fit(const TokenizedCorpus& corpus, const PmfConfig& config,
                  std::vector<double>* train_rmse_history) {
    if (config.n_factors < 1) throw ConfigError("pmf_fit: n_factors must be >= 1");
    const auto train_ids = corpus.record_ids(Split::Train);
    const auto val_ids = corpus.record_ids(Split::Validation);
    if (train_ids.empty()) throw ConfigError("pmf_fit: empty training set");

    PmfParams params;
    params.global_mean = corpus.train_mean_rating();
    params.l2 = config.l2;
    params.user_factors = Matrix(corpus.n_users(), config.n_factors);
    params.item_factors = Matrix(corpus.n_items(), config.n_factors);
    Rng init_rng(derive_seed(config.seed, 0x93F));
    for (auto& v : params.user_factors.data()) v = init_rng.uniform(-0.01, 0.01);
    for (auto& v : params.item_factors.data()) v = init_rng.uniform(-0.01, 0.01);

    PmfParams best = params;
    double best_val = val_ids.empty() ? 0.0 : pmf_rmse(params, corpus, val_ids);
    std::size_t epochs_since_best = 0;

    std::vector<std::size_t> order = train_ids;
    const std::size_t F = config.n_factors;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(config.seed, 0xE90C000ULL + epoch));
        epoch_rng.shuffle(order);

        double train_sq = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            // Accumulate batch gradients of the mean squared error, then step.
            // Sparse accumulation keyed by the rows the batch touches.
            std::vector<std::pair<std::uint32_t, std::vector<double>>> du, dv;
            auto find_or_add = [&](auto& store, std::uint32_t row) -> std::vector<double>& {
                for (auto& [r, g] : store)
                    if (r == row) return g;
                store.emplace_back(row, std::vector<double>(F, 0.0));
                return store.back().second;
            };
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const auto& review = corpus.records[order[k]].review;
                const double* u = params.user_factors.row(review.user_index);
                const double* v = params.item_factors.row(review.item_index);
                double dot = 0.0;
                for (std::size_t f = 0; f < F; ++f) dot += u[f] * v[f];
                const double err = params.global_mean + dot - review.rating;
                train_sq += err * err;
                auto& gu = find_or_add(du, review.user_index);
                auto& gv = find_or_add(dv, review.item_index);
                for (std::size_t f = 0; f < F; ++f) {
                    gu[f] += 2.0 * err * v[f] * inv_batch;
                    gv[f] += 2.0 * err * u[f] * inv_batch;
                }
            }
            for (auto& [row, g] : du) {
                double* u = params.user_factors.row(row);
                for (std::size_t f = 0; f < F; ++f)
                    u[f] -= config.step_size * (g[f] + 2.0 * config.l2 * u[f]);
            }
            for (auto& [row, g] : dv) {
                double* v = params.item_factors.row(row);
                for (std::size_t f = 0; f < F; ++f)
                    v[f] -= config.step_size * (g[f] + 2.0 * config.l2 * v[f]);
            }
        }
        if (!std::isfinite(train_sq))
            throw NumericError("pmf_fit diverged at epoch " + std::to_string(epoch) +
                               " (non-finite training loss)");
        if (train_rmse_history) {
            double sq = 0.0;
            for (std::size_t id : train_ids) {
                const auto& review = corpus.records[id].review;
                const double e =
                    pmf_predict(params, review.user_index, review.item_index) - review.rating;
                sq += e * e;
            }
            train_rmse_history->push_back(std::sqrt(sq / static_cast<double>(train_ids.size())));
        }

        if (!val_ids.empty()) {
            const double val = pmf_rmse(params, corpus, val_ids);
            if (val < best_val) {
                best_val = val;
                best = params;
                epochs_since_best = 0;
            } else if (++epochs_since_best > config.patience) {
                return best;
            }
        } else {
            best = params;
        }
    }
    return val_ids.empty() ? params : best;
}

double pmf_predict(const PmfParams& params, std::uint32_t user, std::uint32_t item) {
    double dot = 0.0;
    if (user < params.user_factors.rows() && item < params.item_factors.rows()) {
        const double* u = params.user_factors.row(user);
        const double* v = params.item_factors.row(item);
        for (std::size_t f = 0; f < params.user_factors.cols(); ++f) dot += u[f] * v[f];
    }
    return params.global_mean + dot;
}

}  // namespace convmf
