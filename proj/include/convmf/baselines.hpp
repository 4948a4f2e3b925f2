#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "convmf/common.hpp"
#include "convmf/corpus.hpp"

namespace convmf {

// Predicts the training-set mean rating for every user-item pair.
struct OffsetModel {
    double mean_rating = 0.0;
};

OffsetModel offset_fit(std::span<const double> train_ratings);
inline double offset_predict(const OffsetModel& model) { return model.mean_rating; }

struct PmfParams {
    Matrix user_factors;  // n_users x F
    Matrix item_factors;  // n_items x F
    double global_mean = 0.0;
    double l2 = 0.0;
};

struct PmfConfig {
    std::size_t n_factors = 8;
    std::size_t epochs = 60;
    std::size_t batch_size = 256;   // ratings per batch
    double step_size = 0.005;
    double l2 = 1e-4;
    std::size_t patience = 5;       // early stop on validation RMSE
    std::uint64_t seed = 0;
};

// Mini-batch gradient descent on sum (r - mu - u.v)^2 + L2 penalties.
// Factors start at uniform noise in [-0.01, 0.01]. Deterministic per seed.
// When given, train_rmse_history receives the full-train RMSE after each
// completed epoch.
PmfParams pmf_fit(const TokenizedCorpus& corpus, const PmfConfig& config,
                  std::vector<double>* train_rmse_history = nullptr);

// mu + u.v, unclamped; unknown user or item falls back to mu.
double pmf_predict(const PmfParams& params, std::uint32_t user, std::uint32_t item);

}  // namespace convmf
