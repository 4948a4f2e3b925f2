#include "convmf/topics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace convmf {

WordActivationStats accumulate_word_activations(const Checkpoint& ckpt,
                                                const TokenizedCorpus& corpus,
                                                const EmbeddingTable& embeddings) {
    verify_checkpoint_corpus(ckpt, corpus);
    if (ckpt.kind != ModelKind::ConvMf)
        throw ConfigError("topic extraction requires a convmf checkpoint");
    const FilterBank& filters = ckpt.filters;

    WordActivationStats stats;
    stats.n_factors = filters.n_filters;
    stats.window = filters.window;
    const std::size_t vocab_size = embeddings.vectors.rows();
    stats.activation_sum.assign(filters.n_filters, std::vector<double>(vocab_size, 0.0));
    stats.occurrence_count.assign(filters.n_filters, std::vector<std::uint32_t>(vocab_size, 0));

    const double share = 1.0 / static_cast<double>(filters.window);
    for (const auto& record : corpus.records) {
        if (record.split != Split::Train) continue;
        const auto& review = record.review;
        const ReviewMatrix matrix = make_review_matrix(review.tokens, review.true_length, embeddings);
        const ActivationMap map = conv1d_valid(matrix, filters);
        for (std::size_t f = 0; f < filters.n_filters; ++f) {
            const double* row = map.values.row(f);
            for (std::size_t t = 0; t < map.values.cols(); ++t) {
                for (std::size_t i = 0; i < filters.window; ++i) {
                    const std::size_t pos = t + i;
                    if (pos >= review.true_length) break;  // PAD tail
                    const std::uint32_t token = review.tokens[pos];
                    if (token == kPadIndex || token == kUnkIndex) continue;
                    stats.activation_sum[f][token] += row[t] * share;
                    stats.occurrence_count[f][token] += 1;
                }
            }
        }
    }
    return stats;
}

std::vector<Keyword> top_k_keywords(const WordActivationStats& stats, const Vocabulary& vocabulary,
                                    std::size_t factor, std::size_t k,
                                    std::uint32_t min_occurrences) {
    if (k < 1) throw ConfigError("top_k_keywords: k must be >= 1");
    if (factor >= stats.n_factors) throw ConfigError("top_k_keywords: factor out of range");

    std::vector<Keyword> eligible;
    const auto& sums = stats.activation_sum[factor];
    const auto& counts = stats.occurrence_count[factor];
    for (std::uint32_t token = kReservedTokens; token < counts.size(); ++token) {
        if (counts[token] == 0 || counts[token] < min_occurrences) continue;
        eligible.push_back({token, sums[token] / counts[token], counts[token]});
    }
    std::sort(eligible.begin(), eligible.end(), [&](const Keyword& a, const Keyword& b) {
        if (a.mean_activation != b.mean_activation) return a.mean_activation > b.mean_activation;
        return vocabulary.token_of(a.token) < vocabulary.token_of(b.token);
    });
    if (eligible.size() > k) eligible.resize(k);
    return eligible;
}

CoherenceResult topic_coherence(std::span<const Keyword> keywords, const EmbeddingTable& embeddings) {
    CoherenceResult result;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < keywords.size(); ++i) {
        for (std::size_t j = i + 1; j < keywords.size(); ++j) {
            const auto a = keywords[i].token;
            const auto b = keywords[j].token;
            if (!embeddings.pretrained[a] || !embeddings.pretrained[b]) {
                ++result.skipped_pairs;
                continue;
            }
            const auto sim = cosine_similarity(embeddings.row(a), embeddings.row(b));
            if (!sim) {
                ++result.skipped_pairs;
                continue;
            }
            sum += *sim;
            ++pairs;
        }
    }
    if (pairs > 0) result.coherence = sum / static_cast<double>(pairs);
    return result;
}

TopicReport build_topic_report(const WordActivationStats& stats, const Vocabulary& vocabulary,
                               const EmbeddingTable& embeddings, std::size_t k,
                               std::uint32_t min_occurrences) {
    TopicReport report;
    report.top_k = k;
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t f = 0; f < stats.n_factors; ++f) {
        FactorTopic topic;
        topic.factor = f;
        topic.keywords = top_k_keywords(stats, vocabulary, f, k, min_occurrences);
        // Coherence is undefined with fewer than 2 keywords carrying
        // pretrained vectors; such factors are excluded from the mean.
        std::size_t usable = 0;
        for (const auto& kw : topic.keywords)
            if (embeddings.pretrained[kw.token]) ++usable;
        if (usable >= 2) {
            const CoherenceResult c = topic_coherence(topic.keywords, embeddings);
            topic.coherence = c.coherence;
            topic.skipped_pairs = c.skipped_pairs;
        } else {
            topic.skipped_pairs = topic.keywords.size() >= 2
                                      ? topic.keywords.size() * (topic.keywords.size() - 1) / 2
                                      : 0;
        }
        report.skipped_pairs += topic.skipped_pairs;
        if (topic.coherence) {
            sum += *topic.coherence;
            ++defined;
        } else {
            ++report.excluded_factors;
        }
        report.factors.push_back(std::move(topic));
    }
    if (defined > 0) report.overall_coherence = sum / static_cast<double>(defined);

    std::sort(report.factors.begin(), report.factors.end(),
              [](const FactorTopic& a, const FactorTopic& b) {
                  if (a.coherence.has_value() != b.coherence.has_value())
                      return a.coherence.has_value();
                  if (a.coherence && b.coherence && *a.coherence != *b.coherence)
                      return *a.coherence > *b.coherence;
                  return a.factor < b.factor;
              });
    return report;
}

std::string topic_report_to_json(const TopicReport& report, const Vocabulary& vocabulary,
                                 const std::string& config_echo) {
    nlohmann::json j;
    j["factors"] = nlohmann::json::array();
    for (const auto& topic : report.factors) {
        nlohmann::json jt;
        jt["index"] = topic.factor;
        if (topic.coherence)
            jt["coherence"] = *topic.coherence;
        else
            jt["coherence"] = nullptr;
        jt["excluded"] = !topic.coherence.has_value();
        jt["skipped_pairs"] = topic.skipped_pairs;
        jt["keywords"] = nlohmann::json::array();
        for (const auto& kw : topic.keywords) {
            nlohmann::json jk;
            jk["token"] = vocabulary.token_of(kw.token);
            jk["mean_activation"] = kw.mean_activation;
            jk["count"] = kw.count;
            jt["keywords"].push_back(std::move(jk));
        }
        j["factors"].push_back(std::move(jt));
    }
    if (report.overall_coherence)
        j["overall_coherence"] = *report.overall_coherence;
    else
        j["overall_coherence"] = nullptr;
    j["skipped_pairs"] = report.skipped_pairs;
    j["excluded_factors"] = report.excluded_factors;
    j["top_k"] = report.top_k;
    j["config"] = config_echo.empty() ? nlohmann::json(nullptr) : nlohmann::json::parse(config_echo);
    return j.dump(2) + "\n";
}

}  // namespace convmf
