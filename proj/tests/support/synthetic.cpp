#include "synthetic.hpp"

#include <cmath>
#include <sstream>

namespace convmf::testsupport {

namespace {

std::vector<double> unit_noise_vector(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.uniform(-1.0, 1.0);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::string word_name(const char* prefix, std::size_t group, std::size_t index) {
    std::ostringstream s;
    s << prefix << group << "w" << index;
    return s.str();
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    SyntheticData data;
    Rng rng(derive_seed(spec.seed, 0x5F9D));

    // Vocabulary groups with their embedding vectors. Topic t's words sit
    // near the unit axis e_t; filler and sentiment words are scattered.
    struct Word {
        std::string name;
        std::vector<double> vec;
    };
    std::vector<std::vector<Word>> topic_words(spec.n_topics);
    for (std::size_t t = 0; t < spec.n_topics; ++t) {
        for (std::size_t i = 0; i < spec.words_per_topic; ++i) {
            std::vector<double> v(spec.embedding_dim, 0.0);
            v[t % spec.embedding_dim] = 1.0;
            const auto noise = unit_noise_vector(rng, spec.embedding_dim);
            double norm = 0.0;
            for (std::size_t d = 0; d < v.size(); ++d) {
                v[d] += spec.topic_spread * noise[d];
                norm += v[d] * v[d];
            }
            norm = std::sqrt(norm);
            for (auto& x : v) x /= norm;
            topic_words[t].push_back({word_name("topic", t, i), std::move(v)});
        }
    }
    std::vector<Word> filler;
    for (std::size_t i = 0; i < spec.n_filler_words; ++i)
        filler.push_back({word_name("fill", 0, i), unit_noise_vector(rng, spec.embedding_dim)});
    std::vector<Word> positive, negative;
    for (std::size_t i = 0; i < spec.n_sentiment_words / 2; ++i)
        positive.push_back({word_name("pos", 0, i), unit_noise_vector(rng, spec.embedding_dim)});
    for (std::size_t i = 0; i < spec.n_sentiment_words - spec.n_sentiment_words / 2; ++i)
        negative.push_back({word_name("neg", 0, i), unit_noise_vector(rng, spec.embedding_dim)});

    // Planted factors: one topic per item, per-topic user preferences.
    data.item_topic.resize(spec.n_items);
    for (std::size_t j = 0; j < spec.n_items; ++j) data.item_topic[j] = j % spec.n_topics;
    Matrix user_pref(spec.n_users, spec.n_topics);
    for (auto& v : user_pref.data()) v = rng.uniform(-1.1, 1.1);

    const double mu = 3.3;
    for (std::size_t j = 0; j < spec.n_items; ++j) {
        const std::size_t topic = data.item_topic[j];
        for (std::size_t r = 0; r < spec.reviews_per_item; ++r) {
            const std::size_t u = rng.next_below(spec.n_users);
            const double signal = user_pref(u, topic);
            double rating = mu + signal + rng.uniform(-spec.rating_noise, spec.rating_noise);
            rating = std::round(rating);
            rating = std::min(5.0, std::max(1.0, rating));

            std::ostringstream text;
            for (std::size_t wi = 0; wi < spec.words_per_review; ++wi) {
                if (wi > 0) text << ' ';
                const double roll = rng.next_double();
                if (roll < spec.filler_fraction) {
                    text << filler[rng.next_below(filler.size())].name;
                } else if (roll < spec.filler_fraction + spec.sentiment_fraction) {
                    const auto& pool = signal >= 0.0 ? positive : negative;
                    text << pool[rng.next_below(pool.size())].name;
                } else {
                    const auto& pool = topic_words[topic];
                    text << pool[rng.next_below(pool.size())].name;
                }
            }

            RawReview review;
            review.user_id = "user" + std::to_string(u);
            review.item_id = "item" + std::to_string(j);
            review.rating = rating;
            review.text = text.str();
            data.records.push_back(std::move(review));
        }
    }

    std::ostringstream glove;
    auto emit = [&](const Word& w) {
        glove << w.name;
        for (double v : w.vec) glove << ' ' << format_double(v);
        glove << '\n';
    };
    for (const auto& group : topic_words)
        for (const auto& w : group) emit(w);
    for (const auto& w : filler) emit(w);
    for (const auto& w : positive) emit(w);
    for (const auto& w : negative) emit(w);
    data.embedding_text = glove.str();
    return data;
}

}  // namespace convmf::testsupport
