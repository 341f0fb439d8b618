// Serial reference vs OpenMP version of each hot kernel. Arg(0) is the serial
// path; Arg(n) runs the parallel path with n threads.

#include <random>

#include <benchmark/benchmark.h>

#include "pli/aggregator.hpp"
#include "pli/bm25.hpp"
#include "pli/interaction.hpp"
#include "pli/pair_encoder.hpp"
#include "pli/synthetic.hpp"

using namespace pli;

namespace {

struct Corpus {
    Vocabulary vocab;
    DocumentStore docs, queries;
    CandidatePool pools;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        const auto bench = generate_synthetic_benchmark(SyntheticConfig{});
        std::vector<std::string> texts;
        for (const auto& d : bench.documents) texts.push_back(d.text);
        for (const auto& q : bench.queries) texts.push_back(q.text);
        auto vocab = Vocabulary::build(texts);
        DocumentStore docs(bench.documents, vocab, 64), queries(bench.queries, vocab, 64);
        return Corpus{std::move(vocab), std::move(docs), std::move(queries), bench.pools};
    }();
    return c;
}

void threads_from(const benchmark::State& state) { set_num_threads(static_cast<int>(state.range(0))); }

void BM_RetrieveBatch(benchmark::State& state) {
    const auto& c = corpus();
    const Bm25Params p;
    const auto index = InvertedIndex::build(c.docs.documents(), p);
    threads_from(state);
    for (auto _ : state) {
        auto run = state.range(0) == 0 ? retrieve_batch_serial(c.queries.documents(), 50, index, p, &c.pools)
                                       : retrieve_batch(c.queries.documents(), 50, index, p, &c.pools);
        benchmark::DoNotOptimize(run);
    }
}

std::vector<DocPair> some_pairs(const Corpus& c, std::size_t n) {
    std::vector<DocPair> pairs;
    const auto& q = c.queries.documents();
    const auto& d = c.docs.documents();
    for (std::size_t i = 0; i < n; ++i) pairs.push_back({&q[i % q.size()], &d[(7 * i) % d.size()]});
    return pairs;
}

void BM_InteractionMatrices(benchmark::State& state) {
    const auto& c = corpus();
    EncoderConfig ec;
    ec.vocab_size = c.vocab.size();
    ec.d_repr = 32;
    const MicroEncoder enc(ec);
    const EncoderSource src(enc);
    const auto pairs = some_pairs(c, 32);
    const InteractionConfig ic;
    threads_from(state);
    for (auto _ : state) {
        auto m = state.range(0) == 0 ? build_interaction_matrices_serial(src, pairs, ic)
                                     : build_interaction_matrices(src, pairs, ic);
        benchmark::DoNotOptimize(m);
    }
}

void BM_MaxpoolBatch(benchmark::State& state) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<InteractionMatrix> mats(400);
    for (auto& m : mats) {
        m.n = 54;
        m.m = 40;
        m.dim = 32;
        m.values.resize(m.n * m.m * m.dim);
        for (auto& v : m.values) v = u(gen);
    }
    threads_from(state);
    for (auto _ : state) {
        auto s = state.range(0) == 0 ? maxpool_batch_serial(mats) : maxpool_batch(mats);
        benchmark::DoNotOptimize(s);
    }
}

void BM_AggregatorGradients(benchmark::State& state) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<LabeledSequence> batch(64);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto& s = batch[i].seq;
        s.n = 10 + i % 40;
        s.dim = 32;
        s.values.resize(s.n * s.dim);
        for (auto& v : s.values) v = u(gen);
        batch[i].label = static_cast<int>(i % 2);
    }
    AggregatorConfig ac;
    ac.input_dim = 32;
    ac.hidden = 64;
    const AttentionRnn model(ac);
    std::vector<double> grad;
    threads_from(state);
    for (auto _ : state) {
        const double loss = state.range(0) == 0 ? model.loss_and_gradients_serial(batch, grad)
                                                : model.loss_and_gradients(batch, grad);
        benchmark::DoNotOptimize(loss);
    }
}

}  // namespace

BENCHMARK(BM_RetrieveBatch)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_InteractionMatrices)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MaxpoolBatch)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AggregatorGradients)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_MAIN();
