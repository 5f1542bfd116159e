#include "geomancer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace geomancer {

namespace {

constexpr int kMaxWlNodes = 12;

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
        h ^= (v >> (b * 8)) & 0xffULL;
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr std::uint64_t kFnvInit = 1469598103934665603ULL;

std::vector<std::uint64_t> wl_colors(const Graph& g) {
    std::vector<std::uint64_t> color(g.n);
    for (int i = 0; i < g.n; ++i) {
        color[i] = fnv1a(kFnvInit, static_cast<std::uint64_t>(g.node_type[i]) + 1);
    }
    std::vector<std::uint64_t> next(g.n);
    for (int round = 0; round < g.n; ++round) {
        for (int i = 0; i < g.n; ++i) {
            std::vector<std::uint64_t> nb;
            for (int j = 0; j < g.n; ++j) {
                if (i != j && g.etype(i, j) > 0) {
                    nb.push_back(fnv1a(fnv1a(kFnvInit, static_cast<std::uint64_t>(g.etype(i, j))), color[j]));
                }
            }
            std::sort(nb.begin(), nb.end());
            std::uint64_t h = fnv1a(kFnvInit, color[i]);
            for (auto v : nb) h = fnv1a(h, v);
            next[i] = h;
        }
        color = next;
    }
    return color;
}

}  // namespace

std::uint64_t canonical_key(const Graph& g) {
    if (g.n > kMaxWlNodes) throw std::invalid_argument("canonical_key: unsupported size (n > 12)");
    auto color = wl_colors(g);
    std::sort(color.begin(), color.end());
    std::uint64_t h = fnv1a(kFnvInit, static_cast<std::uint64_t>(g.n));
    for (auto c : color) h = fnv1a(h, c);
    return h;
}

namespace {

bool backtrack(const Graph& a, const Graph& b, const std::vector<std::uint64_t>& ca,
               const std::vector<std::uint64_t>& cb, std::vector<int>& map_ab,
               std::vector<bool>& used, int depth) {
    if (depth == a.n) return true;
    for (int cand = 0; cand < b.n; ++cand) {
        if (used[cand] || ca[depth] != cb[cand]) continue;
        if (a.node_type[depth] != b.node_type[cand]) continue;
        bool ok = true;
        for (int prev = 0; prev < depth && ok; ++prev) {
            ok = a.etype(depth, prev) == b.etype(cand, map_ab[prev]);
        }
        if (!ok) continue;
        map_ab[depth] = cand;
        used[cand] = true;
        if (backtrack(a, b, ca, cb, map_ab, used, depth + 1)) return true;
        used[cand] = false;
    }
    return false;
}

}  // namespace

bool isomorphic(const Graph& a, const Graph& b) {
    if (a.n != b.n) return false;
    auto ca = wl_colors(a);
    auto cb = wl_colors(b);
    auto sa = ca, sb = cb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
    std::vector<int> map_ab(a.n, -1);
    std::vector<bool> used(b.n, false);
    return backtrack(a, b, ca, cb, map_ab, used, 0);
}

double validity(const std::vector<Graph>& graphs, const GrammarSpec& spec) {
    if (graphs.empty()) return 0.0;
    int ok = 0;
    for (const auto& g : graphs) ok += grammar_valid(g, spec) ? 1 : 0;
    return static_cast<double>(ok) / graphs.size();
}

std::vector<Graph> valid_subset(const std::vector<Graph>& graphs, const GrammarSpec& spec) {
    std::vector<Graph> out;
    for (const auto& g : graphs) {
        if (grammar_valid(g, spec)) out.push_back(g);
    }
    return out;
}

namespace {

// Buckets graphs by WL key; exact isomorphism settles collisions inside a bucket.
struct IsoIndex {
    std::unordered_map<std::uint64_t, std::vector<const Graph*>> buckets;

    void add(const Graph& g) { buckets[canonical_key(g)].push_back(&g); }

    bool contains(const Graph& g) const {
        auto it = buckets.find(canonical_key(g));
        if (it == buckets.end()) return false;
        for (const Graph* cand : it->second) {
            if (isomorphic(g, *cand)) return true;
        }
        return false;
    }

    // true if g starts a new isomorphism class
    bool add_if_new(const Graph& g) {
        auto& bucket = buckets[canonical_key(g)];
        for (const Graph* cand : bucket) {
            if (isomorphic(g, *cand)) return false;
        }
        bucket.push_back(&g);
        return true;
    }
};

}  // namespace

double uniqueness(const std::vector<Graph>& valid_graphs) {
    if (valid_graphs.empty()) return 0.0;
    IsoIndex index;
    int classes = 0;
    for (const auto& g : valid_graphs) classes += index.add_if_new(g) ? 1 : 0;
    return static_cast<double>(classes) / valid_graphs.size();
}

double novelty(const std::vector<Graph>& valid_graphs, const std::vector<Graph>& train_graphs) {
    if (valid_graphs.empty()) return 0.0;
    IsoIndex train;
    for (const auto& g : train_graphs) train.add(g);
    int novel = 0;
    for (const auto& g : valid_graphs) novel += train.contains(g) ? 0 : 1;
    return static_cast<double>(novel) / valid_graphs.size();
}

namespace {

std::vector<double> degree_histogram(const Graph& g) {
    std::vector<double> h(5, 0.0);
    for (int i = 0; i < g.n; ++i) h[std::min(g.degree(i), 4)] += 1.0;
    for (auto& v : h) v /= g.n;
    return h;
}

std::vector<double> clustering_histogram(const Graph& g) {
    std::vector<double> h(10, 0.0);
    for (int i = 0; i < g.n; ++i) {
        const int d = g.degree(i);
        double coeff = 0.0;
        if (d >= 2) {
            int links = 0;
            for (int j = 0; j < g.n; ++j) {
                if (j == i || g.etype(i, j) == 0) continue;
                for (int k = j + 1; k < g.n; ++k) {
                    if (k != i && g.etype(i, k) > 0 && g.etype(j, k) > 0) ++links;
                }
            }
            coeff = 2.0 * links / (static_cast<double>(d) * (d - 1));
        }
        const int bin = std::min(static_cast<int>(coeff * 10.0), 9);
        h[bin] += 1.0;
    }
    for (auto& v : h) v /= g.n;
    return h;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

double mmd_squared(const std::vector<std::vector<double>>& fa,
                   const std::vector<std::vector<double>>& fb) {
    std::vector<double> dists;
    const std::size_t na = fa.size(), nb = fb.size();
    std::vector<const std::vector<double>*> all;
    for (const auto& f : fa) all.push_back(&f);
    for (const auto& f : fb) all.push_back(&f);
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            dists.push_back(std::sqrt(sq_dist(*all[i], *all[j])));
        }
    }
    double bw = 1.0;
    if (!dists.empty()) {
        std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
        bw = dists[dists.size() / 2];
        if (bw <= 0.0) bw = 1.0;
    }
    const double gamma = 1.0 / (2.0 * bw * bw);
    auto kern = [&](const std::vector<double>& x, const std::vector<double>& y) {
        return std::exp(-gamma * sq_dist(x, y));
    };
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (const auto& x : fa) {
        for (const auto& y : fa) kaa += kern(x, y);
    }
    for (const auto& x : fb) {
        for (const auto& y : fb) kbb += kern(x, y);
    }
    for (const auto& x : fa) {
        for (const auto& y : fb) kab += kern(x, y);
    }
    const double v = kaa / (static_cast<double>(na) * na) + kbb / (static_cast<double>(nb) * nb) -
                     2.0 * kab / (static_cast<double>(na) * nb);
    return std::max(v, 0.0);
}

}  // namespace

std::pair<double, double> mmd_stats(const std::vector<Graph>& a, const std::vector<Graph>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mmd_stats: empty set");
    std::vector<std::vector<double>> da, db, ca, cb;
    for (const auto& g : a) {
        da.push_back(degree_histogram(g));
        ca.push_back(clustering_histogram(g));
    }
    for (const auto& g : b) {
        db.push_back(degree_histogram(g));
        cb.push_back(clustering_histogram(g));
    }
    return {mmd_squared(da, db), mmd_squared(ca, cb)};
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (preds.empty()) return 0.0;
    int hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / preds.size();
}

double mae(const std::vector<double>& preds, const std::vector<double>& targets) {
    if (preds.size() != targets.size()) throw std::invalid_argument("mae: length mismatch");
    if (preds.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += std::abs(preds[i] - targets[i]);
    return acc / preds.size();
}

GenReport evaluate_generation(const std::vector<Graph>& generated, const std::vector<Graph>& train,
                              const GrammarSpec& spec) {
    GenReport report;
    report.validity = validity(generated, spec);
    auto valid = valid_subset(generated, spec);
    report.uniqueness = uniqueness(valid);
    report.novelty = novelty(valid, train);
    if (!generated.empty() && !train.empty()) {
        auto [md, mc] = mmd_stats(train, generated);
        report.mmd_degree = md;
        report.mmd_clustering = mc;
    }
    return report;
}

}  // namespace geomancer
