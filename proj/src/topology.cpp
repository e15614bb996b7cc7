#include "qeno/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qeno {

void EntanglementGraph::validate() const {
    if (q < 1) throw ContractError("entanglement graph: qubit count must be >= 1");
    std::set<std::pair<int, int>> seen;
    for (auto [c, t] : edges) {
        if (c == t) throw ContractError("entanglement graph: self-edge on qubit " + std::to_string(c));
        if (c < 0 || c >= q || t < 0 || t >= q) {
            throw ContractError("entanglement graph: edge (" + std::to_string(c) + "," +
                                std::to_string(t) + ") out of range for q=" + std::to_string(q));
        }
        if (!seen.insert({c, t}).second) {
            throw ContractError("entanglement graph: duplicate edge (" + std::to_string(c) + "," +
                                std::to_string(t) + ")");
        }
    }
}

TopologyKind topology_kind_from_string(const std::string& s) {
    if (s == "chain") return TopologyKind::Chain;
    if (s == "ring") return TopologyKind::Ring;
    if (s == "correlation") return TopologyKind::Correlation;
    throw ConfigError("unknown topology '" + s + "' (expected chain|ring|correlation)");
}

std::string to_string(TopologyKind k) {
    switch (k) {
        case TopologyKind::Chain: return "chain";
        case TopologyKind::Ring: return "ring";
        case TopologyKind::Correlation: return "correlation";
    }
    return "?";
}

EntanglementGraph chain_graph(int q) {
    EntanglementGraph g;
    g.q = q;
    for (int i = 0; i + 1 < q; ++i) g.edges.emplace_back(i, i + 1);
    return g;
}

EntanglementGraph ring_graph(int q) {
    EntanglementGraph g = chain_graph(q);
    if (q >= 2) g.edges.emplace_back(q - 1, 0);
    return g;
}

namespace {

// Per-group mean signal across channels, sampled over every remaining
// (batch, time, space) position.
std::vector<std::vector<double>> group_signals(const TensorPtr& latent, int q) {
    const int r = latent->rank();
    if (r != 4 && r != 5) {
        throw ContractError("correlation topology: latent must be [B,C,H,W] or [B,T,C,H,W], got " +
                            latent->shape_str());
    }
    const int chan_axis = r == 4 ? 1 : 2;
    const int C = latent->shape[static_cast<std::size_t>(chan_axis)];
    if (C < q) {
        throw ContractError("correlation topology: latent has " + std::to_string(C) +
                            " channels but q=" + std::to_string(q) + " groups are needed");
    }
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < chan_axis; ++i) outer *= static_cast<std::size_t>(latent->shape[static_cast<std::size_t>(i)]);
    for (int i = chan_axis + 1; i < r; ++i) inner *= static_cast<std::size_t>(latent->shape[static_cast<std::size_t>(i)]);

    const std::size_t n_samples = outer * inner;
    std::vector<std::vector<double>> sig(static_cast<std::size_t>(q),
                                         std::vector<double>(n_samples, 0.0));
    std::vector<int> group_size(static_cast<std::size_t>(q), 0);
    for (int c = 0; c < C; ++c) ++group_size[static_cast<std::size_t>(c % q)];

    const double* x = latent->data.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (int c = 0; c < C; ++c) {
            const int g = c % q;
            const double* src = x + (o * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)) * inner;
            double* dst = sig[static_cast<std::size_t>(g)].data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    }
    for (int g = 0; g < q; ++g) {
        const double inv = 1.0 / group_size[static_cast<std::size_t>(g)];
        for (double& v : sig[static_cast<std::size_t>(g)]) v *= inv;
    }
    return sig;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

EntanglementGraph build_graph(TopologyKind kind, int q, const TensorPtr& latent, double threshold) {
    if (q < 2) throw ContractError("build_graph: q must be >= 2, got " + std::to_string(q));
    switch (kind) {
        case TopologyKind::Chain: return chain_graph(q);
        case TopologyKind::Ring: return ring_graph(q);
        case TopologyKind::Correlation: break;
    }
    if (!latent) throw ContractError("correlation topology requires a latent tensor");

    const auto sig = group_signals(latent, q);
    EntanglementGraph g;
    g.q = q;
    // Ascending (i,j) pairs are already in (min,max)-lexicographic order.
    for (int i = 0; i < q; ++i) {
        for (int j = i + 1; j < q; ++j) {
            if (std::abs(pearson(sig[static_cast<std::size_t>(i)], sig[static_cast<std::size_t>(j)])) >=
                threshold) {
                g.edges.emplace_back(i, j);
            }
        }
    }
    if (static_cast<int>(g.edges.size()) < q - 1) return chain_graph(q);

    std::vector<int> degree(static_cast<std::size_t>(q), 0);
    for (auto [c, t] : g.edges) {
        ++degree[static_cast<std::size_t>(c)];
        ++degree[static_cast<std::size_t>(t)];
    }
    for (int i = 0; i < q; ++i) {
        if (degree[static_cast<std::size_t>(i)] == 0) {
            const int c = i == 0 ? 0 : i - 1;
            const int t = i == 0 ? 1 : i;
            g.edges.emplace_back(c, t);
            ++degree[static_cast<std::size_t>(c)];
            ++degree[static_cast<std::size_t>(t)];
        }
    }
    g.validate();
    return g;
}

}  // namespace qeno
