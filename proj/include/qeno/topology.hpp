#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qeno/tensor.hpp"

namespace qeno {

/// Ordered entangling-gate placement: directed (control, target) qubit pairs.
/// Application order is the listed order; construction sorts otherwise
/// unordered edge sets by (min, max) then control.
struct EntanglementGraph {
    int q = 0;
    std::vector<std::pair<int, int>> edges;

    void validate() const;
    bool operator==(const EntanglementGraph&) const = default;
};

enum class TopologyKind { Chain, Ring, Correlation };

TopologyKind topology_kind_from_string(const std::string& s);
std::string to_string(TopologyKind k);

EntanglementGraph chain_graph(int q);
EntanglementGraph ring_graph(int q);

// kind == Correlation requires a latent tensor of rank 4 [B,C,H,W] or rank 5
// [B,T,C,H,W] whose channel count is >= q. Channels are grouped round-robin
// into q groups; qubit pairs whose group-mean signals have absolute Pearson
// correlation >= threshold get an edge. Falls back to a chain when fewer than
// q-1 edges qualify; any qubit left isolated gets its chain edge appended.
EntanglementGraph build_graph(TopologyKind kind, int q, const TensorPtr& latent = nullptr,
                              double threshold = 0.5);

}  // namespace qeno
