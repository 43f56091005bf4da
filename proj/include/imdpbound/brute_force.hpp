#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "imdpbound/errors.hpp"
#include "imdpbound/imdp.hpp"

namespace imdpbound {

struct BruteForceLimits {
    std::size_t max_states = 6;
    std::size_t max_actions = 3;
    std::size_t max_candidates = 4;
    std::size_t max_horizon = 12;
};

/// Exhaustive horizon-bounded lower/upper expected cost for small IMDPs with
/// candidate credal sets. Enumerates every deterministic stationary strategy and
/// every stationary adversary (one candidate distribution and one cost endpoint per
/// state-action pair) and evaluates each pair by propagating the state distribution
/// forward for `horizon` steps. Returns (min over strategies of min over adversaries,
/// min over strategies of max over adversaries), per initial state.
///
/// Shares no code with the value-iteration path.
inline std::pair<ValueTable, ValueTable> brute_force_values(const Imdp& m, std::size_t horizon,
                                                            const BruteForceLimits& limits = {}) {
    m.validate();
    const std::size_t n = m.num_states();
    const std::size_t n_act = m.num_actions();
    if (horizon == 0) throw InvalidArgument("horizon must be at least 1");
    if (n > limits.max_states || n_act > limits.max_actions || horizon > limits.max_horizon)
        throw OversizeError("brute force is limited to " + std::to_string(limits.max_states) + " states, " +
                            std::to_string(limits.max_actions) + " actions and horizon " +
                            std::to_string(limits.max_horizon));
    for (std::size_t s = 0; s < n; ++s) {
        if (m.is_terminal(s)) continue;
        for (std::size_t a = 0; a < n_act; ++a) {
            const auto& cs = m.entry(s, a).credal;
            if (cs.kind() != CredalSet::Kind::candidates)
                throw InvalidArgument("brute force needs candidate credal sets");
            if (cs.distributions().size() > limits.max_candidates)
                throw OversizeError("brute force is limited to " + std::to_string(limits.max_candidates) +
                                    " candidates per pair");
        }
    }

    std::vector<std::size_t> active;
    for (std::size_t s = 0; s < n; ++s)
        if (!m.is_terminal(s)) active.push_back(s);

    // Dense transition matrix and cost vector of one (strategy, adversary) pair.
    std::vector<double> P(n * n), cost(n), mu(n), mu_next(n);
    auto evaluate = [&](std::vector<double>& out) {
        for (std::size_t s0 = 0; s0 < n; ++s0) {
            std::fill(mu.begin(), mu.end(), 0.0);
            mu[s0] = 1.0;
            double total = 0.0;
            for (std::size_t k = 0; k < horizon; ++k) {
                std::fill(mu_next.begin(), mu_next.end(), 0.0);
                for (std::size_t s = 0; s < n; ++s) {
                    if (mu[s] == 0.0) continue;
                    total += mu[s] * cost[s];
                    for (std::size_t t = 0; t < n; ++t) mu_next[t] += mu[s] * P[s * n + t];
                }
                std::swap(mu, mu_next);
            }
            out[s0] = total;
        }
    };

    ValueTable best_min(n, kInfinity), best_max(n, kInfinity);
    std::vector<std::size_t> sigma(active.size(), 0);
    std::vector<double> e(n), worst(n), luckiest(n);
    while (true) {
        // Adversary choice per active state: candidate index * 2 + cost endpoint.
        std::vector<std::size_t> radix(active.size());
        for (std::size_t i = 0; i < active.size(); ++i)
            radix[i] = m.entry(active[i], sigma[i]).credal.distributions().size() * 2;
        std::vector<std::size_t> alpha(active.size(), 0);
        std::fill(worst.begin(), worst.end(), 0.0);
        std::fill(luckiest.begin(), luckiest.end(), kInfinity);
        while (true) {
            std::fill(P.begin(), P.end(), 0.0);
            std::fill(cost.begin(), cost.end(), 0.0);
            for (std::size_t s = 0; s < n; ++s)
                if (m.is_terminal(s)) P[s * n + s] = 1.0;
            for (std::size_t i = 0; i < active.size(); ++i) {
                const auto& ent = m.entry(active[i], sigma[i]);
                const auto& dist = ent.credal.distributions()[alpha[i] / 2];
                const auto targets = ent.credal.targets();
                for (std::size_t j = 0; j < targets.size(); ++j) P[active[i] * n + targets[j]] += dist[j];
                cost[active[i]] = alpha[i] % 2 == 0 ? ent.cost.c_min : ent.cost.c_max;
            }
            evaluate(e);
            for (std::size_t s = 0; s < n; ++s) {
                worst[s] = std::max(worst[s], e[s]);
                luckiest[s] = std::min(luckiest[s], e[s]);
            }
            std::size_t i = 0;
            for (; i < active.size(); ++i) {
                if (++alpha[i] < radix[i]) break;
                alpha[i] = 0;
            }
            if (i == active.size()) break;
        }
        for (std::size_t s = 0; s < n; ++s) {
            best_min[s] = std::min(best_min[s], luckiest[s]);
            best_max[s] = std::min(best_max[s], worst[s]);
        }
        std::size_t i = 0;
        for (; i < active.size(); ++i) {
            if (++sigma[i] < n_act) break;
            sigma[i] = 0;
        }
        if (i == active.size()) break;
    }
    return {best_min, best_max};
}

} // namespace imdpbound
