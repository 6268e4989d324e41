#pragma once

#include <qkm/model.hpp>
#include <qkm/multidual.hpp>
#include <qkm/rational.hpp>
#include <qkm/series.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qkm {

/// Thrown when an enumeration would exceed the configured pairing budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Boundary cycles of a correlator, e.g. |p0 p1|p2 p3|. Labels are 0..n-1, each used once.
struct BoundarySpec {
    std::vector<std::vector<int>> cycles;

    /// Cycles of the given lengths filled with consecutive labels.
    static BoundarySpec from_lengths(const std::vector<int>& lengths) {
        BoundarySpec b;
        int next = 0;
        for (int len : lengths) {
            if (len < 1) throw std::invalid_argument("boundary cycles need at least one label");
            std::vector<int> cyc;
            for (int i = 0; i < len; ++i) cyc.push_back(next++);
            b.cycles.push_back(std::move(cyc));
        }
        return b;
    }

    int leg_count() const {
        int n = 0;
        for (const auto& c : cycles) n += static_cast<int>(c.size());
        return n;
    }

    /// successor[label] = label following it in its cycle.
    std::vector<int> successor() const {
        int n = leg_count();
        std::vector<int> succ(static_cast<std::size_t>(n), -1);
        for (const auto& c : cycles) {
            if (c.empty()) throw std::invalid_argument("empty boundary cycle");
            for (std::size_t i = 0; i < c.size(); ++i) {
                int a = c[i];
                if (a < 0 || a >= n || succ[static_cast<std::size_t>(a)] != -1)
                    throw std::invalid_argument("boundary labels must be 0..n-1, each used once");
                succ[static_cast<std::size_t>(a)] = c[(i + 1) % c.size()];
            }
        }
        return succ;
    }

    std::string to_string() const {
        std::string s = "|";
        for (const auto& c : cycles) {
            for (std::size_t i = 0; i < c.size(); ++i) s += (i ? " " : "") + std::to_string(c[i]);
            s += "|";
        }
        return s;
    }
};

struct Topology {
    int genus = 0;
    int boundaries = 0;
    int loops = 0;
    int ribbons = 0;
    std::vector<int> successor;
};

/// A Wick pairing of n one-valent legs and v four-valent vertices.
/// Half-edges: leg i is i; half-edge t of vertex w is n + 4w + t.
struct RibbonDiagram {
    int v = 0;
    int n = 0;
    std::vector<int> partner;
    Topology topology;
};

namespace detail {

/// Union-find with undo, no path compression.
class RollbackUnionFind {
public:
    explicit RollbackUnionFind(int size = 0) { reset(size); }
    void reset(int size) {
        parent_.resize(static_cast<std::size_t>(size));
        rank_.assign(static_cast<std::size_t>(size), 0);
        for (int i = 0; i < size; ++i) parent_[static_cast<std::size_t>(i)] = i;
        history_.clear();
        components_ = size;
    }
    int find(int x) const {
        while (parent_[static_cast<std::size_t>(x)] != x) x = parent_[static_cast<std::size_t>(x)];
        return x;
    }
    /// Returns the surviving root.
    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            history_.push_back({-1, -1, false});
            return a;
        }
        if (rank_[static_cast<std::size_t>(a)] < rank_[static_cast<std::size_t>(b)]) std::swap(a, b);
        bool bumped = rank_[static_cast<std::size_t>(a)] == rank_[static_cast<std::size_t>(b)];
        parent_[static_cast<std::size_t>(b)] = a;
        if (bumped) ++rank_[static_cast<std::size_t>(a)];
        history_.push_back({b, a, bumped});
        --components_;
        return a;
    }
    void undo() {
        auto [child, root, bumped] = history_.back();
        history_.pop_back();
        if (child < 0) return;
        parent_[static_cast<std::size_t>(child)] = child;
        if (bumped) --rank_[static_cast<std::size_t>(root)];
        ++components_;
    }
    int components() const { return components_; }

private:
    struct Step {
        int child, root;
        bool bumped;
    };
    std::vector<int> parent_;
    std::vector<int> rank_;
    std::vector<Step> history_;
    int components_ = 0;
};

/// Depth-first enumeration of connected Wick pairings that always pairs the lowest free
/// half-edge. Index lines and node connectivity are tracked incrementally.
class PairingWalker {
public:
    PairingWalker(int v, int n) : v_(v), n_(n), H_(4 * v + n), S_(4 * v + 2 * n), nodes_(v + n) {
        if (v < 0 || n < 0) throw std::invalid_argument("negative diagram size");
        if (H_ % 2 != 0) throw std::invalid_argument("odd number of half-edges");
        partner_.assign(static_cast<std::size_t>(H_), -1);
        label_of_root_.assign(static_cast<std::size_t>(S_), -1);
        open_.assign(static_cast<std::size_t>(nodes_), 0);
        for (int i = 0; i < n; ++i) open_[static_cast<std::size_t>(i)] = 1;
        for (int w = 0; w < v; ++w) open_[static_cast<std::size_t>(n + w)] = 4;
    }

    int first_slot(int h) const { return h < n_ ? 2 * h : 2 * n_ + (h - n_); }
    int second_slot(int h) const {
        if (h < n_) return 2 * h + 1;
        int w = (h - n_) / 4, t = (h - n_) % 4;
        return 2 * n_ + 4 * w + (t + 1) % 4;
    }
    int node_of(int h) const { return h < n_ ? h : n_ + (h - n_) / 4; }
    int legs() const { return n_; }
    int vertices() const { return v_; }
    int half_edges() const { return H_; }
    const std::vector<int>& partner() const { return partner_; }

    /// Runs the walk; first_choices restricts the partner of half-edge 0 (empty = all).
    template <class Leaf>
    void run(Leaf&& leaf, const std::vector<int>& first_choices = {}) {
        idx_.reset(S_);
        comp_.reset(nodes_);
        if (H_ == 0) {
            if (nodes_ == 0) leaf(*this);  // the empty diagram; only counted for n = v = 0
            return;
        }
        std::vector<int> choices = first_choices;
        if (choices.empty())
            for (int b = 1; b < H_; ++b) choices.push_back(b);
        for (int b : choices) {
            if (pair(0, b)) dfs(1, leaf);
            unpair(0, b);
        }
    }

    /// Loop count, boundary successor and genus of the current complete pairing.
    Topology topology() const {
        Topology t;
        t.ribbons = H_ / 2;
        t.loops = idx_.components() - n_;
        t.successor.assign(static_cast<std::size_t>(n_), -1);
        for (int i = 0; i < n_; ++i) label_of_root_[static_cast<std::size_t>(idx_.find(2 * i))] = i;
        for (int i = 0; i < n_; ++i) {
            int lab = label_of_root_[static_cast<std::size_t>(idx_.find(2 * i + 1))];
            if (lab < 0) throw std::logic_error("open index line without a start label");
            t.successor[static_cast<std::size_t>(i)] = lab;
        }
        for (int i = 0; i < n_; ++i) label_of_root_[static_cast<std::size_t>(idx_.find(2 * i))] = -1;
        t.boundaries = count_cycles(t.successor);
        int chi = v_ - t.ribbons + n_ + t.loops;
        int twice_g = 2 - t.boundaries - chi;
        if (twice_g < 0 || twice_g % 2 != 0) throw std::logic_error("Euler relation violated");
        t.genus = twice_g / 2;
        return t;
    }

    /// Root-based ids: label i for the open line starting at leg i, n + j for the j-th loop
    /// met while scanning ribbons. Writes one (x, y) pair per ribbon with x <= y.
    int ribbon_classes(std::vector<std::pair<int, int>>& out) const {
        out.clear();
        for (int i = 0; i < n_; ++i) label_of_root_[static_cast<std::size_t>(idx_.find(2 * i))] = i;
        int next_loop = n_;
        touched_.clear();
        auto id_of = [&](int slot) {
            int root = idx_.find(slot);
            int& lab = label_of_root_[static_cast<std::size_t>(root)];
            if (lab < 0) {
                lab = next_loop++;
                touched_.push_back(root);
            }
            return lab;
        };
        for (int a = 0; a < H_; ++a) {
            int b = partner_[static_cast<std::size_t>(a)];
            if (b < a) continue;
            int x = id_of(first_slot(a)), y = id_of(first_slot(b));
            out.emplace_back(std::min(x, y), std::max(x, y));
        }
        for (int i = 0; i < n_; ++i) label_of_root_[static_cast<std::size_t>(idx_.find(2 * i))] = -1;
        for (int root : touched_) label_of_root_[static_cast<std::size_t>(root)] = -1;
        return next_loop - n_;
    }

    static int count_cycles(const std::vector<int>& succ) {
        std::vector<char> seen(succ.size(), 0);
        int cycles = 0;
        for (std::size_t i = 0; i < succ.size(); ++i) {
            if (seen[i]) continue;
            ++cycles;
            for (std::size_t j = i; !seen[j]; j = static_cast<std::size_t>(succ[j])) seen[j] = 1;
        }
        return cycles;
    }

private:
    bool pair(int a, int b) {
        partner_[static_cast<std::size_t>(a)] = b;
        partner_[static_cast<std::size_t>(b)] = a;
        idx_.unite(first_slot(a), second_slot(b));
        idx_.unite(second_slot(a), first_slot(b));
        int ra = comp_.find(node_of(a)), rb = comp_.find(node_of(b));
        int root = comp_.unite(ra, rb);
        int merged = (ra == rb ? open_[static_cast<std::size_t>(ra)]
                               : open_[static_cast<std::size_t>(ra)] + open_[static_cast<std::size_t>(rb)]) - 2;
        open_saved_.push_back({root, open_[static_cast<std::size_t>(root)]});
        open_[static_cast<std::size_t>(root)] = merged;
        paired_ += 2;
        // a closed component while half-edges remain elsewhere can never become connected
        return !(merged == 0 && paired_ < H_);
    }
    void unpair(int a, int b) {
        paired_ -= 2;
        auto [root, old] = open_saved_.back();
        open_saved_.pop_back();
        open_[static_cast<std::size_t>(root)] = old;
        comp_.undo();
        idx_.undo();
        idx_.undo();
        partner_[static_cast<std::size_t>(a)] = -1;
        partner_[static_cast<std::size_t>(b)] = -1;
    }
    template <class Leaf>
    void dfs(int from, Leaf& leaf) {
        int a = from;
        while (a < H_ && partner_[static_cast<std::size_t>(a)] >= 0) ++a;
        if (a == H_) {
            leaf(*this);
            return;
        }
        for (int b = a + 1; b < H_; ++b) {
            if (partner_[static_cast<std::size_t>(b)] >= 0) continue;
            if (pair(a, b)) dfs(a + 1, leaf);
            unpair(a, b);
        }
    }

    int v_, n_, H_, S_, nodes_;
    int paired_ = 0;
    std::vector<int> partner_;
    RollbackUnionFind idx_;
    RollbackUnionFind comp_;
    std::vector<int> open_;
    std::vector<std::pair<int, int>> open_saved_;
    mutable std::vector<int> label_of_root_;
    mutable std::vector<int> touched_;
};

inline std::uint64_t double_factorial(int m) {
    std::uint64_t r = 1;
    for (int k = m; k > 1; k -= 2) r *= static_cast<std::uint64_t>(k);
    return r;
}

}  // namespace detail

/// Number of Wick pairings (4v+n-1)!! before connectivity pruning.
inline std::uint64_t pairing_count(int v, int n) {
    int h = 4 * v + n;
    if (h % 2 != 0) return 0;
    return h == 0 ? 1 : detail::double_factorial(h - 1);
}

/// Classifies a complete pairing; throws if it is not a perfect matching or not connected.
inline Topology classify(const RibbonDiagram& d) {
    int H = 4 * d.v + d.n;
    if (static_cast<int>(d.partner.size()) != H) throw std::invalid_argument("pairing has wrong size");
    detail::PairingWalker shape(d.v, d.n);
    detail::RollbackUnionFind idx(4 * d.v + 2 * d.n), comp(d.v + d.n);
    for (int a = 0; a < H; ++a) {
        int b = d.partner[static_cast<std::size_t>(a)];
        if (b < 0 || b >= H || b == a || d.partner[static_cast<std::size_t>(b)] != a)
            throw std::invalid_argument("not a perfect matching");
        if (b < a) continue;
        idx.unite(shape.first_slot(a), shape.second_slot(b));
        idx.unite(shape.second_slot(a), shape.first_slot(b));
        comp.unite(shape.node_of(a), shape.node_of(b));
    }
    if (comp.components() > 1) throw std::invalid_argument("not connected");
    Topology t;
    t.ribbons = H / 2;
    t.loops = idx.components() - d.n;
    t.successor.assign(static_cast<std::size_t>(d.n), -1);
    std::map<int, int> label_of_root;
    for (int i = 0; i < d.n; ++i) label_of_root[idx.find(2 * i)] = i;
    for (int i = 0; i < d.n; ++i) t.successor[static_cast<std::size_t>(i)] = label_of_root.at(idx.find(2 * i + 1));
    t.boundaries = detail::PairingWalker::count_cycles(t.successor);
    int chi = d.v - t.ribbons + d.n + t.loops;
    t.genus = (2 - t.boundaries - chi) / 2;
    return t;
}

/// Calls f(const RibbonDiagram&) for every connected pairing with v vertices whose boundary
/// permutation matches the boundary (and genus, if given). Deterministic order.
template <class F>
void for_each_diagram(int v, const BoundarySpec& boundary, std::optional<int> genus, F&& f) {
    int n = boundary.leg_count();
    if ((4 * v + n) % 2 != 0) return;
    auto succ = boundary.successor();
    detail::PairingWalker walker(v, n);
    RibbonDiagram d;
    d.v = v;
    d.n = n;
    walker.run([&](const detail::PairingWalker& w) {
        Topology t = w.topology();
        if (t.successor != succ) return;
        if (genus && t.genus != *genus) return;
        d.partner = w.partner();
        d.topology = std::move(t);
        f(static_cast<const RibbonDiagram&>(d));
    });
}

inline std::vector<RibbonDiagram> enumerate_diagrams(int v, const BoundarySpec& boundary,
                                                     std::optional<int> genus = std::nullopt) {
    std::vector<RibbonDiagram> out;
    for_each_diagram(v, boundary, genus, [&](const RibbonDiagram& d) { out.push_back(d); });
    return out;
}

/// Sorted ribbon list of a pairing in terms of line ids: ids < n are open lines (labelled by
/// their starting leg), ids >= n are loops. Pairings sharing a key share their weight.
struct WeightKey {
    static constexpr int kMaxRibbons = 16;
    std::array<std::uint16_t, kMaxRibbons> ribbons{};
    std::uint8_t ribbon_count = 0;
    std::uint8_t loop_count = 0;

    friend bool operator==(const WeightKey&, const WeightKey&) = default;
    friend bool operator<(const WeightKey& a, const WeightKey& b) {
        return std::tie(a.ribbon_count, a.loop_count, a.ribbons) < std::tie(b.ribbon_count, b.loop_count, b.ribbons);
    }
    std::pair<int, int> ribbon(int i) const {
        auto code = ribbons[static_cast<std::size_t>(i)];
        return {code >> 6, code & 63};
    }
};

struct WeightKeyHash {
    std::size_t operator()(const WeightKey& k) const noexcept {
        std::uint64_t h = 1469598103934665603ull ^ k.loop_count;
        for (int i = 0; i < k.ribbon_count; ++i) h = (h ^ k.ribbons[static_cast<std::size_t>(i)]) * 1099511628211ull;
        return static_cast<std::size_t>(h);
    }
};

/// All connected pairings of given (v, n) bucketed by (boundary permutation, genus).
class PairingAtlas {
public:
    struct Options {
        bool collect_keys = true;
        int key_genus = 0;  ///< weight keys are kept only for this genus
        std::uint64_t budget = 40'000'000;
        int threads = 1;
    };
    struct Bucket {
        std::uint64_t pairings = 0;
        std::vector<std::pair<WeightKey, std::uint64_t>> keys;  ///< sorted; sum of counts == pairings
    };

    PairingAtlas(int v, int n, Options opt) : v_(v), n_(n), opt_(opt) {
        if (n > 15 || 2 * v + n / 2 > WeightKey::kMaxRibbons) throw std::invalid_argument("diagram too large for atlas");
        std::uint64_t total = pairing_count(v, n);
        if (total > opt.budget)
            throw ResourceError("pairing budget exceeded: " + std::to_string(total) + " pairings for v=" +
                                std::to_string(v) + ", n=" + std::to_string(n));
        build();
    }

    int vertices() const { return v_; }
    int legs() const { return n_; }
    bool has_keys() const { return opt_.collect_keys; }
    int key_genus() const { return opt_.key_genus; }
    std::uint64_t connected_pairings() const {
        std::uint64_t s = 0;
        for (const auto& [id, b] : buckets_) s += b.pairings;
        return s;
    }
    /// 4^v v!, the pairing multiplicity of one labelled open diagram.
    Rational normalization() const {
        Rational f = 1;
        for (int k = 1; k <= v_; ++k) f *= 4 * k;
        return f;
    }

    const Bucket* find(const std::vector<int>& successor, int genus) const {
        auto it = buckets_.find(bucket_id(successor, genus));
        return it == buckets_.end() ? nullptr : &it->second;
    }
    std::uint64_t pairings(const std::vector<int>& successor, int genus) const {
        const Bucket* b = find(successor, genus);
        return b ? b->pairings : 0;
    }
    /// (successor, genus, pairings) for every nonempty bucket, in deterministic order.
    std::vector<std::tuple<std::vector<int>, int, std::uint64_t>> buckets() const {
        std::vector<std::tuple<std::vector<int>, int, std::uint64_t>> out;
        for (const auto& [id, b] : buckets_) out.emplace_back(decode_successor(id), static_cast<int>(id >> 60), b.pairings);
        return out;
    }

private:
    static std::uint64_t bucket_id(const std::vector<int>& succ, int genus) {
        std::uint64_t id = static_cast<std::uint64_t>(genus) << 60;
        for (std::size_t i = 0; i < succ.size(); ++i) id |= static_cast<std::uint64_t>(succ[i]) << (4 * i);
        return id;
    }
    std::vector<int> decode_successor(std::uint64_t id) const {
        std::vector<int> s(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) s[static_cast<std::size_t>(i)] = static_cast<int>((id >> (4 * i)) & 15);
        return s;
    }

    struct Partial {
        std::map<std::uint64_t, std::uint64_t> counts;
        std::map<std::uint64_t, std::unordered_map<WeightKey, std::uint64_t, WeightKeyHash>> keys;
    };

    void walk(const std::vector<int>& first_choices, Partial& out) const {
        detail::PairingWalker walker(v_, n_);
        std::unordered_map<std::uint64_t, std::uint64_t> counts;
        std::vector<std::pair<int, int>> rib;
        walker.run(
            [&](const detail::PairingWalker& w) {
                Topology t = w.topology();
                std::uint64_t id = bucket_id(t.successor, t.genus);
                ++counts[id];
                if (!opt_.collect_keys || t.genus != opt_.key_genus) return;
                WeightKey key;
                key.loop_count = static_cast<std::uint8_t>(w.ribbon_classes(rib));
                std::sort(rib.begin(), rib.end());
                key.ribbon_count = static_cast<std::uint8_t>(rib.size());
                for (std::size_t i = 0; i < rib.size(); ++i)
                    key.ribbons[i] = static_cast<std::uint16_t>((rib[i].first << 6) | rib[i].second);
                ++out.keys[id][key];
            },
            first_choices);
        for (const auto& [id, c] : counts) out.counts[id] += c;
    }

    void build() {
        int H = 4 * v_ + n_;
        int threads = std::max(1, opt_.threads);
        std::vector<Partial> parts(static_cast<std::size_t>(threads));
        if (threads == 1 || H < 2) {
            walk({}, parts[0]);
        } else {
            std::vector<std::vector<int>> choices(static_cast<std::size_t>(threads));
            for (int b = 1; b < H; ++b) choices[static_cast<std::size_t>((b - 1) % threads)].push_back(b);
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t) {
                if (choices[static_cast<std::size_t>(t)].empty()) continue;
                pool.emplace_back([&, t] { walk(choices[static_cast<std::size_t>(t)], parts[static_cast<std::size_t>(t)]); });
            }
            for (auto& th : pool) th.join();
        }
        // merge in partition order; exact integer counts make the result order independent
        for (auto& p : parts) {
            for (const auto& [id, c] : p.counts) buckets_[id].pairings += c;
            for (auto& [id, km] : p.keys) {
                auto& merged = pending_[id];
                for (const auto& [k, c] : km) merged[k] += c;
            }
        }
        for (auto& [id, km] : pending_) {
            auto& vec = buckets_[id].keys;
            vec.assign(km.begin(), km.end());
            std::sort(vec.begin(), vec.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        }
        pending_.clear();
    }

    int v_, n_;
    Options opt_;
    std::map<std::uint64_t, Bucket> buckets_;
    std::map<std::uint64_t, std::unordered_map<WeightKey, std::uint64_t, WeightKeyHash>> pending_;
};

namespace detail {
inline const Rational& base_value(const Rational& x) { return x; }
template <class T, int V, int K>
const T& base_value(const MultiDual<T, V, K>& x) {
    return x.value();
}
}  // namespace detail

/// Sum over the keys of a bucket of multiplicity times ribbon weight prod 1/(E_x + E_y), with
/// every loop summed against the measure. label_values[i] is the spectral value of leg i.
template <class T>
T bucket_weight(const PairingAtlas::Bucket& bucket, const std::vector<T>& label_values, const LoopMeasure<T>& mu) {
    const int n = static_cast<int>(label_values.size());
    const int A = static_cast<int>(mu.atoms.size());
    const int P = n + A;
    std::vector<T> point(static_cast<std::size_t>(P));
    for (int i = 0; i < n; ++i) point[static_cast<std::size_t>(i)] = label_values[static_cast<std::size_t>(i)];
    for (int a = 0; a < A; ++a) point[static_cast<std::size_t>(n + a)] = mu.atoms[static_cast<std::size_t>(a)].first;
    std::vector<T> inv(static_cast<std::size_t>(P * P));
    std::vector<char> ok(static_cast<std::size_t>(P * P), 1);
    for (int i = 0; i < P; ++i)
        for (int j = i; j < P; ++j) {
            T s = point[static_cast<std::size_t>(i)] + point[static_cast<std::size_t>(j)];
            bool zero = detail::base_value(s) == 0;
            T val = zero ? T(0) : T(T(1) / s);
            inv[static_cast<std::size_t>(i * P + j)] = val;
            inv[static_cast<std::size_t>(j * P + i)] = val;
            ok[static_cast<std::size_t>(i * P + j)] = ok[static_cast<std::size_t>(j * P + i)] = !zero;
        }
    T total(0);
    std::vector<int> loop_atom;
    for (const auto& [key, count] : bucket.keys) {
        int s = key.loop_count;
        loop_atom.assign(static_cast<std::size_t>(s), 0);
        T key_sum(0);
        while (true) {
            T term(1);
            for (int l = 0; l < s; ++l) term *= mu.atoms[static_cast<std::size_t>(loop_atom[static_cast<std::size_t>(l)])].second;
            for (int r = 0; r < key.ribbon_count; ++r) {
                auto [x, y] = key.ribbon(r);
                int px = x < n ? x : n + loop_atom[static_cast<std::size_t>(x - n)];
                int py = y < n ? y : n + loop_atom[static_cast<std::size_t>(y - n)];
                if (!ok[static_cast<std::size_t>(px * P + py)]) throw std::domain_error("degenerate spectrum: E_p + E_q = 0");
                term *= inv[static_cast<std::size_t>(px * P + py)];
            }
            key_sum += term;
            int l = 0;
            while (l < s && ++loop_atom[static_cast<std::size_t>(l)] == A) loop_atom[static_cast<std::size_t>(l++)] = 0;
            if (l == s) break;
        }
        total += key_sum * T(Rational(static_cast<unsigned long>(count)));
    }
    return total;
}

/// Weight of one diagram (the summand of Prop.-style Feynman rules), loops summed.
template <class T>
T diagram_weight(const RibbonDiagram& d, const std::vector<T>& label_values, const LoopMeasure<T>& mu) {
    detail::PairingWalker shape(d.v, d.n);
    detail::RollbackUnionFind idx(4 * d.v + 2 * d.n);
    for (int a = 0; a < 4 * d.v + d.n; ++a) {
        int b = d.partner[static_cast<std::size_t>(a)];
        if (b < a) continue;
        idx.unite(shape.first_slot(a), shape.second_slot(b));
        idx.unite(shape.second_slot(a), shape.first_slot(b));
    }
    std::map<int, int> id_of_root;
    for (int i = 0; i < d.n; ++i) id_of_root[idx.find(2 * i)] = i;
    int next = d.n;
    std::vector<std::pair<int, int>> rib;
    for (int a = 0; a < 4 * d.v + d.n; ++a) {
        int b = d.partner[static_cast<std::size_t>(a)];
        if (b < a) continue;
        int ids[2];
        int slots[2] = {shape.first_slot(a), shape.first_slot(b)};
        for (int k = 0; k < 2; ++k) {
            int root = idx.find(slots[k]);
            auto it = id_of_root.find(root);
            if (it == id_of_root.end()) it = id_of_root.emplace(root, next++).first;
            ids[k] = it->second;
        }
        rib.emplace_back(std::min(ids[0], ids[1]), std::max(ids[0], ids[1]));
    }
    PairingAtlas::Bucket one;
    WeightKey key;
    key.loop_count = static_cast<std::uint8_t>(next - d.n);
    key.ribbon_count = static_cast<std::uint8_t>(rib.size());
    for (std::size_t i = 0; i < rib.size(); ++i)
        key.ribbons[i] = static_cast<std::uint16_t>((rib[i].first << 6) | rib[i].second);
    one.keys.emplace_back(key, 1);
    one.pairings = 1;
    return bucket_weight(one, label_values, mu);
}

/// Lazily built atlases shared by all correlator evaluations.
class DiagramLibrary {
public:
    explicit DiagramLibrary(PairingAtlas::Options opt = {}) : opt_(opt) {}

    const PairingAtlas& atlas(int v, int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_pair(v, n);
        auto it = atlases_.find(key);
        if (it == atlases_.end()) it = atlases_.emplace(key, std::make_unique<PairingAtlas>(v, n, opt_)).first;
        return *it->second;
    }
    /// Count-only atlas (no weight keys), used for the d=1 counting regime.
    const PairingAtlas& count_atlas(int v, int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_pair(v, n);
        auto it = count_atlases_.find(key);
        if (it == count_atlases_.end()) {
            if (auto full = atlases_.find(key); full != atlases_.end()) return *full->second;
            PairingAtlas::Options o = opt_;
            o.collect_keys = false;
            it = count_atlases_.emplace(key, std::make_unique<PairingAtlas>(v, n, o)).first;
        }
        return *it->second;
    }
    const PairingAtlas::Options& options() const { return opt_; }

private:
    PairingAtlas::Options opt_;
    std::mutex mutex_;
    std::map<std::pair<int, int>, std::unique_ptr<PairingAtlas>> atlases_;
    std::map<std::pair<int, int>, std::unique_ptr<PairingAtlas>> count_atlases_;
};

inline DiagramLibrary& default_library() {
    static DiagramLibrary lib;
    return lib;
}

/// Exact lambda-series of G^(genus) for the boundary; label_values[i] is the value of leg i.
/// Coefficient of lambda^v is (-1)^v sum_pairings weight / (4^v v!).
template <class T>
Series<T> correlator_series(const BoundarySpec& boundary, int genus, int order, const std::vector<T>& label_values,
                            const LoopMeasure<T>& mu, DiagramLibrary& lib = default_library()) {
    int n = boundary.leg_count();
    if (static_cast<int>(label_values.size()) != n) throw std::invalid_argument("one value per boundary label required");
    auto succ = boundary.successor();
    Series<T> s(order);
    if (n % 2 != 0) return s;
    for (int v = 0; v <= order; ++v) {
        if (n == 0 && v == 0) continue;  // the free-theory log term is not a rational series coefficient
        const PairingAtlas& at = lib.atlas(v, n);
        if (genus != at.key_genus()) throw std::invalid_argument("atlas keys were collected for another genus");
        const auto* bucket = at.find(succ, genus);
        if (!bucket) continue;
        T w = bucket_weight(*bucket, label_values, mu);
        T c = w / T(at.normalization());
        s[v] = (v % 2 == 0) ? c : T(-c);
    }
    return s;
}

/// Genus-g free energy series from vacuum pairings (lambda^0 term left at zero).
template <class T>
Series<T> free_energy_series(int genus, int order, const LoopMeasure<T>& mu, DiagramLibrary& lib = default_library()) {
    return correlator_series<T>(BoundarySpec{}, genus, order, {}, mu, lib);
}

/// d=1, e=1/2, r=N counting regime: every weight is 1, so coefficients are diagram counts.
inline Series<Rational> counting_series(const BoundarySpec& boundary, int genus, int order,
                                        DiagramLibrary& lib = default_library()) {
    int n = boundary.leg_count();
    auto succ = boundary.successor();
    Series<Rational> s(order);
    if (n % 2 != 0) return s;
    for (int v = 0; v <= order; ++v) {
        if (n == 0 && v == 0) continue;
        const PairingAtlas& at = lib.count_atlas(v, n);
        Rational c = Rational(static_cast<unsigned long>(at.pairings(succ, genus))) / at.normalization();
        s[v] = (v % 2 == 0) ? c : Rational(-c);
    }
    return s;
}

}  // namespace qkm
