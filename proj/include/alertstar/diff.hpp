#pragma once
// Dense reverse-mode differentiable arrays.
//
// Small by intent: exactly the primitives the alert-prediction models need,
// all double precision, all CPU. Each op records a backward closure; calling
// backward(loss) walks the recording in reverse creation order. The graph is
// held by shared_ptr ownership and freed once the loss handle goes out of
// scope.
//
// Reductions whose inputs form an unordered set (scatter-add, column sums,
// attention mixing, softmax denominators) sum their terms in a canonical
// value order, so permuting set elements reproduces bit-identical outputs
// despite floating-point non-associativity.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace alertstar {

using Shape = std::vector<int64_t>;
using Rng = std::mt19937_64;

inline int64_t shape_size(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Monotone key giving a total order on doubles by value (sign-aware bit trick).
inline uint64_t sort_key(double x) {
    uint64_t u = std::bit_cast<uint64_t>(x);
    return (u >> 63) ? ~u : (u | 0x8000000000000000ull);
}

// Order-canonical sum: sorts the buffer by value before accumulating, so any
// permutation of the same terms yields the same bits. Two-term sums are
// already commutative in IEEE754 and skip the sort.
inline double canonical_sum(std::vector<double>& buf) {
    if (buf.size() > 2) {
        std::sort(buf.begin(), buf.end(), [](double a, double b) { return sort_key(a) < sort_key(b); });
    }
    double s = 0.0;
    for (double v : buf) s += v;
    return s;
}

namespace detail {

inline std::atomic<uint64_t>& node_counter() {
    static std::atomic<uint64_t> c{0};
    return c;
}

struct Node {
    uint64_t id;
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;  // allocated iff tracked
    bool tracked = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backfn;  // pushes this->grad into parents

    Node(Shape s, std::vector<double> v, bool track)
        : id(node_counter().fetch_add(1, std::memory_order_relaxed)),
          shape(std::move(s)),
          val(std::move(v)),
          tracked(track) {
        if (static_cast<int64_t>(val.size()) != shape_size(shape))
            throw std::invalid_argument("node: value count does not match shape " + shape_str(shape));
        if (tracked) grad.assign(val.size(), 0.0);
    }
};

}  // namespace detail

class Array {
public:
    Array() = default;

    static Array from(Shape s, std::vector<double> v, bool tracked = false) {
        return Array(std::make_shared<detail::Node>(std::move(s), std::move(v), tracked));
    }
    static Array zeros(Shape s, bool tracked = false) {
        std::vector<double> v(static_cast<size_t>(shape_size(s)), 0.0);
        return from(std::move(s), std::move(v), tracked);
    }
    static Array full(Shape s, double x, bool tracked = false) {
        std::vector<double> v(static_cast<size_t>(shape_size(s)), x);
        return from(std::move(s), std::move(v), tracked);
    }
    static Array scalar(double x, bool tracked = false) { return from({1}, {x}, tracked); }
    static Array randn(Shape s, Rng& rng, double stddev, bool tracked = false) {
        std::normal_distribution<double> d(0.0, stddev);
        std::vector<double> v(static_cast<size_t>(shape_size(s)));
        for (auto& x : v) x = d(rng);
        return from(std::move(s), std::move(v), tracked);
    }

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int64_t size() const { return static_cast<int64_t>(n_->val.size()); }
    int64_t rows() const { return n_->shape.size() == 2 ? n_->shape[0] : 1; }
    int64_t cols() const { return n_->shape.back(); }
    bool tracked() const { return n_->tracked; }
    uint64_t id() const { return n_->id; }

    const std::vector<double>& values() const { return n_->val; }
    std::vector<double>& mutable_values() { return n_->val; }  // leaves only; invalidates no recording
    const std::vector<double>& grad() const {
        if (!n_->tracked) throw std::logic_error("grad requested on untracked array");
        return n_->grad;
    }
    void zero_grad() {
        if (n_->tracked) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
    }
    std::vector<double>& grad_ref() {
        if (!n_->tracked) throw std::logic_error("grad requested on untracked array");
        return n_->grad;
    }

    double item() const {
        if (size() != 1) throw std::invalid_argument("item: array not scalar, shape " + shape_str(shape()));
        return n_->val[0];
    }
    double at(int64_t i) const { return n_->val[static_cast<size_t>(i)]; }
    double at(int64_t r, int64_t c) const { return n_->val[static_cast<size_t>(r * cols() + c)]; }

    std::shared_ptr<detail::Node> node() const { return n_; }

private:
    explicit Array(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;

    friend Array make_op(Shape, std::vector<double>, std::vector<Array>, std::function<void(detail::Node&)>);
};

inline Array make_op(Shape s, std::vector<double> v, std::vector<Array> parents,
                     std::function<void(detail::Node&)> backfn) {
    bool track = false;
    for (const auto& p : parents) track = track || p.tracked();
    auto n = std::make_shared<detail::Node>(std::move(s), std::move(v), track);
    if (track) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backfn = std::move(backfn);
    }
    return Array(n);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Reverse traversal from a scalar loss. Tracked grads accumulate: repeated
// calls without zero_grad() add up.
inline void backward(const Array& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (!loss.tracked()) return;  // constant loss: nothing to do, all grads stay zero

    std::vector<detail::Node*> order;
    std::vector<detail::Node*> stack{loss.node().get()};
    // reachable tracked subgraph
    std::vector<uint64_t> seen;
    auto mark = [&](detail::Node* n) {
        auto it = std::lower_bound(seen.begin(), seen.end(), n->id);
        if (it != seen.end() && *it == n->id) return false;
        seen.insert(it, n->id);
        return true;
    };
    mark(loss.node().get());
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->tracked && mark(p.get())) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id > b->id; });

    // Interior nodes restart from zero each pass; leaves accumulate across
    // repeated backward calls.
    for (detail::Node* n : order)
        if (!n->parents.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);

    loss.node()->grad[0] += 1.0;
    for (detail::Node* n : order)
        if (n->backfn) n->backfn(*n);
}

// ---------------------------------------------------------------------------
// elementwise and broadcasting ops
// ---------------------------------------------------------------------------

namespace detail {
// b broadcasts over a if equal shape, row-vector [1,n] against [m,n], or scalar.
enum class Bcast { same, row, scal, none };
inline Bcast bcast_kind(const Shape& a, const Shape& b) {
    if (a == b) return Bcast::same;
    if (shape_size(b) == 1) return Bcast::scal;
    if (a.size() == 2 && b.size() == 2 && b[0] == 1 && b[1] == a[1]) return Bcast::row;
    if (a.size() == 2 && b.size() == 1 && b[0] == a[1]) return Bcast::row;
    return Bcast::none;
}
}  // namespace detail

inline Array add(const Array& a, const Array& b) {
    auto k = detail::bcast_kind(a.shape(), b.shape());
    if (k == detail::Bcast::none) shape_fail("add", a.shape(), b.shape());
    const int64_t n = a.size(), c = a.cols();
    std::vector<double> out(static_cast<size_t>(n));
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int64_t i = 0; i < n; ++i) {
        double bx = (k == detail::Bcast::same) ? bv[i] : (k == detail::Bcast::scal ? bv[0] : bv[i % c]);
        out[i] = av[i] + bx;
    }
    return make_op(a.shape(), std::move(out), {a, b}, [k, n, c](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.tracked)
            for (int64_t i = 0; i < n; ++i) pa.grad[i] += self.grad[i];
        if (pb.tracked) {
            for (int64_t i = 0; i < n; ++i) {
                size_t j = (k == detail::Bcast::same) ? i : (k == detail::Bcast::scal ? 0 : i % c);
                pb.grad[j] += self.grad[i];
            }
        }
    });
}

inline Array mul(const Array& a, const Array& b) {
    auto k = detail::bcast_kind(a.shape(), b.shape());
    if (k == detail::Bcast::none) shape_fail("mul", a.shape(), b.shape());
    const int64_t n = a.size(), c = a.cols();
    std::vector<double> out(static_cast<size_t>(n));
    const auto& av = a.values();
    const auto& bv = b.values();
    auto bput = [&](int64_t i) { return (k == detail::Bcast::same) ? bv[i] : (k == detail::Bcast::scal ? bv[0] : bv[i % c]); };
    for (int64_t i = 0; i < n; ++i) out[i] = av[i] * bput(i);
    return make_op(a.shape(), std::move(out), {a, b}, [k, n, c](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (int64_t i = 0; i < n; ++i) {
            size_t j = (k == detail::Bcast::same) ? i : (k == detail::Bcast::scal ? 0 : i % c);
            if (pa.tracked) pa.grad[i] += self.grad[i] * pb.val[j];
            if (pb.tracked) pb.grad[j] += self.grad[i] * pa.val[i];
        }
    });
}

inline Array scale(const Array& a, double c) {
    std::vector<double> out(a.values());
    for (auto& x : out) x *= c;
    return make_op(a.shape(), std::move(out), {a}, [c](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += c * self.grad[i];
    });
}

inline Array add_const(const Array& a, double c) {
    std::vector<double> out(a.values());
    for (auto& x : out) x += c;
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

inline Array sub(const Array& a, const Array& b) { return add(a, scale(b, -1.0)); }

inline Array relu(const Array& a) {
    std::vector<double> out(a.values());
    for (auto& x : out) x = (x > 0.0 || std::isnan(x)) ? x : 0.0;  // NaN passes through
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i)
            if (p.val[i] > 0.0) p.grad[i] += self.grad[i];
    });
}

inline Array sigmoid(const Array& a) {
    std::vector<double> out(a.values());
    for (auto& x : out) x = 1.0 / (1.0 + std::exp(-x));
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] * self.val[i] * (1.0 - self.val[i]);
    });
}

inline Array elem_log(const Array& a) {
    std::vector<double> out(a.values());
    for (auto& x : out) x = std::log(x);
    return make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] / p.val[i];
    });
}

// ---------------------------------------------------------------------------
// structure ops
// ---------------------------------------------------------------------------

inline Array reshape(const Array& a, Shape s) {
    if (shape_size(s) != a.size()) shape_fail("reshape", a.shape(), s);
    return make_op(std::move(s), std::vector<double>(a.values()), {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

inline Array transpose(const Array& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose: need rank-2, got " + shape_str(a.shape()));
    const int64_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(m * n));
    const auto& av = a.values();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    return make_op({n, m}, std::move(out), {a}, [m, n](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j * m + i];
    });
}

// Concatenate along the last axis. Inputs must agree on leading dimension.
inline Array concat_cols(const Array& a, const Array& b) {
    if (a.shape().size() != b.shape().size()) shape_fail("concat", a.shape(), b.shape());
    const int64_t m = a.rows();
    if (b.rows() != m) shape_fail("concat", a.shape(), b.shape());
    const int64_t ca = a.cols(), cb = b.cols();
    Shape s = a.shape();
    s.back() = ca + cb;
    std::vector<double> out(static_cast<size_t>(m * (ca + cb)));
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.values()[i * ca + j];
        for (int64_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = b.values()[i * cb + j];
    }
    return make_op(std::move(s), std::move(out), {a, b}, [m, ca, cb](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (int64_t i = 0; i < m; ++i) {
            if (pa.tracked)
                for (int64_t j = 0; j < ca; ++j) pa.grad[i * ca + j] += self.grad[i * (ca + cb) + j];
            if (pb.tracked)
                for (int64_t j = 0; j < cb; ++j) pb.grad[i * cb + j] += self.grad[i * (ca + cb) + ca + j];
        }
    });
}

// Row stacking expressed through the last-axis primitive.
inline Array vstack(const std::vector<Array>& rows) {
    if (rows.empty()) throw std::invalid_argument("vstack: no rows");
    Array acc = transpose(rows[0].shape().size() == 2 ? rows[0] : reshape(rows[0], {1, rows[0].size()}));
    for (size_t i = 1; i < rows.size(); ++i) {
        const Array& r = rows[i];
        acc = concat_cols(acc, transpose(r.shape().size() == 2 ? r : reshape(r, {1, r.size()})));
    }
    return transpose(acc);
}

inline Array matmul(const Array& a, const Array& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        shape_fail("matmul", a.shape(), b.shape());
    const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
            const double s = av[i * k + p];
            if (s == 0.0) continue;
            for (int64_t j = 0; j < n; ++j) out[i * n + j] += s * bv[p * n + j];
        }
    return make_op({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.tracked)
            for (int64_t i = 0; i < m; ++i)
                for (int64_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int64_t j = 0; j < n; ++j) s += self.grad[i * n + j] * pb.val[p * n + j];
                    pa.grad[i * k + p] += s;
                }
        if (pb.tracked)
            for (int64_t p = 0; p < k; ++p)
                for (int64_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int64_t i = 0; i < m; ++i) s += pa.val[i * k + p] * self.grad[i * n + j];
                    pb.grad[p * n + j] += s;
                }
    });
}

// ---------------------------------------------------------------------------
// normalisation and attention ops
// ---------------------------------------------------------------------------

// Softmax over the last axis. The exp-sum is order-canonical so permuting a
// row's entries together with downstream consumers stays bit-stable.
inline Array softmax_rows(const Array& a) {
    const int64_t m = a.rows(), c = a.cols();
    std::vector<double> out(a.values().size());
    std::vector<double> buf;
    const auto& av = a.values();
    for (int64_t i = 0; i < m; ++i) {
        double mx = av[i * c];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, av[i * c + j]);
        buf.resize(static_cast<size_t>(c));
        for (int64_t j = 0; j < c; ++j) buf[j] = std::exp(av[i * c + j] - mx);
        std::vector<double> terms(buf);
        const double z = canonical_sum(terms);
        for (int64_t j = 0; j < c; ++j) out[i * c + j] = buf[j] / z;
    }
    return make_op(a.shape(), std::move(out), {a}, [m, c](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (int64_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.val[i * c + j];
            for (int64_t j = 0; j < c; ++j)
                p.grad[i * c + j] += self.val[i * c + j] * (self.grad[i * c + j] - dot);
        }
    });
}

// Layer normalisation over the last axis with population variance.
inline Array layer_norm_rows(const Array& a, double eps = 1e-5) {
    const int64_t m = a.rows(), c = a.cols();
    std::vector<double> out(a.values().size());
    std::vector<double> inv_std(static_cast<size_t>(m));
    std::vector<double> means(static_cast<size_t>(m));
    const auto& av = a.values();
    for (int64_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int64_t j = 0; j < c; ++j) mu += av[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            const double d = av[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        means[i] = mu;
        inv_std[i] = is;
        for (int64_t j = 0; j < c; ++j) out[i * c + j] = (av[i * c + j] - mu) * is;
    }
    return make_op(a.shape(), std::move(out), {a},
                   [m, c, inv_std = std::move(inv_std)](detail::Node& self) {
                       auto& p = *self.parents[0];
                       if (!p.tracked) return;
                       for (int64_t i = 0; i < m; ++i) {
                           double gmean = 0.0, gdot = 0.0;
                           for (int64_t j = 0; j < c; ++j) {
                               gmean += self.grad[i * c + j];
                               gdot += self.grad[i * c + j] * self.val[i * c + j];
                           }
                           gmean /= static_cast<double>(c);
                           gdot /= static_cast<double>(c);
                           for (int64_t j = 0; j < c; ++j)
                               p.grad[i * c + j] +=
                                   inv_std[i] * (self.grad[i * c + j] - gmean - self.val[i * c + j] * gdot);
                       }
                   });
}

// Inverted dropout. Identity when not training; otherwise keeps entries with
// probability 1-rate and scales by 1/(1-rate). Mask order is row-major from
// the supplied RNG, so a fixed seed reproduces the pass exactly.
inline Array dropout(const Array& a, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return a;
    std::bernoulli_distribution keep(1.0 - rate);
    const double inv = 1.0 / (1.0 - rate);
    std::vector<double> mask(a.values().size());
    std::vector<double> out(a.values().size());
    for (size_t i = 0; i < out.size(); ++i) {
        mask[i] = keep(rng) ? inv : 0.0;
        out[i] = a.values()[i] * mask[i];
    }
    return make_op(a.shape(), std::move(out), {a}, [mask = std::move(mask)](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i] * mask[i];
    });
}

// ---------------------------------------------------------------------------
// gather / scatter / reductions
// ---------------------------------------------------------------------------

// Row lookup from a [N,c] table; works for embedding tables and for picking
// rows out of any intermediate matrix.
inline Array lookup_rows(const Array& table, const std::vector<int64_t>& idx) {
    if (table.shape().size() != 2) throw std::invalid_argument("lookup: table must be rank-2");
    const int64_t nrows = table.shape()[0], c = table.shape()[1];
    for (int64_t i : idx)
        if (i < 0 || i >= nrows)
            throw std::out_of_range("lookup: row " + std::to_string(i) + " outside table of " + std::to_string(nrows));
    std::vector<double> out(idx.size() * static_cast<size_t>(c));
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(table.values().begin() + idx[r] * c, c, out.begin() + static_cast<int64_t>(r) * c);
    return make_op({static_cast<int64_t>(idx.size()), c}, std::move(out), {table},
                   [idx, c](detail::Node& self) {
                       auto& p = *self.parents[0];
                       if (!p.tracked) return;
                       for (size_t r = 0; r < idx.size(); ++r)
                           for (int64_t j = 0; j < c; ++j)
                               p.grad[idx[r] * c + j] += self.grad[static_cast<int64_t>(r) * c + j];
                   });
}

inline Array lookup_row(const Array& table, int64_t i) { return lookup_rows(table, std::vector<int64_t>{i}); }

// Adds message rows into destination rows of a fresh [nrows,c] output.
// Contributions to each output cell are summed in canonical value order, so
// the result is independent of message ordering and of any chunked message
// construction upstream.
inline Array scatter_add_rows(const Array& messages, const std::vector<int64_t>& dest, int64_t nrows) {
    if (messages.shape().size() != 2) throw std::invalid_argument("scatter_add: messages must be rank-2");
    const int64_t e = messages.shape()[0], c = messages.shape()[1];
    if (static_cast<int64_t>(dest.size()) != e)
        throw std::invalid_argument("scatter_add: " + std::to_string(dest.size()) + " destinations for " +
                                    std::to_string(e) + " messages");
    for (int64_t d : dest)
        if (d < 0 || d >= nrows)
            throw std::out_of_range("scatter_add: destination " + std::to_string(d) + " outside " +
                                    std::to_string(nrows) + " rows");
    // group message indices by destination
    std::vector<std::vector<int64_t>> groups(static_cast<size_t>(nrows));
    for (int64_t i = 0; i < e; ++i) groups[static_cast<size_t>(dest[i])].push_back(i);
    std::vector<double> out(static_cast<size_t>(nrows * c), 0.0);
    std::vector<double> buf;
    const auto& mv = messages.values();
    for (int64_t v = 0; v < nrows; ++v) {
        const auto& g = groups[static_cast<size_t>(v)];
        if (g.empty()) continue;
        for (int64_t j = 0; j < c; ++j) {
            buf.resize(g.size());
            for (size_t t = 0; t < g.size(); ++t) buf[t] = mv[g[t] * c + j];
            out[v * c + j] = canonical_sum(buf);
        }
    }
    return make_op({nrows, c}, std::move(out), {messages}, [dest, c](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (size_t i = 0; i < dest.size(); ++i)
            for (int64_t j = 0; j < c; ++j)
                p.grad[static_cast<int64_t>(i) * c + j] += self.grad[dest[i] * c + j];
    });
}

inline Array sum_all(const Array& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    return make_op({1}, {s}, {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (auto& g : p.grad) g += self.grad[0];
    });
}

inline Array mean_all(const Array& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double s = 0.0;
    for (double x : a.values()) s += x;
    return make_op({1}, {s * inv}, {a}, [inv](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (auto& g : p.grad) g += self.grad[0] * inv;
    });
}

// Column sums of a [m,c] matrix -> [1,c], canonical term order per column.
inline Array sum_axis0(const Array& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("sum_axis0: need rank-2");
    const int64_t m = a.shape()[0], c = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(c));
    std::vector<double> buf(static_cast<size_t>(m));
    for (int64_t j = 0; j < c; ++j) {
        for (int64_t i = 0; i < m; ++i) buf[i] = a.values()[i * c + j];
        std::vector<double> terms(buf);
        out[j] = canonical_sum(terms);
    }
    return make_op({1, c}, std::move(out), {a}, [m, c](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.tracked) return;
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j];
    });
}

// Attention mixing out = weights * values with the inner sum over the token
// axis in canonical value order; permuting tokens (weights columns together
// with value rows) leaves the output bit-identical.
inline Array attn_mix(const Array& weights, const Array& vals) {
    if (weights.shape().size() != 2 || vals.shape().size() != 2 || weights.shape()[1] != vals.shape()[0])
        shape_fail("attn_mix", weights.shape(), vals.shape());
    const int64_t m = weights.shape()[0], s = weights.shape()[1], c = vals.shape()[1];
    std::vector<double> out(static_cast<size_t>(m * c));
    std::vector<double> buf(static_cast<size_t>(s));
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < c; ++j) {
            for (int64_t t = 0; t < s; ++t) buf[t] = weights.values()[i * s + t] * vals.values()[t * c + j];
            std::vector<double> terms(buf);
            out[i * c + j] = canonical_sum(terms);
        }
    return make_op({m, c}, std::move(out), {weights, vals}, [m, s, c](detail::Node& self) {
        auto& pw = *self.parents[0];
        auto& pv = *self.parents[1];
        if (pw.tracked)
            for (int64_t i = 0; i < m; ++i)
                for (int64_t t = 0; t < s; ++t) {
                    double g = 0.0;
                    for (int64_t j = 0; j < c; ++j) g += self.grad[i * c + j] * pv.val[t * c + j];
                    pw.grad[i * s + t] += g;
                }
        if (pv.tracked)
            for (int64_t t = 0; t < s; ++t)
                for (int64_t j = 0; j < c; ++j) {
                    double g = 0.0;
                    for (int64_t i = 0; i < m; ++i) g += pw.val[i * s + t] * self.grad[i * c + j];
                    pv.grad[t * c + j] += g;
                }
    });
}

}  // namespace alertstar
