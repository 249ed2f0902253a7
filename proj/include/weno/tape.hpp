#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "weno/kernels.hpp"
#include "weno/params.hpp"
#include "weno/tensor.hpp"
#include "weno/util.hpp"

namespace weno {

// Handle to a value recorded on a Tape. The tag pins it to the tape that
// created it so cross-tape use fails loudly.
struct Var {
    int id = -1;
    const void* tag = nullptr;
};

// Reverse-mode autodiff over Tensor<T>. Primitives compute eagerly and, when
// the tape is recording and the result depends on a parameter, push a
// backward closure. Construction order is topological, so backward() is a
// single reverse sweep that visits each node exactly once; parameter-leaf
// gradients are then added into their ParameterStore.
//
// Every primitive verifies operand shapes and rejects non-finite outputs.
template <typename T>
class Tape {
   public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    std::size_t size() const { return nodes_.size(); }

    const Tensor<T>& value(Var v) const { return node(v, "value").value; }

    // Gradient of the most recent backward() root with respect to v. Empty
    // for nodes that did not require gradients.
    const Tensor<T>& grad(Var v) const { return node(v, "grad").grad; }

    // --- leaves --------------------------------------------------------

    // Leaf with no gradient (inputs, constants).
    Var input(Tensor<T> value) { return push("input", std::move(value), false, nullptr); }

    // Differentiable copy of store parameter `name`. While recording,
    // backward() adds the accumulated gradient into the store entry.
    Var param(ParameterStore<T>& store, const std::string& name) {
        const int pidx = store.index_of(name);
        Var v = push("param", store.entry(pidx).value, recording_, nullptr);
        if (recording_) {
            Node& n = nodes_.back();
            n.store = &store;
            n.param_index = pidx;
        }
        return v;
    }

    // --- primitives ----------------------------------------------------

    // C[n,m] = A[n,k] · B[k,m]. A rank-1 B of length k is treated as a
    // column [k,1] and the result collapses to rank 1.
    Var matmul(Var av, Var bv) {
        const Tensor<T>& a = value_of(av, "matmul");
        const Tensor<T>& b = value_of(bv, "matmul");
        if (a.rank() != 2) throw std::invalid_argument("matmul: left operand must have rank 2");
        if (b.rank() != 1 && b.rank() != 2) {
            throw std::invalid_argument("matmul: right operand must have rank 1 or 2");
        }
        const long n = a.shape[0];
        const long k = a.shape[1];
        const bool vec = b.rank() == 1;
        const long m = vec ? 1 : b.shape[1];
        if (b.shape[0] != k) {
            throw std::invalid_argument("matmul: inner dimensions differ (" + shape_str(a.shape) +
                                        " vs " + shape_str(b.shape) + ")");
        }
        Tensor<T> out(vec ? std::vector<long>{n} : std::vector<long>{n, m});
        kern::matmul_nn(a.data.data(), b.data.data(), out.data.data(), n, k, m);
        const int aid = av.id;
        const int bid = bv.id;
        return push("matmul", std::move(out), needs(av) || needs(bv),
                    [aid, bid, n, k, m](Tape& t) {
                        const T* dc = t.out_grad();
                        Node& na = t.nodes_[static_cast<std::size_t>(aid)];
                        Node& nb = t.nodes_[static_cast<std::size_t>(bid)];
                        // dA[n,k] += dC[n,m] · B[k,m]^T
                        if (na.needs_grad) {
                            kern::matmul_nt_acc(dc, nb.value.data.data(), na.grad.data.data(), n,
                                                m, k);
                        }
                        // dB[k,m] += A[n,k]^T · dC[n,m]
                        if (nb.needs_grad) {
                            kern::matmul_tn_acc(na.value.data.data(), dc, nb.grad.data.data(), k,
                                                n, m);
                        }
                    });
    }

    enum class AddMode { same, row, scalar };

    // a + b with b either matching a's shape, a rank-1 row vector broadcast
    // over a rank-2 a, or a scalar.
    Var add(Var av, Var bv) {
        const Tensor<T>& a = value_of(av, "add");
        const Tensor<T>& b = value_of(bv, "add");
        AddMode mode;
        if (a.same_shape(b)) {
            mode = AddMode::same;
        } else if (b.is_scalar()) {
            mode = AddMode::scalar;
        } else if (a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1]) {
            mode = AddMode::row;
        } else {
            throw std::invalid_argument("add: incompatible shapes " + shape_str(a.shape) +
                                        " and " + shape_str(b.shape));
        }
        Tensor<T> out(a.shape);
        switch (mode) {
            case AddMode::same:
                kern::add(a.data.data(), b.data.data(), out.data.data(), a.numel());
                break;
            case AddMode::scalar:
                kern::affine(a.data.data(), T(1), b.data[0], out.data.data(), a.numel());
                break;
            case AddMode::row:
                kern::add_rowvec(a.data.data(), b.data.data(), out.data.data(), a.shape[0],
                                 a.shape[1]);
                break;
        }
        const int aid = av.id;
        const int bid = bv.id;
        const long rows = a.rank() == 2 ? a.shape[0] : 1;
        const long cols = a.rank() == 2 ? a.shape[1] : a.numel();
        return push("add", std::move(out), needs(av) || needs(bv),
                    [aid, bid, mode, rows, cols](Tape& t) {
                        const Tensor<T>& dy = t.out_grad_tensor();
                        Node& na = t.nodes_[static_cast<std::size_t>(aid)];
                        Node& nb = t.nodes_[static_cast<std::size_t>(bid)];
                        if (na.needs_grad) {
                            kern::axpy(T(1), dy.data.data(), na.grad.data.data(), dy.numel());
                        }
                        if (!nb.needs_grad) return;
                        switch (mode) {
                            case AddMode::same:
                                kern::axpy(T(1), dy.data.data(), nb.grad.data.data(), dy.numel());
                                break;
                            case AddMode::scalar:
                                nb.grad.data[0] += kern::sum(dy.data.data(), dy.numel());
                                break;
                            case AddMode::row: {
                                // Column sums of dy in a fixed order.
                                T* g = nb.grad.data.data();
                                const T* d = dy.data.data();
                                for (long r = 0; r < rows; ++r) {
                                    for (long c = 0; c < cols; ++c) g[c] += d[r * cols + c];
                                }
                                break;
                            }
                        }
                    });
    }

    // Elementwise product; shapes must match exactly.
    Var mul(Var av, Var bv) {
        const Tensor<T>& a = value_of(av, "mul");
        const Tensor<T>& b = value_of(bv, "mul");
        if (!a.same_shape(b)) {
            throw std::invalid_argument("mul: incompatible shapes " + shape_str(a.shape) +
                                        " and " + shape_str(b.shape));
        }
        Tensor<T> out(a.shape);
        kern::mul(a.data.data(), b.data.data(), out.data.data(), a.numel());
        const int aid = av.id;
        const int bid = bv.id;
        return push("mul", std::move(out), needs(av) || needs(bv), [aid, bid](Tape& t) {
            const Tensor<T>& dy = t.out_grad_tensor();
            Node& na = t.nodes_[static_cast<std::size_t>(aid)];
            Node& nb = t.nodes_[static_cast<std::size_t>(bid)];
            const long n = dy.numel();
            if (na.needs_grad) {
                const T* other = nb.value.data.data();
                const T* d = dy.data.data();
                T* g = na.grad.data.data();
                for (long i = 0; i < n; ++i) g[i] += d[i] * other[i];
            }
            if (nb.needs_grad) {
                const T* other = na.value.data.data();
                const T* d = dy.data.data();
                T* g = nb.grad.data.data();
                for (long i = 0; i < n; ++i) g[i] += d[i] * other[i];
            }
        });
    }

    // alpha * x + beta with constant alpha, beta.
    Var affine(Var xv, T alpha, T beta) {
        const Tensor<T>& x = value_of(xv, "affine");
        Tensor<T> out(x.shape);
        kern::affine(x.data.data(), alpha, beta, out.data.data(), x.numel());
        const int xid = xv.id;
        return push("affine", std::move(out), needs(xv), [xid, alpha](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            const Tensor<T>& dy = t.out_grad_tensor();
            kern::axpy(alpha, dy.data.data(), nx.grad.data.data(), dy.numel());
        });
    }

    Var tanh(Var xv) { return unary(xv, "tanh", &kern::tanh_fwd<T>, &kern::tanh_bwd<T>, true); }

    Var sigmoid(Var xv) {
        return unary(xv, "sigmoid", &kern::sigmoid_fwd<T>, &kern::sigmoid_bwd<T>, true);
    }

    Var relu(Var xv) { return unary(xv, "relu", &kern::relu_fwd<T>, &kern::relu_bwd<T>, false); }

    Var log(Var xv) { return unary(xv, "log", &kern::log_fwd<T>, &kern::log_bwd<T>, false); }

    // Softmax along the last axis. Rank-1 input is one row.
    Var softmax(Var xv) {
        const Tensor<T>& x = value_of(xv, "softmax");
        if (x.rank() != 1 && x.rank() != 2) {
            throw std::invalid_argument("softmax: input must have rank 1 or 2");
        }
        const long rows = x.rank() == 2 ? x.shape[0] : 1;
        const long cols = x.rank() == 2 ? x.shape[1] : x.shape[0];
        Tensor<T> out(x.shape);
        kern::softmax_rows(x.data.data(), out.data.data(), rows, cols);
        const int xid = xv.id;
        return push("softmax", std::move(out), needs(xv), [xid, rows, cols](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            const Node& ny = t.out_node();
            kern::softmax_rows_bwd(ny.grad.data.data(), ny.value.data.data(), nx.grad.data.data(),
                                   rows, cols);
        });
    }

    // Sum of all elements -> scalar.
    Var sum(Var xv) {
        const Tensor<T>& x = value_of(xv, "sum");
        Tensor<T> out(std::vector<long>{});
        out.data[0] = kern::sum(x.data.data(), x.numel());
        const int xid = xv.id;
        return push("sum", std::move(out), needs(xv), [xid](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            const T d = t.out_grad()[0];
            T* g = nx.grad.data.data();
            const long n = nx.grad.numel();
            for (long i = 0; i < n; ++i) g[i] += d;
        });
    }

    // Mean of all elements -> scalar.
    Var mean(Var xv) {
        const Tensor<T>& x = value_of(xv, "mean");
        const long n = x.numel();
        Tensor<T> out(std::vector<long>{});
        out.data[0] = kern::sum(x.data.data(), n) / static_cast<T>(n);
        const int xid = xv.id;
        return push("mean", std::move(out), needs(xv), [xid, n](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            const T d = t.out_grad()[0] / static_cast<T>(n);
            T* g = nx.grad.data.data();
            for (long i = 0; i < n; ++i) g[i] += d;
        });
    }

    // Row-wise maximum of a rank-2 input -> rank-1 [rows]. The gradient
    // routes to the first maximal element of each row.
    Var max_rows(Var xv) {
        const Tensor<T>& x = value_of(xv, "max_rows");
        if (x.rank() != 2) throw std::invalid_argument("max_rows: input must have rank 2");
        const long rows = x.shape[0];
        const long cols = x.shape[1];
        Tensor<T> out(std::vector<long>{rows});
        std::vector<long> arg(static_cast<std::size_t>(rows));
        kern::max_rows(x.data.data(), rows, cols, out.data.data(), arg.data());
        const int xid = xv.id;
        return push("max_rows", std::move(out), needs(xv),
                    [xid, cols, arg = std::move(arg)](Tape& t) {
                        Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
                        if (!nx.needs_grad) return;
                        const T* d = t.out_grad();
                        T* g = nx.grad.data.data();
                        for (std::size_t r = 0; r < arg.size(); ++r) {
                            g[static_cast<long>(r) * cols + arg[r]] += d[r];
                        }
                    });
    }

    // Transpose of a rank-2 tensor.
    Var transpose(Var xv) {
        const Tensor<T>& x = value_of(xv, "transpose");
        if (x.rank() != 2) throw std::invalid_argument("transpose: input must have rank 2");
        const long rows = x.shape[0];
        const long cols = x.shape[1];
        Tensor<T> out(std::vector<long>{cols, rows});
        kern::transpose(x.data.data(), out.data.data(), rows, cols);
        const int xid = xv.id;
        return push("transpose", std::move(out), needs(xv), [xid, rows, cols](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            // dX += dY^T with dY of shape [cols, rows].
            const T* d = t.out_grad();
            T* g = nx.grad.data.data();
            for (long r = 0; r < rows; ++r) {
                for (long c = 0; c < cols; ++c) g[r * cols + c] += d[c * rows + r];
            }
        });
    }

    // Same data under a new shape; element count must be preserved.
    Var reshape(Var xv, std::vector<long> shape) {
        const Tensor<T>& x = value_of(xv, "reshape");
        Tensor<T> out(std::move(shape), x.data);
        const int xid = xv.id;
        return push("reshape", std::move(out), needs(xv), [xid](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            const Tensor<T>& dy = t.out_grad_tensor();
            kern::axpy(T(1), dy.data.data(), nx.grad.data.data(), dy.numel());
        });
    }

    // Mean binary cross-entropy of predictions p against constant targets,
    // with predictions clamped away from {0, 1} before the logs.
    Var bce(Var pv, Tensor<T> targets) {
        const Tensor<T>& p = value_of(pv, "bce");
        if (!p.same_shape(targets)) {
            throw std::invalid_argument("bce: prediction shape " + shape_str(p.shape) +
                                        " does not match target shape " + shape_str(targets.shape));
        }
        for (const T t : targets.data) {
            if (!(t >= T(0) && t <= T(1))) {
                throw std::invalid_argument("bce: targets must lie in [0, 1]");
            }
        }
        const long n = p.numel();
        Tensor<T> elem(p.shape);
        kern::bce_fwd(targets.data.data(), p.data.data(), elem.data.data(), n);
        Tensor<T> out(std::vector<long>{});
        out.data[0] = kern::sum(elem.data.data(), n) / static_cast<T>(n);
        const int pid = pv.id;
        return push("bce", std::move(out), needs(pv),
                    [pid, n, targets = std::move(targets)](Tape& t) {
                        Node& np = t.nodes_[static_cast<std::size_t>(pid)];
                        if (!np.needs_grad) return;
                        // The mean spreads the upstream scalar as g/n per element.
                        Tensor<T> dy(np.value.shape);
                        const T g = t.out_grad()[0] / static_cast<T>(n);
                        for (T& v : dy.data) v = g;
                        kern::bce_bwd(dy.data.data(), targets.data.data(), np.value.data.data(),
                                      np.grad.data.data(), n);
                    });
    }

    // --- backward ------------------------------------------------------

    // Reverse sweep from a scalar root. Parameter-leaf gradients are added
    // into their stores, so several roots per step accumulate naturally.
    void backward(Var root) {
        const Node& rn = node(root, "backward");
        if (!recording_) throw std::logic_error("backward: tape is not recording");
        if (!rn.value.is_scalar()) {
            throw std::invalid_argument("backward: root must be a scalar, got shape " +
                                        shape_str(rn.value.shape));
        }
        if (!rn.needs_grad) return;  // no parameter feeds the root
        for (int i = 0; i <= root.id; ++i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.needs_grad) n.grad = Tensor<T>(n.value.shape);  // zero-filled
        }
        nodes_[static_cast<std::size_t>(root.id)].grad.data[0] = T(1);
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.needs_grad || !n.back) continue;
            out_id_ = i;
            n.back(*this);
        }
        for (int i = 0; i <= root.id; ++i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.store == nullptr || !n.needs_grad) continue;
            Tensor<T>& g = n.store->entry(n.param_index).grad;
            kern::axpy(T(1), n.grad.data.data(), g.data.data(), g.numel());
        }
    }

   private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        std::function<void(Tape&)> back;
        ParameterStore<T>* store = nullptr;  // set for parameter leaves
        int param_index = 0;
    };

    bool needs(Var v) const { return node(v, "gradient flag").needs_grad; }

    const Node& node(Var v, const char* what) const {
        if (v.tag != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
            throw std::logic_error(std::string(what) + ": variable is not on this tape");
        }
        return nodes_[static_cast<std::size_t>(v.id)];
    }

    const Tensor<T>& value_of(Var v, const char* op) const { return node(v, op).value; }

    // Node whose backward closure is currently running.
    Node& out_node() { return nodes_[static_cast<std::size_t>(out_id_)]; }
    const Tensor<T>& out_grad_tensor() { return out_node().grad; }
    const T* out_grad() { return out_node().grad.data.data(); }

    Var push(const char* op, Tensor<T> value, bool needs_grad, std::function<void(Tape&)> back) {
        if (!value.all_finite()) {
            throw std::runtime_error(
                std::string("numeric overflow: non-finite value produced by ") + op);
        }
        Node n;
        n.value = std::move(value);
        n.needs_grad = recording_ && needs_grad;
        if (n.needs_grad) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1, this};
    }

    using UnaryFwd = void (*)(const T*, T*, long);
    using UnaryBwd = void (*)(const T*, const T*, T*, long);

    // Shared plumbing for tanh/sigmoid/relu/log. `bwd_uses_output` selects
    // whether the backward kernel reads the output (tanh, sigmoid) or the
    // input (relu, log).
    Var unary(Var xv, const char* op, UnaryFwd fwd, UnaryBwd bwd, bool bwd_uses_output) {
        const Tensor<T>& x = value_of(xv, op);
        Tensor<T> out(x.shape);
        fwd(x.data.data(), out.data.data(), x.numel());
        const int xid = xv.id;
        return push(op, std::move(out), needs(xv), [xid, bwd, bwd_uses_output](Tape& t) {
            Node& nx = t.nodes_[static_cast<std::size_t>(xid)];
            if (!nx.needs_grad) return;
            const Node& ny = t.out_node();
            const T* ref = bwd_uses_output ? ny.value.data.data() : nx.value.data.data();
            bwd(ny.grad.data.data(), ref, nx.grad.data.data(), ny.value.numel());
        });
    }

    std::vector<Node> nodes_;
    bool recording_ = true;
    int out_id_ = -1;
};

}  // namespace weno
